# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: frozen-environment simulation, exhaustive search, MCTS.

Twin of reference.py: identical algorithms, identical splitmix64 streams,
identical float operation order.
"""

from libc.math cimport exp, tanh, log, sqrt, INFINITY
from libc.stdint cimport uint64_t, int64_t

import numpy as np

BACKEND_NAME = "compiled"

POLICY_RANDOM = 0
POLICY_GREEDY = 1
POLICY_GRPROP = 2

DEF MAX_N = 64        # subtasks
DEF MAX_INST = 128    # object instances
DEF MAX_CELLS = 4096  # grid cells
DEF MAX_TERMS = 512   # flattened AND terms
DEF MAX_PAIRS = 13    # shared-type instance pairs (optimal search)

cdef uint64_t RNG_MASK = <uint64_t>0xFFFFFFFFFFFFFFFF


cdef inline uint64_t _rng_next(uint64_t* state) noexcept nogil:
    state[0] = state[0] + <uint64_t>0x9E3779B97F4A7C15
    cdef uint64_t z = state[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline int _rng_bounded(uint64_t* state, int n) noexcept nogil:
    return <int>(_rng_next(state) % <uint64_t>n)


cdef class Sim:
    """C-side view of a SimPack plus mutable episode state."""

    cdef int n, height, width, size, n_terms, n_inst
    cdef double[::1] reward
    cdef int[::1] or_off, term_size, and_off, and_child
    cdef signed char[::1] and_neg, opt_inter
    cdef short[::1] opt_type
    cdef int[::1] inst_pos0
    cdef short[::1] inst_type0
    cdef unsigned char[::1] passable
    cdef bint all_passable
    cdef int ice_type, agent0
    cdef double alpha_or, beta_or, alpha_and, beta_and

    # mutable episode state
    cdef unsigned char comp[MAX_N]
    cdef unsigned char alive[MAX_INST]
    cdef short ctype[MAX_INST]
    cdef int agent, rem

    # scratch
    cdef int dist[MAX_CELLS]
    cdef int queue[MAX_CELLS]
    cdef double dand[MAX_TERMS]
    cdef double share_den[MAX_N]
    cdef double cellbuf[MAX_N * MAX_N]
    cdef int cellidx[MAX_N * MAX_N]
    cdef int cell_len[MAX_N]
    cdef double vprop[MAX_N]
    cdef double wprop[MAX_N]
    cdef double scores[MAX_N]
    cdef unsigned char elig[MAX_N]
    cdef unsigned char ach[MAX_N]

    def __init__(self, pack):
        self.n = pack.n
        self.height = pack.height
        self.width = pack.width
        self.size = pack.height * pack.width
        if self.n > MAX_N or self.size > MAX_CELLS:
            raise ValueError("graph or map too large for the compiled kernel")
        self.reward = np.ascontiguousarray(pack.reward, dtype=np.float64)
        self.or_off = np.ascontiguousarray(pack.or_off, dtype=np.int32)
        self.term_size = np.ascontiguousarray(pack.term_size, dtype=np.int32)
        self.and_off = np.ascontiguousarray(pack.and_off, dtype=np.int32)
        self.and_child = np.ascontiguousarray(pack.and_child, dtype=np.int32)
        self.and_neg = np.ascontiguousarray(pack.and_neg, dtype=np.int8)
        self.opt_inter = np.ascontiguousarray(pack.opt_inter, dtype=np.int8)
        self.opt_type = np.ascontiguousarray(pack.opt_type, dtype=np.int16)
        self.inst_pos0 = np.ascontiguousarray(pack.inst_pos, dtype=np.int32)
        self.inst_type0 = np.ascontiguousarray(pack.inst_type, dtype=np.int16)
        self.passable = np.ascontiguousarray(pack.passable, dtype=np.uint8)
        self.n_terms = len(pack.term_size)
        self.n_inst = len(pack.inst_pos)
        if self.n_terms > MAX_TERMS or self.n_inst > MAX_INST:
            raise ValueError("graph too large for the compiled kernel")
        self.all_passable = pack.all_passable
        self.ice_type = pack.ice_type
        self.agent0 = pack.agent0
        self.alpha_or = pack.alpha_or
        self.beta_or = pack.beta_or
        self.alpha_and = pack.alpha_and
        self.beta_and = pack.beta_and

    cdef void reset(self, int budget) noexcept:
        cdef int i
        for i in range(self.n):
            self.comp[i] = 0
        for i in range(self.n_inst):
            self.alive[i] = 1
            self.ctype[i] = self.inst_type0[i]
        self.agent = self.agent0
        self.rem = budget

    cdef void load_state(self, unsigned char[::1] completion, int agent, int rem,
                         unsigned char[::1] inst_alive, short[::1] inst_ctype) noexcept:
        cdef int i
        for i in range(self.n):
            self.comp[i] = completion[i]
        for i in range(self.n_inst):
            self.alive[i] = inst_alive[i]
            self.ctype[i] = inst_ctype[i]
        self.agent = agent
        self.rem = rem

    # -- graph semantics ----------------------------------------------------

    cdef void _eligibility(self) noexcept nogil:
        cdef int i, t, e, pre, ok
        for i in range(self.n):
            if self.or_off[i] == self.or_off[i + 1]:
                pre = 1
            else:
                pre = 0
                for t in range(self.or_off[i], self.or_off[i + 1]):
                    ok = 1
                    for e in range(self.and_off[t], self.and_off[t + 1]):
                        if self.and_neg[e]:
                            if self.comp[self.and_child[e]]:
                                ok = 0
                                break
                        else:
                            if not self.comp[self.and_child[e]]:
                                ok = 0
                                break
                    if ok:
                        pre = 1
                        break
            self.elig[i] = 1 if (pre and not self.comp[i]) else 0

    cdef void _grprop_scores(self) noexcept nogil:
        # Rewards propagate down the graph: each parent splits its value
        # among its precondition children in proportion to the smoothed
        # AND sensitivities (per-child cells aggregated in first-touch edge
        # order, matching the Python fallback bit for bit).
        cdef int i, t, e, k, hop, live, m, nt, base, found
        cdef double s, z, sig, coeff, x, sign, dsum
        for t in range(self.n_terms):
            s = 0.0
            for e in range(self.and_off[t], self.and_off[t + 1]):
                x = <double>self.comp[self.and_child[e]]
                if self.and_neg[e]:
                    s += 1.0 - x
                else:
                    s += x
            z = (s - self.term_size[t] + 0.5) / self.beta_and
            sig = 1.0 / (1.0 + exp(-z))
            self.dand[t] = (self.alpha_and / self.beta_and) * sig * (1.0 - sig)
        for i in range(self.n):
            self.scores[i] = self.reward[i]
            self.vprop[i] = self.reward[i]
        for i in range(self.n):
            base = i * MAX_N
            nt = 0
            for t in range(self.or_off[i], self.or_off[i + 1]):
                for e in range(self.and_off[t], self.and_off[t + 1]):
                    sign = -1.0 if self.and_neg[e] else 1.0
                    k = self.and_child[e]
                    found = -1
                    for m in range(nt):
                        if self.cellidx[base + m] == k:
                            found = m
                            break
                    if found < 0:
                        found = nt
                        self.cellidx[base + nt] = k
                        self.cellbuf[base + nt] = 0.0
                        nt += 1
                    self.cellbuf[base + found] += self.dand[t] * sign
            dsum = 0.0
            for m in range(nt):
                dsum += self.cellbuf[base + m] if self.cellbuf[base + m] >= 0 else -self.cellbuf[base + m]
            self.share_den[i] = dsum
            self.cell_len[i] = nt
        for hop in range(self.n):
            for k in range(self.n):
                self.wprop[k] = 0.0
            for i in range(self.n):
                if self.vprop[i] == 0.0 or self.share_den[i] == 0.0:
                    continue
                base = i * MAX_N
                coeff = self.vprop[i] / self.share_den[i]
                for m in range(self.cell_len[i]):
                    self.wprop[self.cellidx[base + m]] += coeff * self.cellbuf[base + m]
            live = 0
            for k in range(self.n):
                if self.wprop[k] != 0.0:
                    self.scores[k] += self.wprop[k]
                    live = 1
            if not live:
                break
            for k in range(self.n):
                self.vprop[k] = self.wprop[k]
        for i in range(self.n):
            self.scores[i] = 0.5 * self.scores[i]

    # -- geometry -----------------------------------------------------------

    cdef void _bfs(self, int start) noexcept nogil:
        cdef int i, head, tail, cell, d, r, c, W
        W = self.width
        for i in range(self.size):
            self.dist[i] = -1
        self.dist[start] = 0
        self.queue[0] = start
        head = 0
        tail = 1
        while head < tail:
            cell = self.queue[head]
            head += 1
            d = self.dist[cell] + 1
            r = cell / W
            c = cell % W
            if r > 0 and self.passable[cell - W] and self.dist[cell - W] < 0:
                self.dist[cell - W] = d
                self.queue[tail] = cell - W
                tail += 1
            if r + 1 < self.height and self.passable[cell + W] and self.dist[cell + W] < 0:
                self.dist[cell + W] = d
                self.queue[tail] = cell + W
                tail += 1
            if c > 0 and self.passable[cell - 1] and self.dist[cell - 1] < 0:
                self.dist[cell - 1] = d
                self.queue[tail] = cell - 1
                tail += 1
            if c + 1 < W and self.passable[cell + 1] and self.dist[cell + 1] < 0:
                self.dist[cell + 1] = d
                self.queue[tail] = cell + 1
                tail += 1

    cdef int _nearest(self, int type_id, int* out_dist) noexcept nogil:
        """Nearest live instance of a type; ties by cell row-major, then
        index. Returns instance index or -1."""
        cdef int k, cell, d, ar, ac, r, c, W
        cdef int best_k = -1, best_d = -1, best_cell = -1
        W = self.width
        if not self.all_passable:
            self._bfs(self.agent)
        ar = self.agent / W
        ac = self.agent % W
        for k in range(self.n_inst):
            if not self.alive[k] or self.ctype[k] != type_id:
                continue
            cell = self.inst_pos0[k]
            if self.all_passable:
                r = cell / W
                c = cell % W
                d = (r - ar if r >= ar else ar - r) + (c - ac if c >= ac else ac - c)
            else:
                d = self.dist[cell]
                if d < 0:
                    continue
            if best_k < 0 or d < best_d or (d == best_d and cell < best_cell):
                best_k = k
                best_d = d
                best_cell = cell
        out_dist[0] = best_d
        return best_k

    # -- option execution -----------------------------------------------------

    cdef double _step_option(self, int subtask, int* out_steps, int* out_completed) noexcept nogil:
        cdef int k, d, was_elig, inter
        cdef double reward = 0.0
        self._eligibility()
        was_elig = self.elig[subtask]
        k = self._nearest(self.opt_type[subtask], &d)
        if k < 0:
            self.rem -= 1
            out_steps[0] = 1
            out_completed[0] = 0
            return 0.0
        if d + 1 > self.rem:
            out_steps[0] = self.rem
            self.rem = 0
            out_completed[0] = 0
            return 0.0
        self.rem -= d + 1
        self.agent = self.inst_pos0[k]
        inter = self.opt_inter[subtask]
        if inter == 0:
            self.alive[k] = 0
        elif inter == 1:
            self.ctype[k] = <short>self.ice_type
        out_steps[0] = d + 1
        if was_elig:
            self.comp[subtask] = 1
            reward = self.reward[subtask]
            out_completed[0] = 1
        else:
            out_completed[0] = 0
        return reward

    cdef int _choose(self, int kind, uint64_t* rng) noexcept nogil:
        cdef int i, count, best
        cdef int ids[MAX_N]
        self._eligibility()
        count = 0
        for i in range(self.n):
            if self.elig[i]:
                ids[count] = i
                count += 1
        if count == 0:
            return -1
        if kind == 0:
            return ids[_rng_bounded(rng, count)]
        if kind == 1:
            best = ids[0]
            for i in range(1, count):
                if self.reward[ids[i]] > self.reward[best]:
                    best = ids[i]
            return best
        self._grprop_scores()
        best = ids[0]
        for i in range(1, count):
            if self.scores[ids[i]] > self.scores[best]:
                best = ids[i]
        return best


# -- module-level API (mirrors reference.py) ----------------------------------


def eligibility(pack, completion):
    cdef Sim sim = Sim(pack)
    cdef int i
    comp = np.ascontiguousarray(completion, dtype=np.uint8)
    cdef unsigned char[::1] cv = comp
    for i in range(sim.n):
        sim.comp[i] = cv[i]
    sim._eligibility()
    out = np.zeros(sim.n, dtype=np.uint8)
    cdef unsigned char[::1] ov = out
    for i in range(sim.n):
        ov[i] = sim.elig[i]
    return out


def grprop_scores(pack, completion):
    # Kernel scores are defined on binary completion vectors; the public
    # real-valued op lives in sgexec.grprop.
    cdef Sim sim = Sim(pack)
    cdef int i
    comp = np.ascontiguousarray(completion, dtype=np.uint8)
    cdef unsigned char[::1] cv = comp
    for i in range(sim.n):
        sim.comp[i] = cv[i]
    sim._grprop_scores()
    out = np.zeros(sim.n, dtype=np.float64)
    cdef double[::1] ov = out
    for i in range(sim.n):
        ov[i] = sim.scores[i]
    return out


def nearest_instance(pack, state, int type_id):
    cdef Sim sim = Sim(pack)
    sim.load_state(
        np.ascontiguousarray(state.completion, dtype=np.uint8), state.agent,
        state.rem, np.ascontiguousarray(state.inst_alive, dtype=np.uint8),
        np.ascontiguousarray(state.inst_ctype, dtype=np.int16),
    )
    cdef int d
    cdef int k = sim._nearest(type_id, &d)
    if k >= 0:
        return int(k), int(d)
    return -1, -1


cdef void _store_state(Sim sim, state):
    cdef int i
    comp = state.completion
    alive = state.inst_alive
    ctype = state.inst_ctype
    for i in range(sim.n):
        comp[i] = sim.comp[i]
    for i in range(sim.n_inst):
        alive[i] = sim.alive[i]
        ctype[i] = sim.ctype[i]
    state.agent = sim.agent
    state.rem = sim.rem


def step_option(pack, state, int subtask):
    cdef Sim sim = Sim(pack)
    sim.load_state(
        np.ascontiguousarray(state.completion, dtype=np.uint8), state.agent,
        state.rem, np.ascontiguousarray(state.inst_alive, dtype=np.uint8),
        np.ascontiguousarray(state.inst_ctype, dtype=np.int16),
    )
    cdef int steps, completed
    cdef double reward = sim._step_option(subtask, &steps, &completed)
    _store_state(sim, state)
    return reward, steps, bool(completed)


def episode(pack, int budget, int policy_kind, policy_seed):
    cdef Sim sim = Sim(pack)
    sim.reset(budget)
    cdef uint64_t rng = <uint64_t>(policy_seed & 0xFFFFFFFFFFFFFFFF)
    cdef int a, steps, completed
    cdef double reward, total = 0.0
    cdef int steps_total = 0
    outcomes = []
    while sim.rem > 0:
        a = sim._choose(policy_kind, &rng)
        if a < 0:
            break
        reward = sim._step_option(a, &steps, &completed)
        outcomes.append((a, steps, reward, bool(completed)))
        total += reward
        steps_total += steps
    final = np.zeros(sim.n, dtype=np.uint8)
    cdef unsigned char[::1] fv = final
    for a in range(sim.n):
        fv[a] = sim.comp[a]
    return outcomes, final, total, steps_total


# -- exhaustive search ----------------------------------------------------------


cdef class _Optimal:
    cdef Sim sim
    cdef dict memo, bound_memo
    cdef int pair_k1[MAX_PAIRS]
    cdef int pair_k2[MAX_PAIRS]
    cdef int n_pairs
    cdef uint64_t mask
    cdef long nodes

    def __init__(self, Sim sim):
        self.sim = sim
        if sim.n > 26:
            raise ValueError("optimal search supports at most 26 subtasks")
        by_type = {}
        cdef int k
        for k in range(sim.n_inst):
            by_type.setdefault(int(sim.inst_type0[k]), []).append(k)
        self.n_pairs = 0
        for _t, ks in sorted(by_type.items()):
            if len(ks) == 2:
                if self.n_pairs >= MAX_PAIRS:
                    raise ValueError("too many shared-type instance pairs for exact search")
                self.pair_k1[self.n_pairs] = ks[0]
                self.pair_k2[self.n_pairs] = ks[1]
                self.n_pairs += 1
            elif len(ks) > 2:
                raise ValueError("optimal search requires at most 2 instances per type")
        self.memo = {}
        self.bound_memo = {}
        self.nodes = 0
        self.mask = 0

    cdef inline int _consumed(self, int k) noexcept:
        return (not self.sim.alive[k]) or self.sim.ctype[k] != self.sim.inst_type0[k]

    cdef uint64_t _key(self) noexcept:
        cdef uint64_t aux = 0
        cdef int p
        for p in range(self.n_pairs):
            if self._consumed(self.pair_k2[p]) and not self._consumed(self.pair_k1[p]):
                aux |= <uint64_t>1 << p
        return (
            self.mask
            | (<uint64_t>self.sim.agent << 26)
            | (<uint64_t>self.sim.rem << 36)
            | (aux << 50)
        )

    cdef double _bound(self):
        key = int(self.mask)
        hit = self.bound_memo.get(key)
        if hit is not None:
            return hit
        cdef Sim sim = self.sim
        cdef int i, t, e, changed, ok, child
        cdef double total = 0.0
        for i in range(sim.n):
            sim.ach[i] = 1 if (self.mask >> i) & 1 else 0
        changed = 1
        while changed:
            changed = 0
            for i in range(sim.n):
                if sim.ach[i]:
                    continue
                if sim.or_off[i] == sim.or_off[i + 1]:
                    sim.ach[i] = 1
                    changed = 1
                    continue
                for t in range(sim.or_off[i], sim.or_off[i + 1]):
                    ok = 1
                    for e in range(sim.and_off[t], sim.and_off[t + 1]):
                        child = sim.and_child[e]
                        if sim.and_neg[e]:
                            if (self.mask >> child) & 1:
                                ok = 0
                                break
                        elif not sim.ach[child]:
                            ok = 0
                            break
                    if ok:
                        sim.ach[i] = 1
                        changed = 1
                        break
        for i in range(sim.n):
            if sim.ach[i] and not ((self.mask >> i) & 1) and sim.reward[i] > 0:
                total += sim.reward[i]
        self.bound_memo[key] = total
        return total

    cdef int _candidates(self, int* cand_id, double* cand_r) noexcept:
        cdef Sim sim = self.sim
        cdef int i, k, d, count = 0, j, m
        cdef double r
        cdef int tmp_i
        cdef double tmp_r
        sim._eligibility()
        for i in range(sim.n):
            if not sim.elig[i]:
                continue
            k = sim._nearest(sim.opt_type[i], &d)
            if k < 0 or d + 1 > sim.rem:
                continue
            cand_id[count] = i
            cand_r[count] = sim.reward[i]
            count += 1
        # insertion sort: reward desc, id asc
        for j in range(1, count):
            tmp_i = cand_id[j]
            tmp_r = cand_r[j]
            m = j - 1
            while m >= 0 and (cand_r[m] < tmp_r):
                cand_id[m + 1] = cand_id[m]
                cand_r[m + 1] = cand_r[m]
                m -= 1
            cand_id[m + 1] = tmp_i
            cand_r[m + 1] = tmp_r
        return count

    cdef double _solve(self) except *:
        cdef Sim sim = self.sim
        if sim.rem <= 0:
            return 0.0
        key = int(self._key())
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        self.nodes += 1
        cdef int cand_id[MAX_N]
        cdef double cand_r[MAX_N]
        cdef int count = self._candidates(cand_id, cand_r)
        cdef double best = 0.0, bound, v, reward
        cdef int c, i, steps, completed
        cdef int old_agent, old_rem, old_k
        cdef unsigned char old_alive
        cdef short old_ctype
        cdef int d, k
        bound = self._bound()
        if bound > 0.0:
            for c in range(count):
                if bound <= best:
                    break
                i = cand_id[c]
                # apply
                old_agent = sim.agent
                old_rem = sim.rem
                k = sim._nearest(sim.opt_type[i], &d)
                old_k = k
                old_alive = sim.alive[k]
                old_ctype = sim.ctype[k]
                reward = sim._step_option(i, &steps, &completed)
                if completed:
                    self.mask |= <uint64_t>1 << i
                if reward + self._bound() > best:
                    v = reward + self._solve()
                    if v > best:
                        best = v
                # undo
                if completed:
                    self.mask &= ~(<uint64_t>1 << i)
                    sim.comp[i] = 0
                sim.alive[old_k] = old_alive
                sim.ctype[old_k] = old_ctype
                sim.agent = old_agent
                sim.rem = old_rem
        self.memo[key] = best
        return best


def optimal_search(pack, state):
    """Exact best achievable return from `state`; see reference.optimal_search."""
    if state.rem >= 1 << 14 or pack.height * pack.width > 1 << 10:
        raise ValueError("optimal search limits: budget < 16384, map <= 1024 cells")
    cdef Sim sim = Sim(pack)
    sim.load_state(
        np.ascontiguousarray(state.completion, dtype=np.uint8), state.agent,
        state.rem, np.ascontiguousarray(state.inst_alive, dtype=np.uint8),
        np.ascontiguousarray(state.inst_ctype, dtype=np.int16),
    )
    cdef _Optimal search = _Optimal(sim)
    cdef int i
    cdef uint64_t m = 0
    for i in range(sim.n):
        if sim.comp[i]:
            m |= <uint64_t>1 << i
    search.mask = m
    cdef double best = search._solve()

    # witness reconstruction: greedily follow memoized values
    seq = []
    cdef int cand_id[MAX_N]
    cdef double cand_r[MAX_N]
    cdef int count, c, steps, completed, found, k, d
    cdef int old_agent, old_rem
    cdef unsigned char old_alive
    cdef short old_ctype
    cdef double value, reward
    while True:
        value = search._solve()
        if value <= 0.0:
            break
        count = search._candidates(cand_id, cand_r)
        found = 0
        for c in range(count):
            i = cand_id[c]
            old_agent = sim.agent
            old_rem = sim.rem
            k = sim._nearest(sim.opt_type[i], &d)
            old_alive = sim.alive[k]
            old_ctype = sim.ctype[k]
            reward = sim._step_option(i, &steps, &completed)
            if completed:
                search.mask |= <uint64_t>1 << i
            if reward + search._solve() == value:
                seq.append(i)
                found = 1
                break
            # undo and try the next candidate
            if completed:
                search.mask &= ~(<uint64_t>1 << i)
                sim.comp[i] = 0
            sim.alive[k] = old_alive
            sim.ctype[k] = old_ctype
            sim.agent = old_agent
            sim.rem = old_rem
        if not found:
            break
    return best, seq, search.nodes


# -- Monte-Carlo tree search -----------------------------------------------------


def mcts_decide(pack, state, policy_seed, double c_ucb, int max_depth,
                iteration_budget, step_budget, bint guided_expansion,
                bint guided_rollout, bint collect_tree=False):
    """One tree search from `state`; see reference.mcts_decide."""
    cdef Sim sim = Sim(pack)
    root_comp = np.ascontiguousarray(state.completion, dtype=np.uint8)
    root_alive = np.ascontiguousarray(state.inst_alive, dtype=np.uint8)
    root_ctype = np.ascontiguousarray(state.inst_ctype, dtype=np.int16)
    cdef unsigned char[::1] rc = root_comp
    cdef unsigned char[::1] ra = root_alive
    cdef short[::1] rt = root_ctype
    cdef int root_agent = state.agent
    cdef int root_rem = state.rem

    cdef long iter_cap = min(int(iteration_budget), 1 << 60)
    cdef long step_cap = min(int(step_budget), 1 << 60)
    cdef long node_cap = min(iter_cap, step_cap) + 2
    if node_cap > 1200000:
        raise ValueError("mcts budget too large for tree preallocation")

    cdef int n = sim.n
    parent_a = np.full(node_cap, -1, dtype=np.int32)
    action_a = np.full(node_cap, -1, dtype=np.int32)
    depth_a = np.zeros(node_cap, dtype=np.int32)
    returns_a = np.zeros(node_cap, dtype=np.float64)
    visits_a = np.zeros(node_cap, dtype=np.int64)
    children_a = np.full((node_cap, n), -1, dtype=np.int32)
    cdef int[::1] parent = parent_a
    cdef int[::1] action = action_a
    cdef int[::1] depth = depth_a
    cdef double[::1] returns = returns_a
    cdef int64_t[::1] visits = visits_a
    cdef int[:, ::1] children = children_a

    cdef uint64_t rng = <uint64_t>(policy_seed & 0xFFFFFFFFFFFFFFFF)
    cdef long n_nodes = 1, iters = 0, sim_steps = 0
    cdef int node, i, a, best_a, count, steps, completed, child, n_unexp
    cdef double ep_return, reward, best_score, score, ln_n
    cdef int unexp[MAX_N]
    cdef int cands[MAX_N]

    sim.load_state(rc, root_agent, root_rem, ra, rt)
    sim._eligibility()
    count = 0
    for i in range(n):
        if sim.elig[i]:
            count += 1
    if count == 0:
        return -1, 0, 0, None

    while iters < iter_cap and sim_steps < step_cap:
        sim.load_state(rc, root_agent, root_rem, ra, rt)
        node = 0
        ep_return = 0.0
        while True:
            sim._eligibility()
            count = 0
            for i in range(n):
                if sim.elig[i]:
                    cands[count] = i
                    count += 1
            if count == 0 or sim.rem <= 0:
                break
            if depth[node] >= max_depth:
                # rollout only
                while sim.rem > 0:
                    a = sim._choose(2 if guided_rollout else 0, &rng)
                    if a < 0:
                        break
                    reward = sim._step_option(a, &steps, &completed)
                    ep_return += reward
                    sim_steps += steps
                break
            # unexpanded candidates?
            n_unexp = 0
            for i in range(count):
                if children[node, cands[i]] < 0:
                    unexp[n_unexp] = cands[i]
                    n_unexp += 1
            if n_unexp > 0:
                if guided_expansion:
                    sim._grprop_scores()
                    a = unexp[0]
                    for i in range(1, n_unexp):
                        if sim.scores[unexp[i]] > sim.scores[a]:
                            a = unexp[i]
                else:
                    a = unexp[_rng_bounded(&rng, n_unexp)]
                child = <int>n_nodes
                n_nodes += 1
                parent[child] = node
                action[child] = a
                depth[child] = depth[node] + 1
                children[node, a] = child
                reward = sim._step_option(a, &steps, &completed)
                ep_return += reward
                sim_steps += steps
                node = child
                while sim.rem > 0:
                    a = sim._choose(2 if guided_rollout else 0, &rng)
                    if a < 0:
                        break
                    reward = sim._step_option(a, &steps, &completed)
                    ep_return += reward
                    sim_steps += steps
                break
            ln_n = log(<double>(iters if iters > 1 else 1))
            best_a = -1
            best_score = -INFINITY
            for i in range(count):
                a = cands[i]
                child = children[node, a]
                if visits[child] > 0:
                    score = returns[child] / visits[child] + c_ucb * sqrt(ln_n / visits[child])
                else:
                    score = INFINITY
                if score > best_score:
                    best_score = score
                    best_a = a
            reward = sim._step_option(best_a, &steps, &completed)
            ep_return += reward
            sim_steps += steps
            node = children[node, best_a]
        while node >= 0:
            returns[node] += ep_return
            visits[node] += 1
            node = parent[node]
        iters += 1

    best_a = -1
    cdef int64_t best_visits = -1
    for a in range(n):
        child = children[0, a]
        if child >= 0 and visits[child] > best_visits:
            best_visits = visits[child]
            best_a = a
    tree = None
    if collect_tree:
        tree = {
            "parent": parent_a[:n_nodes].copy(),
            "action": action_a[:n_nodes].copy(),
            "depth": depth_a[:n_nodes].copy(),
            "returns": returns_a[:n_nodes].copy(),
            "visits": visits_a[:n_nodes].copy(),
        }
    return best_a, int(iters), int(sim_steps), tree
