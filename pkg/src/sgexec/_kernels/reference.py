"""Pure-Python kernels: frozen-environment simulation, exhaustive search,
and Monte-Carlo tree search.

This module is the fallback twin of the compiled extension: identical
algorithms, identical splitmix64 random streams, identical float operation
order, so both backends produce the same episodes, plans, and trees.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np

from ..rng import SplitMix64
from .pack import INTER_PICKUP, INTER_TRANSFORM, FrozenState, SimPack, initial_state

BACKEND_NAME = "python"

POLICY_RANDOM = 0
POLICY_GREEDY = 1
POLICY_GRPROP = 2


def eligibility(pack: SimPack, completion) -> np.ndarray:
    n = pack.n
    out = np.zeros(n, dtype=np.uint8)
    for i in range(n):
        t0, t1 = pack.or_off[i], pack.or_off[i + 1]
        if t0 == t1:
            pre = 1
        else:
            pre = 0
            for t in range(t0, t1):
                ok = 1
                for e in range(pack.and_off[t], pack.and_off[t + 1]):
                    x = completion[pack.and_child[e]]
                    lit = (1 - x) if pack.and_neg[e] else x
                    if not lit:
                        ok = 0
                        break
                if ok:
                    pre = 1
                    break
        out[i] = pre and not completion[i]
    return out


def grprop_scores(pack: SimPack, completion) -> np.ndarray:
    """Sequential-loop twin of the public scores op on a binary completion
    vector: rewards propagate down the graph, each parent splitting its
    value among its children in proportion to the smoothed sensitivities."""
    n = pack.n
    n_terms = len(pack.term_size)
    dand = [0.0] * n_terms
    for t in range(n_terms):
        s = 0.0
        for e in range(pack.and_off[t], pack.and_off[t + 1]):
            x = float(completion[pack.and_child[e]])
            s += (1.0 - x) if pack.and_neg[e] else x
        z = (s - pack.term_size[t] + 0.5) / pack.beta_and
        sig = 1.0 / (1.0 + math.exp(-z))
        dand[t] = (pack.alpha_and / pack.beta_and) * sig * (1.0 - sig)
    # Per (parent, child) influence cells; the OR derivative cancels out of
    # the share ratio so only the AND derivatives matter.
    cells: list[dict[int, float]] = [{} for _ in range(n)]
    for i in range(n):
        for t in range(pack.or_off[i], pack.or_off[i + 1]):
            for e in range(pack.and_off[t], pack.and_off[t + 1]):
                sign = -1.0 if pack.and_neg[e] else 1.0
                k = int(pack.and_child[e])
                cells[i][k] = cells[i].get(k, 0.0) + dand[t] * sign
    denom = [sum(abs(c) for c in cells[i].values()) for i in range(n)]
    acc = [float(pack.reward[i]) for i in range(n)]
    v = list(acc)
    for _hop in range(n):
        w = [0.0] * n
        live = False
        for i in range(n):
            if v[i] == 0.0 or denom[i] == 0.0:
                continue
            coeff = v[i] / denom[i]
            for k, cell in cells[i].items():
                w[k] += coeff * cell
        for k in range(n):
            if w[k] != 0.0:
                acc[k] += w[k]
                live = True
        if not live:
            break
        v = w
    return np.asarray([0.5 * a for a in acc], dtype=np.float64)


def _distances(pack: SimPack, start: int) -> np.ndarray:
    size = pack.height * pack.width
    dist = np.full(size, -1, dtype=np.int32)
    dist[start] = 0
    q = deque([start])
    W = pack.width
    while q:
        cell = q.popleft()
        d = dist[cell] + 1
        r, c = divmod(cell, W)
        if r > 0 and pack.passable[cell - W] and dist[cell - W] < 0:
            dist[cell - W] = d
            q.append(cell - W)
        if r + 1 < pack.height and pack.passable[cell + W] and dist[cell + W] < 0:
            dist[cell + W] = d
            q.append(cell + W)
        if c > 0 and pack.passable[cell - 1] and dist[cell - 1] < 0:
            dist[cell - 1] = d
            q.append(cell - 1)
        if c + 1 < W and pack.passable[cell + 1] and dist[cell + 1] < 0:
            dist[cell + 1] = d
            q.append(cell + 1)
    return dist


def nearest_instance(pack: SimPack, state: FrozenState, type_id: int) -> tuple[int, int]:
    """(instance index, distance); (-1, -1) when no live instance matches.
    Ties break by distance, then cell in row-major order, then index."""
    W = pack.width
    dist = None if pack.all_passable else _distances(pack, state.agent)
    ar, ac = divmod(state.agent, W)
    best_k, best_d, best_cell = -1, -1, -1
    for k in range(len(pack.inst_pos)):
        if not state.inst_alive[k] or state.inst_ctype[k] != type_id:
            continue
        cell = int(pack.inst_pos[k])
        if dist is None:
            r, c = divmod(cell, W)
            d = abs(r - ar) + abs(c - ac)
        else:
            d = int(dist[cell])
            if d < 0:
                continue
        if best_k < 0 or d < best_d or (d == best_d and cell < best_cell):
            best_k, best_d, best_cell = k, d, cell
    return best_k, best_d


def step_option(pack: SimPack, state: FrozenState, subtask: int):
    """Execute one option on the frozen state.

    Returns (reward, steps_used, completed). Missing target costs one step;
    budget exhaustion mid-walk aborts with reward 0.
    """
    elig = eligibility(pack, state.completion)
    k, d = nearest_instance(pack, state, int(pack.opt_type[subtask]))
    if k < 0:
        state.rem -= 1
        return 0.0, 1, False
    cost = d + 1
    if cost > state.rem:
        steps = state.rem
        state.rem = 0
        return 0.0, steps, False
    state.rem -= cost
    state.agent = int(pack.inst_pos[k])
    inter = pack.opt_inter[subtask]
    if inter == INTER_PICKUP:
        state.inst_alive[k] = 0
    elif inter == INTER_TRANSFORM:
        state.inst_ctype[k] = pack.ice_type
    if elig[subtask]:
        state.completion[subtask] = 1
        return float(pack.reward[subtask]), cost, True
    return 0.0, cost, False


def _choose(pack: SimPack, state: FrozenState, kind: int, rng: SplitMix64) -> int:
    elig = eligibility(pack, state.completion)
    ids = [i for i in range(pack.n) if elig[i]]
    if not ids:
        return -1
    if kind == POLICY_RANDOM:
        return ids[rng.bounded(len(ids))]
    if kind == POLICY_GREEDY:
        best = ids[0]
        for i in ids[1:]:
            if pack.reward[i] > pack.reward[best]:
                best = i
        return best
    scores = grprop_scores(pack, state.completion)
    best = ids[0]
    for i in ids[1:]:
        if scores[i] > scores[best]:
            best = i
    return best


def episode(pack: SimPack, budget: int, policy_kind: int, policy_seed: int):
    """Full frozen episode under a built-in policy.

    Returns (outcomes, final_completion, total_return, steps_used) where
    outcomes is a list of (subtask, steps, reward, completed).
    """
    state = initial_state(pack, budget)
    rng = SplitMix64(policy_seed)
    outcomes = []
    total = 0.0
    steps_total = 0
    while state.rem > 0:
        a = _choose(pack, state, policy_kind, rng)
        if a < 0:
            break
        reward, steps, completed = step_option(pack, state, a)
        outcomes.append((a, steps, reward, completed))
        total += reward
        steps_total += steps
    return outcomes, state.completion.copy(), total, steps_total


# -- exhaustive search --------------------------------------------------------


def _achievable_bound(pack: SimPack, mask: int) -> float:
    """Admissible optimistic value: positive rewards of not-yet-completed
    subtasks whose preconditions are satisfiable ignoring interference
    (negated literals already broken by completed subtasks stay broken)."""
    n = pack.n
    ach = [False] * n
    for i in range(n):
        if mask >> i & 1:
            ach[i] = True
    changed = True
    while changed:
        changed = False
        for i in range(n):
            if ach[i]:
                continue
            t0, t1 = pack.or_off[i], pack.or_off[i + 1]
            if t0 == t1:
                ach[i] = True
                changed = True
                continue
            for t in range(t0, t1):
                ok = True
                for e in range(pack.and_off[t], pack.and_off[t + 1]):
                    child = pack.and_child[e]
                    if pack.and_neg[e]:
                        if mask >> child & 1:
                            ok = False
                            break
                    elif not ach[child]:
                        ok = False
                        break
                if ok:
                    ach[i] = True
                    changed = True
                    break
    total = 0.0
    for i in range(n):
        if ach[i] and not (mask >> i & 1) and pack.reward[i] > 0:
            total += pack.reward[i]
    return total


class _OptimalSearch:
    def __init__(self, pack: SimPack):
        self.pack = pack
        if pack.n > 26:
            raise ValueError("optimal search supports at most 26 subtasks")
        # A type shared by two instances needs one aux bit recording which
        # instance was consumed first, keeping the memo key an exact state.
        by_type: dict[int, list[int]] = {}
        for k, t in enumerate(pack.inst_type):
            by_type.setdefault(int(t), []).append(k)
        self.pairs: list[tuple[int, int]] = []
        for _t, ks in sorted(by_type.items()):
            if len(ks) == 2:
                self.pairs.append((ks[0], ks[1]))
            elif len(ks) > 2:
                raise ValueError("optimal search requires at most 2 instances per type")
        if len(self.pairs) > 13:
            raise ValueError("too many shared-type instance pairs for exact search")
        self.memo: dict[int, float] = {}
        self.bound_memo: dict[int, float] = {}
        self.nodes = 0

    def _mask_of(self, state: FrozenState) -> int:
        m = 0
        for i in range(self.pack.n):
            if state.completion[i]:
                m |= 1 << i
        return m

    def _consumed(self, state: FrozenState, k: int) -> bool:
        return not state.inst_alive[k] or state.inst_ctype[k] != self.pack.inst_type[k]

    def _aux_of(self, state: FrozenState) -> int:
        # Bit set iff exactly the higher-indexed pair member is consumed;
        # canonical 0 when neither or both are gone.
        aux = 0
        for p, (k1, k2) in enumerate(self.pairs):
            c1 = self._consumed(state, k1)
            c2 = self._consumed(state, k2)
            if c2 and not c1:
                aux |= 1 << p
        return aux

    def _bound(self, mask: int) -> float:
        b = self.bound_memo.get(mask)
        if b is None:
            b = _achievable_bound(self.pack, mask)
            self.bound_memo[mask] = b
        return b

    def _key(self, state: FrozenState, mask: int) -> int:
        return (
            mask
            | (state.agent << 26)
            | (state.rem << 36)
            | (self._aux_of(state) << 50)
        )

    def _candidates(self, state: FrozenState):
        elig = eligibility(self.pack, state.completion)
        out = []
        for i in range(self.pack.n):
            if not elig[i]:
                continue
            k, d = nearest_instance(self.pack, state, int(self.pack.opt_type[i]))
            if k < 0 or d + 1 > state.rem:
                continue
            out.append((float(self.pack.reward[i]), i))
        out.sort(key=lambda t: (-t[0], t[1]))
        return out

    def solve(self, state: FrozenState) -> float:
        if state.rem <= 0:
            return 0.0
        mask = self._mask_of(state)
        key = self._key(state, mask)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        self.nodes += 1
        best = 0.0
        bound = self._bound(mask)
        if bound > 0.0:
            for r, i in self._candidates(state):
                if bound <= best:
                    break
                child = state.clone()
                reward, _steps, _done = step_option(self.pack, child, i)
                child_mask = self._mask_of(child)
                if reward + self._bound(child_mask) <= best:
                    continue
                v = reward + self.solve(child)
                if v > best:
                    best = v
        self.memo[key] = best
        return best

    def reconstruct(self, state: FrozenState) -> list[int]:
        seq = []
        cur = state.clone()
        while True:
            value = self.solve(cur)
            if value <= 0.0:
                break
            for _r, i in self._candidates(cur):
                child = cur.clone()
                reward, _steps, _done = step_option(self.pack, child, i)
                if reward + self.solve(child) == value:
                    seq.append(i)
                    cur = child
                    break
            else:
                break
        return seq


def optimal_search(pack: SimPack, state: FrozenState):
    """Exact best achievable return from `state` on the frozen environment.

    Depth-first search over eligible options with branch-and-bound pruning
    and memoization on (completion mask, agent cell, remaining budget,
    shared-instance bits). Returns (best_return, witness actions, nodes).
    """
    if state.rem >= 1 << 14 or pack.height * pack.width > 1 << 10:
        raise ValueError("optimal search limits: budget < 16384, map <= 1024 cells")
    search = _OptimalSearch(pack)
    best = search.solve(state.clone())
    seq = search.reconstruct(state)
    return best, seq, search.nodes


# -- Monte-Carlo tree search ---------------------------------------------------


def mcts_decide(
    pack: SimPack,
    state: FrozenState,
    seed: int,
    c_ucb: float,
    max_depth: int,
    iteration_budget: int,
    step_budget: int,
    guided_expansion: bool,
    guided_rollout: bool,
    collect_tree: bool = False,
):
    """One tree search from `state`; returns
    (action, iterations, simulated_steps, tree-or-None).

    Stages per iteration: UCB selection down expanded nodes, single-child
    expansion (uniform random or guide-argmax over unexpanded eligible
    subtasks), rollout to episode end below the depth cap, and
    backpropagation of the episode return along the visited path.
    """
    n = pack.n
    rng = SplitMix64(seed)
    cap = 256
    parent = np.full(cap, -1, dtype=np.int32)
    action = np.full(cap, -1, dtype=np.int32)
    depth = np.zeros(cap, dtype=np.int32)
    returns = np.zeros(cap, dtype=np.float64)
    visits = np.zeros(cap, dtype=np.int64)
    children = np.full((cap, n), -1, dtype=np.int32)
    n_nodes = 1
    iters = 0
    sim_steps = 0

    def grow():
        nonlocal cap, parent, action, depth, returns, visits, children
        cap *= 2
        parent = np.concatenate([parent, np.full(cap // 2, -1, dtype=np.int32)])
        action = np.concatenate([action, np.full(cap // 2, -1, dtype=np.int32)])
        depth = np.concatenate([depth, np.zeros(cap // 2, dtype=np.int32)])
        returns = np.concatenate([returns, np.zeros(cap // 2, dtype=np.float64)])
        visits = np.concatenate([visits, np.zeros(cap // 2, dtype=np.int64)])
        children = np.concatenate(
            [children, np.full((cap // 2, n), -1, dtype=np.int32)]
        )

    while iters < iteration_budget and sim_steps < step_budget:
        sim = state.clone()
        node = 0
        ep_return = 0.0
        while True:
            elig = eligibility(pack, sim.completion)
            cands = [i for i in range(n) if elig[i]]
            if not cands or sim.rem <= 0:
                break
            if depth[node] >= max_depth:
                ep_return, sim_steps = _rollout(
                    pack, sim, rng, guided_rollout, ep_return, sim_steps
                )
                break
            unexpanded = [a for a in cands if children[node, a] < 0]
            if unexpanded:
                if guided_expansion:
                    scores = grprop_scores(pack, sim.completion)
                    a = unexpanded[0]
                    for b in unexpanded[1:]:
                        if scores[b] > scores[a]:
                            a = b
                else:
                    a = unexpanded[rng.bounded(len(unexpanded))]
                if n_nodes >= cap:
                    grow()
                child = n_nodes
                n_nodes += 1
                parent[child] = node
                action[child] = a
                depth[child] = depth[node] + 1
                children[node, a] = child
                reward, steps, _ = step_option(pack, sim, a)
                ep_return += reward
                sim_steps += steps
                node = child
                ep_return, sim_steps = _rollout(
                    pack, sim, rng, guided_rollout, ep_return, sim_steps
                )
                break
            ln_n = math.log(max(1, iters))
            best_a = -1
            best_score = -math.inf
            for a in cands:
                ch = children[node, a]
                score = (
                    returns[ch] / visits[ch] + c_ucb * math.sqrt(ln_n / visits[ch])
                    if visits[ch] > 0
                    else math.inf
                )
                if score > best_score:
                    best_score = score
                    best_a = a
            reward, steps, _ = step_option(pack, sim, best_a)
            ep_return += reward
            sim_steps += steps
            node = children[node, best_a]
        while node >= 0:
            returns[node] += ep_return
            visits[node] += 1
            node = parent[node]
        iters += 1

    best_a = -1
    best_visits = -1
    for a in range(n):
        ch = children[0, a]
        if ch >= 0 and visits[ch] > best_visits:
            best_visits = int(visits[ch])
            best_a = a
    tree = None
    if collect_tree:
        tree = {
            "parent": parent[:n_nodes].copy(),
            "action": action[:n_nodes].copy(),
            "depth": depth[:n_nodes].copy(),
            "returns": returns[:n_nodes].copy(),
            "visits": visits[:n_nodes].copy(),
        }
    return best_a, iters, sim_steps, tree


def _rollout(pack, sim, rng, guided, ep_return, sim_steps):
    while sim.rem > 0:
        a = _choose(pack, sim, POLICY_GRPROP if guided else POLICY_RANDOM, rng)
        if a < 0:
            break
        reward, steps, _ = step_option(pack, sim, a)
        ep_return += reward
        sim_steps += steps
    return ep_return, sim_steps
