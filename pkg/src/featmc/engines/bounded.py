"""Feature-aware bounded search: all products checked in one exploration.

Satisfaction of state formulae is tracked per (state, product) as 0/1
indicator vectors over the canonical product order.  Path probabilities are
approximated from below by iterating the one-step recurrence

    x'(s) = sat2(s) + (1 - sat2(s)) * sat1(s) * sum_t P(s,t) * x(t)

in breadth-first phases over a frontier of states that can still improve.
A companion *undecided* vector tracks the mass of paths that neither
satisfied nor falsified the until yet and can still reach a target, so the
exact value always lies in ``[x, x + undecided]``; the search stops when the
undecided mass falls below the requested precision.

Mass absorbed where the target has become unreachable is decided (the until
fails there), so it leaves the undecided account immediately.  Without that
refinement the account would never drain on models with absorbing
non-target states.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Mapping

from ..errors import ConvergenceError, UnsupportedPropertyError
from ..models import FDTMC, State
from ..profiles import DenseProfile, to_dense
from ..properties import (
    Atom,
    Interval,
    Next,
    PAnd,
    PNot,
    Prob,
    Property,
    PTrue,
    RewardQuery,
    StateFormula,
    Until,
    print_property,
)
from ..rational import INFINITY, ONE, ZERO, rational
from ..result import SAT, UNKNOWN, VIOLATED, FamilyResult, ProductOutcome

ENGINE_NAME = "bounded"

DEFAULT_MAX_DEPTH = 100_000

# ---------------------------------------------------------------------------
# Dense model form
# ---------------------------------------------------------------------------


class DenseModel:
    """FDTMC with every profile flattened to a per-product vector."""

    def __init__(self, model: FDTMC):
        self.model = model
        self.states = model.states
        self.products = model.diagram.valid_products()
        self.n = len(self.products)
        self.edges: dict[State, list[tuple[State, tuple]]] = {s: [] for s in self.states}
        self.pred: dict[State, set[State]] = {s: set() for s in self.states}
        for (s, t), profile in model.transitions.items():
            vec = to_dense(profile).values
            if all(v == 0 for v in vec):
                continue
            self.edges[s].append((t, vec))
            self.pred[t].add(s)
        self.init = model.init
        self.labels = model.labels

    def zeros(self):
        return [ZERO] * self.n

    def ones(self):
        return [ONE] * self.n

    def label_vector(self, proposition: str) -> dict[State, list]:
        return {
            s: (self.ones() if proposition in self.labels[s] else self.zeros())
            for s in self.states
        }

    def reward_vectors(self) -> dict[State, tuple]:
        return {
            s: to_dense(self.model.reward_profile(s)).values for s in self.states
        }


def _vec_max(vec):
    out = vec[0]
    for v in vec[1:]:
        if v > out:
            out = v
    return out


# ---------------------------------------------------------------------------
# Boolean reachability over products
# ---------------------------------------------------------------------------


def can_reach_vectors(dense: DenseModel, sat1, sat2) -> dict[State, list[bool]]:
    """Per (state, product): can a target be reached along constraint states.

    Backward fixpoint over Booleans; a target state counts as reaching.
    """
    can = {s: [bool(sat2[s][i]) for i in range(dense.n)] for s in dense.states}
    conform = {
        s: [bool(sat1[s][i]) and not sat2[s][i] for i in range(dense.n)]
        for s in dense.states
    }
    changed = True
    while changed:
        changed = False
        for s in dense.states:
            row = can[s]
            conf = conform[s]
            for t, vec in dense.edges[s]:
                target_row = can[t]
                for i in range(dense.n):
                    if conf[i] and not row[i] and vec[i] > 0 and target_row[i]:
                        row[i] = True
                        changed = True
    return can


def forward_reachable_vectors(dense: DenseModel) -> dict[State, list[bool]]:
    """Per (state, product): reachable with positive probability from init."""
    reach = {
        s: [(s in dense.init and dense.init[s] > 0)] * dense.n for s in dense.states
    }
    reach = {s: list(row) for s, row in reach.items()}
    changed = True
    while changed:
        changed = False
        for s in dense.states:
            row = reach[s]
            for t, vec in dense.edges[s]:
                target_row = reach[t]
                for i in range(dense.n):
                    if row[i] and vec[i] > 0 and not target_row[i]:
                        target_row[i] = True
                        changed = True
    return reach


# ---------------------------------------------------------------------------
# Path operators
# ---------------------------------------------------------------------------


def _next_vectors(dense: DenseModel, sat) -> dict[State, list]:
    out = {}
    for s in dense.states:
        acc = dense.zeros()
        for t, vec in dense.edges[s]:
            ind = sat[t]
            for i in range(dense.n):
                if ind[i] != 0:
                    acc[i] += vec[i] * ind[i]
        out[s] = acc
    return out


def _until_step(dense: DenseModel, sat1, sat2, x, states):
    """One application of the recurrence, restricted to ``states``."""
    out = {}
    for s in states:
        sat2_row = sat2[s]
        sat1_row = sat1[s]
        acc = dense.zeros()
        for t, vec in dense.edges[s]:
            xt = x[t]
            for i in range(dense.n):
                if vec[i] != 0 and xt[i] != 0:
                    acc[i] += vec[i] * xt[i]
        row = []
        for i in range(dense.n):
            if sat2_row[i] != 0:
                row.append(ONE)
            elif sat1_row[i] != 0:
                row.append(acc[i])
            else:
                row.append(ZERO)
        out[s] = row
    return out


def bounded_until_vectors(
    dense: DenseModel, sat1, sat2, bound: int, use_frontier: bool = True
) -> dict[State, list]:
    """Exactly ``bound`` breadth-first phases of the recurrence."""
    x = {s: [ONE if sat2[s][i] != 0 else ZERO for i in range(dense.n)] for s in dense.states}
    if use_frontier:
        changed = {s for s in dense.states if any(v != 0 for v in x[s])}
    for _ in range(bound):
        if use_frontier:
            frontier = set()
            for t in changed:
                frontier |= dense.pred[t]
            if not frontier:
                break
        else:
            frontier = set(dense.states)
        updates = _until_step(dense, sat1, sat2, x, frontier)
        if use_frontier:
            changed = set()
        for s, row in updates.items():
            old = x[s]
            new_row = [row[i] if row[i] > old[i] else old[i] for i in range(dense.n)]
            if use_frontier and any(n != o for n, o in zip(new_row, old)):
                changed.add(s)
            x[s] = new_row
    return x


def until_lower_approx(
    dense: DenseModel,
    sat1,
    sat2,
    epsilon=None,
    bound: int | None = None,
    max_depth: int = DEFAULT_MAX_DEPTH,
    use_frontier: bool = True,
    observer=None,
):
    """Iterate the until recurrence until the undecided mass is small.

    Returns ``(x, undecided, k_used)``.  ``x`` is a per-state lower bound
    vector, nondecreasing in the iteration count and at least the k-bounded
    value; ``undecided`` bounds the distance to the exact value from above.
    Exactly one of ``epsilon`` (residual mode) and ``bound`` (fixed depth)
    must be given.
    """
    if (epsilon is None) == (bound is None):
        raise ValueError("give either epsilon or bound")
    can = can_reach_vectors(dense, sat1, sat2)
    x = {s: [ONE if sat2[s][i] != 0 else ZERO for i in range(dense.n)] for s in dense.states}
    u = {
        s: [
            ONE if (sat1[s][i] != 0 and sat2[s][i] == 0 and can[s][i]) else ZERO
            for i in range(dense.n)
        ]
        for s in dense.states
    }
    conform = {
        s: [1 if (sat1[s][i] != 0 and sat2[s][i] == 0) else 0 for i in range(dense.n)]
        for s in dense.states
    }
    changed = {s for s in dense.states if any(v != 0 for v in x[s])}
    active = {s for s in dense.states if any(v != 0 for v in u[s])}
    k = 0
    limit = bound if bound is not None else max_depth
    while True:
        if epsilon is not None:
            worst = ZERO
            for s in active:
                m = _vec_max(u[s])
                if m > worst:
                    worst = m
            if worst < epsilon:
                break
            if k >= limit:
                raise ConvergenceError(
                    f"no convergence after {k} phases; worst undecided mass is "
                    f"{worst} (a constrained cycle retains mass for some product)",
                    worst_undecided=worst,
                )
        elif k >= limit:
            break
        k += 1
        # x update on the frontier
        if use_frontier:
            frontier = set()
            for t in changed:
                frontier |= dense.pred[t]
        else:
            frontier = set(dense.states)
        updates = _until_step(dense, sat1, sat2, x, frontier)
        changed = set()
        for s, row in updates.items():
            old = x[s]
            new_row = [row[i] if row[i] > old[i] else old[i] for i in range(dense.n)]
            if any(n != o for n, o in zip(new_row, old)):
                changed.add(s)
            x[s] = new_row
        # undecided update on its support
        new_u = {}
        candidates = set(dense.states) if not use_frontier else {
            s for s in dense.states if any(conform[s]) and
            (s in active or any(t in active for t, _ in dense.edges[s]))
        }
        for s in candidates:
            conf = conform[s]
            acc = dense.zeros()
            for t, vec in dense.edges[s]:
                if t not in active:
                    continue
                ut = u[t]
                for i in range(dense.n):
                    if vec[i] != 0 and ut[i] != 0:
                        acc[i] += vec[i] * ut[i]
            new_u[s] = [acc[i] if conf[i] else ZERO for i in range(dense.n)]
        u = {s: new_u.get(s, dense.zeros()) for s in dense.states}
        active = {s for s in dense.states if any(v != 0 for v in u[s])}
        if observer is not None:
            observer(k, x, u)
    return x, u, k


def _family_until_run(
    dense: DenseModel,
    sat1,
    sat2,
    epsilon,
    max_depth: int,
):
    """Specialized family-query iteration: two-sided and in place.

    Tracks the lower bound x and the upper bound hi of the until value per
    (state, product); both sides are iterates of the same one-step operator
    started below respectively above the fixpoint, so the exact value stays
    inside [x, hi] under any update order.  States are swept with successors
    first so mass propagates across whole chains per sweep, and products
    whose initial-state interval reached the requested width stop being
    updated.

    Returns (lo, hi) aggregated at the initial distribution, per product.
    """
    n = dense.n
    states = list(dense.states)
    index = {s: i for i, s in enumerate(states)}
    can = can_reach_vectors(dense, sat1, sat2)
    x = {}
    hi = {}
    conform = {}
    for s in states:
        conform[s] = [
            sat1[s][i] != 0 and sat2[s][i] == 0 for i in range(n)
        ]
        x[s] = [ONE if sat2[s][i] != 0 else ZERO for i in range(n)]
        hi[s] = [
            ONE if (sat2[s][i] != 0 or (conform[s][i] and can[s][i])) else ZERO
            for i in range(n)
        ]
    # sweep order: successors before predecessors (DFS post-order over the
    # edge graph, cycles broken at back edges) so one sweep pushes values
    # across whole chains instead of one step
    post_order = []
    visited = set()
    for root in states:
        if root in visited:
            continue
        stack = [(root, iter([t for t, _ in dense.edges[root]]))]
        visited.add(root)
        while stack:
            node, children = stack[-1]
            advanced = False
            for child in children:
                if child not in visited:
                    visited.add(child)
                    stack.append(
                        (child, iter([t for t, _ in dense.edges[child]]))
                    )
                    advanced = True
                    break
            if not advanced:
                post_order.append(node)
                stack.pop()
    rank = {s: i for i, s in enumerate(post_order)}
    order = sorted(
        (s for s in states if any(conform[s])),
        key=lambda s: (rank[s], index[s]),
    )
    edges = {
        s: [(t, vec) for t, vec in dense.edges[s]] for s in order
    }
    init_items = list(dense.init.items())

    def init_bounds(i):
        lo_total = ZERO
        hi_total = ZERO
        for s, weight in init_items:
            lo_total += weight * x[s][i]
            hi_total += weight * hi[s][i]
        return lo_total, hi_total

    active = list(range(n))
    for sweep in range(max_depth):
        for s in order:
            conf = conform[s]
            x_row = x[s]
            hi_row = hi[s]
            acc_x = [ZERO] * n
            acc_hi = [ZERO] * n
            for t, vec in edges[s]:
                xt = x[t]
                ht = hi[t]
                for i in active:
                    v = vec[i]
                    if v != 0:
                        if xt[i] != 0:
                            acc_x[i] += v * xt[i]
                        if ht[i] != 0:
                            acc_hi[i] += v * ht[i]
            for i in active:
                if not conf[i]:
                    continue
                if acc_x[i] > x_row[i]:
                    x_row[i] = acc_x[i]
                if acc_hi[i] < hi_row[i]:
                    hi_row[i] = acc_hi[i]
        still = []
        for i in active:
            lo_total, hi_total = init_bounds(i)
            if hi_total - lo_total < epsilon:
                continue
            still.append(i)
        active = still
        if not active:
            break
    else:
        worst = max(init_bounds(i)[1] - init_bounds(i)[0] for i in active)
        raise ConvergenceError(
            f"no convergence after {max_depth} sweeps; worst undecided mass is "
            f"{worst}",
            worst_undecided=worst,
        )
    lo_out = []
    hi_out = []
    for i in range(n):
        lo_total, hi_total = init_bounds(i)
        lo_out.append(lo_total)
        hi_out.append(hi_total)
    return lo_out, hi_out


def threshold_vectors(x, u, interval: Interval, states, n):
    """Three-valued thresholding of ``[x, x+u]`` against the bound."""
    sat = {}
    unknown = {}
    for s in states:
        sat_row = []
        unk_row = []
        for i in range(n):
            lo = x[s][i]
            hi = lo + u[s][i]
            if interval.contains_range(lo, hi):
                sat_row.append(ONE)
                unk_row.append(ZERO)
            elif interval.disjoint_from_range(lo, hi):
                sat_row.append(ZERO)
                unk_row.append(ZERO)
            else:
                sat_row.append(ZERO)
                unk_row.append(ONE)
        sat[s] = sat_row
        unknown[s] = unk_row
    return sat, unknown


# ---------------------------------------------------------------------------
# Satisfaction maps (three-valued per product)
# ---------------------------------------------------------------------------


@dataclass
class SatEntry:
    """Lower and upper indicator vectors: lo=definitely, hi=possibly."""

    lo: dict
    hi: dict

    def decided(self) -> bool:
        return all(self.lo[s] == self.hi[s] for s in self.lo)


def _path_interval(dense: DenseModel, path, sat_of, epsilon, max_depth, depth_cap=None):
    """Per-state value intervals [lo, hi] for a path formula."""
    if isinstance(path, Next):
        entry = sat_of(path.operand)
        lo = _next_vectors(dense, entry.lo)
        hi = _next_vectors(dense, entry.hi)
        return lo, hi, 0
    if isinstance(path, Until):
        e1 = sat_of(path.left)
        e2 = sat_of(path.right)
        if path.bound is not None:
            lo = bounded_until_vectors(dense, e1.lo, e2.lo, path.bound)
            if e1.decided() and e2.decided():
                hi = lo
            else:
                hi = bounded_until_vectors(dense, e1.hi, e2.hi, path.bound)
            return lo, hi, path.bound
    if isinstance(path, Until):
        e1 = sat_of(path.left)
        e2 = sat_of(path.right)
        kwargs = (
            {"bound": depth_cap} if depth_cap is not None else {"epsilon": epsilon}
        )
        x_lo, u_lo, k1 = until_lower_approx(
            dense, e1.lo, e2.lo, max_depth=max_depth, **kwargs
        )
        if e1.decided() and e2.decided():
            hi = {
                s: [x_lo[s][i] + u_lo[s][i] for i in range(dense.n)]
                for s in dense.states
            }
            return x_lo, hi, k1
        x_hi, u_hi, _ = until_lower_approx(
            dense, e1.hi, e2.hi, max_depth=max_depth, **kwargs
        )
        hi = {
            s: [x_hi[s][i] + u_hi[s][i] for i in range(dense.n)] for s in dense.states
        }
        return x_lo, hi, k1
    raise UnsupportedPropertyError(f"unknown path formula {path!r}")


def sat_states(
    dense: DenseModel,
    formula: StateFormula,
    epsilon=None,
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> dict[StateFormula, SatEntry]:
    """Bottom-up satisfaction map over the parse tree.

    Nested probability operators are thresholded three-valuedly; whatever
    stays unresolved at precision ``epsilon`` is retried once at
    ``epsilon/10`` by the caller (see check_family_bounded).
    """
    epsilon = rational("1/1000") if epsilon is None else epsilon
    entries: dict[StateFormula, SatEntry] = {}

    def sat_of(node: StateFormula) -> SatEntry:
        if node in entries:
            return entries[node]
        if isinstance(node, PTrue):
            vec = {s: dense.ones() for s in dense.states}
            entry = SatEntry(vec, dict(vec))
        elif isinstance(node, Atom):
            vec = dense.label_vector(node.name)
            entry = SatEntry(vec, dict(vec))
        elif isinstance(node, PNot):
            inner = sat_of(node.operand)
            entry = SatEntry(
                {s: [ONE - v for v in inner.hi[s]] for s in dense.states},
                {s: [ONE - v for v in inner.lo[s]] for s in dense.states},
            )
        elif isinstance(node, PAnd):
            left = sat_of(node.left)
            right = sat_of(node.right)
            entry = SatEntry(
                {
                    s: [a * b for a, b in zip(left.lo[s], right.lo[s])]
                    for s in dense.states
                },
                {
                    s: [a * b for a, b in zip(left.hi[s], right.hi[s])]
                    for s in dense.states
                },
            )
        elif isinstance(node, Prob):
            if node.interval is None:
                raise UnsupportedPropertyError(
                    "quantitative operator is only allowed at the top level"
                )
            lo, hi, _ = _path_interval(dense, node.path, sat_of, epsilon, max_depth)
            sat_lo = {}
            sat_hi = {}
            for s in dense.states:
                lo_row = []
                hi_row = []
                for i in range(dense.n):
                    if node.interval.contains_range(lo[s][i], hi[s][i]):
                        lo_row.append(ONE)
                        hi_row.append(ONE)
                    elif node.interval.disjoint_from_range(lo[s][i], hi[s][i]):
                        lo_row.append(ZERO)
                        hi_row.append(ZERO)
                    else:
                        lo_row.append(ZERO)
                        hi_row.append(ONE)
                sat_lo[s] = lo_row
                sat_hi[s] = hi_row
            entry = SatEntry(sat_lo, sat_hi)
        else:
            raise UnsupportedPropertyError(f"unknown state formula {node!r}")
        entries[node] = entry
        return entry

    sat_of(formula)
    return entries


# ---------------------------------------------------------------------------
# Profile-facing wrappers
# ---------------------------------------------------------------------------


def _as_dense_model(model) -> DenseModel:
    return model if isinstance(model, DenseModel) else DenseModel(model)


def _decided_indicators(dense: DenseModel, formula: StateFormula, epsilon=None):
    entry = sat_states(dense, formula, epsilon)[formula]
    if not entry.decided():
        raise UnsupportedPropertyError(
            f"operand {formula} stayed undecided at this precision"
        )
    return entry.lo


def _wrap_profiles(dense: DenseModel, vectors) -> dict[State, DenseProfile]:
    return {
        s: DenseProfile(dense.model.diagram, vectors[s]) for s in dense.states
    }


def next_profiles(model, formula: StateFormula, epsilon=None) -> dict[State, DenseProfile]:
    """Per-state profiles of the one-step probability of reaching the
    operand's satisfaction set."""
    dense = _as_dense_model(model)
    sat = _decided_indicators(dense, formula, epsilon)
    return _wrap_profiles(dense, _next_vectors(dense, sat))


def bounded_until_profiles(
    model, left: StateFormula, right: StateFormula, bound: int, epsilon=None
) -> dict[State, DenseProfile]:
    """Per-state profiles after exactly ``bound`` recurrence phases."""
    dense = _as_dense_model(model)
    sat1 = _decided_indicators(dense, left, epsilon)
    sat2 = _decided_indicators(dense, right, epsilon)
    return _wrap_profiles(dense, bounded_until_vectors(dense, sat1, sat2, bound))


def until_approx_profiles(
    model,
    left: StateFormula,
    right: StateFormula,
    epsilon=None,
    bound: int | None = None,
    max_depth: int = DEFAULT_MAX_DEPTH,
):
    """Lower approximation plus undecided mass as per-state profiles."""
    dense = _as_dense_model(model)
    sat1 = _decided_indicators(dense, left)
    sat2 = _decided_indicators(dense, right)
    x, u, k = until_lower_approx(
        dense, sat1, sat2, epsilon=epsilon, bound=bound, max_depth=max_depth
    )
    return _wrap_profiles(dense, x), _wrap_profiles(dense, u), k


def threshold(x: Mapping, undecided: Mapping, interval: Interval):
    """Three-valued threshold decision over per-state profiles.

    Returns (satisfied, unknown) indicator profiles per state: satisfied
    where the whole interval [x, x+undecided] sits inside the bound,
    unknown where it straddles the boundary.
    """
    states = list(x)
    some = x[states[0]]
    diagram = some.diagram
    n = len(some.dense_values())
    x_vec = {s: list(x[s].dense_values()) for s in states}
    u_vec = {s: list(undecided[s].dense_values()) for s in states}
    sat, unk = threshold_vectors(x_vec, u_vec, interval, states, n)
    return (
        {s: DenseProfile(diagram, sat[s]) for s in states},
        {s: DenseProfile(diagram, unk[s]) for s in states},
    )


# ---------------------------------------------------------------------------
# Reward queries
# ---------------------------------------------------------------------------


def bounded_expected_reward(
    dense: DenseModel,
    targets,
    epsilon,
    max_depth: int = DEFAULT_MAX_DEPTH,
):
    """Iterative lower bounds on expected reward-to-target with a sound
    truncation-error certificate.

    Products where some forward-reachable state cannot reach the target get
    an infinite value.  For the rest the alive mass decays geometrically;
    the decay factor observed over one model-size window turns the residual
    alive mass into a rigorous tail bound.
    """
    n = dense.n
    all_one = {s: dense.ones() for s in dense.states}
    target_vec = targets
    can = can_reach_vectors(dense, all_one, target_vec)
    fwd = forward_reachable_vectors(dense)
    infinite = [False] * n
    for s in dense.states:
        for i in range(n):
            if fwd[s][i] and not can[s][i] and target_vec[s][i] == 0:
                infinite[i] = True
    rewards = dense.reward_vectors()
    rmax = [ZERO] * n
    for s in dense.states:
        for i in range(n):
            if fwd[s][i] and rewards[s][i] > rmax[i]:
                rmax[i] = rewards[s][i]
    E = {s: dense.zeros() for s in dense.states}
    m = {
        s: [ONE if target_vec[s][i] == 0 else ZERO for i in range(n)]
        for s in dense.states
    }

    def step(values, add_reward):
        out = {}
        for s in dense.states:
            tgt = target_vec[s]
            acc = dense.zeros()
            for t, vec in dense.edges[s]:
                val = values[t]
                for i in range(n):
                    if vec[i] != 0 and val[i] != 0:
                        acc[i] += vec[i] * val[i]
            if add_reward:
                rew = rewards[s]
                row = [
                    (rew[i] + acc[i]) if tgt[i] == 0 else ZERO for i in range(n)
                ]
            else:
                row = [acc[i] if tgt[i] == 0 else ZERO for i in range(n)]
            out[s] = row
        return out

    window = max(len(dense.states), 1)
    for _ in range(window):
        E = step(E, True)
        m = step(m, False)
    # decay of the alive mass over one window, per product
    decay = [ZERO] * n
    for s in dense.states:
        for i in range(n):
            if fwd[s][i] and m[s][i] > decay[i]:
                decay[i] = m[s][i]
    k = window
    while True:
        done = True
        for i in range(n):
            if infinite[i] or rmax[i] == 0:
                continue
            alive = ZERO
            for s, weight in dense.init.items():
                alive += weight * m[s][i]
            if alive == 0:
                continue
            tail = rmax[i] * alive * window / (1 - decay[i]) if decay[i] < 1 else None
            if tail is None or tail >= epsilon:
                done = False
                break
        if done:
            break
        if k >= max_depth:
            raise ConvergenceError(
                f"reward iteration did not converge within {k} phases"
            )
        E = step(E, True)
        m = step(m, False)
        k += 1
    tails = [ZERO] * n
    for i in range(n):
        if infinite[i]:
            continue
        alive = ZERO
        for s, weight in dense.init.items():
            alive += weight * m[s][i]
        if rmax[i] != 0 and decay[i] < 1:
            tails[i] = rmax[i] * alive * window / (1 - decay[i])
    init_lower = [ZERO] * n
    for s, weight in dense.init.items():
        for i in range(n):
            init_lower[i] += weight * E[s][i]
    return init_lower, tails, infinite, k


# ---------------------------------------------------------------------------
# Family checking
# ---------------------------------------------------------------------------


def _aggregate_init(dense: DenseModel, vectors) -> list:
    out = [ZERO] * dense.n
    for s, weight in dense.init.items():
        row = vectors[s]
        for i in range(dense.n):
            out[i] += weight * row[i]
    return out


def check_family_bounded(
    model: FDTMC,
    prop: Property | str,
    epsilon=None,
    bound: int | None = None,
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> FamilyResult:
    """Check every product in a single exploration of the featured model.

    Quantitative queries report the midpoint of the certified interval with
    half its width as the error bound.  Threshold queries are three-valued;
    an unknown verdict triggers one automatic retry at a tenth of the
    precision before being surfaced.
    """
    from ..properties import bind_check, parse_property

    if isinstance(prop, str):
        prop = parse_property(prop)
    bind_check(prop, model.ap)
    epsilon = rational("1/1000") if epsilon is None else epsilon
    started = time.perf_counter()
    dense = DenseModel(model)
    products = dense.products
    result = FamilyResult(ENGINE_NAME, print_property(prop))

    def finish():
        result.elapsed = time.perf_counter() - started
        return result

    if isinstance(prop, RewardQuery):
        target_entry = sat_states(dense, prop.target, epsilon, max_depth)[prop.target]
        if not target_entry.decided():
            raise UnsupportedPropertyError(
                "reward target could not be decided at this precision"
            )
        lower, tails, infinite, _ = bounded_expected_reward(
            dense, target_entry.lo, epsilon, max_depth
        )
        for i, product in enumerate(products):
            if infinite[i]:
                outcome = ProductOutcome(product, value=INFINITY, error_bound=ZERO)
            else:
                half = tails[i] / 2
                outcome = ProductOutcome(
                    product, value=lower[i] + half, error_bound=half
                )
            result.outcomes[product] = outcome
        return finish()

    if isinstance(prop, Prob):
        def compute(eps):
            sat_cache = {}

            def sat_of(node):
                if node not in sat_cache:
                    sat_cache.update(sat_states(dense, node, eps, max_depth))
                return sat_cache[node]

            path = prop.path
            if (
                isinstance(path, Until)
                and path.bound is None
                and bound is None
                and sat_of(path.left).decided()
                and sat_of(path.right).decided()
            ):
                return _family_until_run(
                    dense,
                    sat_of(path.left).lo,
                    sat_of(path.right).lo,
                    eps,
                    max_depth,
                )
            lo, hi, _ = _path_interval(dense, path, sat_of, eps, max_depth, bound)
            return _aggregate_init(dense, lo), _aggregate_init(dense, hi)

        lo, hi = compute(epsilon)
        if prop.interval is None:
            for i, product in enumerate(products):
                half = (hi[i] - lo[i]) / 2
                result.outcomes[product] = ProductOutcome(
                    product, value=lo[i] + half, error_bound=half
                )
            return finish()
        deepened = False
        while True:
            unknowns = []
            for i, product in enumerate(products):
                if prop.interval.contains_range(lo[i], hi[i]):
                    decision = SAT
                elif prop.interval.disjoint_from_range(lo[i], hi[i]):
                    decision = VIOLATED
                else:
                    decision = UNKNOWN
                    unknowns.append(product)
                half = (hi[i] - lo[i]) / 2
                result.outcomes[product] = ProductOutcome(
                    product, value=lo[i] + half, decision=decision, error_bound=half
                )
            if not unknowns or deepened:
                if unknowns:
                    result.warnings.append(
                        f"{len(unknowns)} products stayed unknown at precision "
                        f"{epsilon}/10"
                    )
                return finish()
            deepened = True
            lo, hi = compute(epsilon / 10)

    # state formula without a top probability operator: decide per product
    # at the initial states (every support state must satisfy it)
    init_total = sum(model.init.values(), ZERO)
    for attempt_eps in (epsilon, epsilon / 10):
        entry = sat_states(dense, prop, attempt_eps, max_depth)[prop]
        init_lo = _aggregate_init(dense, entry.lo)
        init_hi = _aggregate_init(dense, entry.hi)
        unknowns = 0
        for i, product in enumerate(products):
            if init_lo[i] == init_total:
                decision = SAT
            elif init_hi[i] < init_total:
                decision = VIOLATED
            else:
                decision = UNKNOWN
                unknowns += 1
            result.outcomes[product] = ProductOutcome(product, decision=decision)
        if not unknowns:
            break
    if result.unknown_products:
        result.warnings.append(
            f"{len(result.unknown_products)} products stayed unknown after deepening"
        )
    return finish()
