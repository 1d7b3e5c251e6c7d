"""Featured Markov models and their compositions.

An FDTMC annotates every transition of a finite Markov chain with a profile,
so it encodes one concrete DTMC per valid product.  FMDPs add actions and
serve as the composable intermediate form: synchronized products run
components in lockstep with independent probabilistic choices, observer
products let a reactive component respond to its partner within the same
time step.  Every analyzed system is reduced to an FDTMC before checking.

Observation guards: a transition's action carries a Boolean guard over
propositions owned by *other* components.  Composition substitutes the
partner's label set into these guards (the current state's labels for the
synchronized product and for the driving side of the observer product, the
successor state's labels for the observing side).  Guards over propositions
foreign to both operands survive as residual guards and must be resolved by
a later composition.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

from .errors import InvalidProductError, ModelError, NondeterminismError
from .features import (
    FeatureDiagram,
    FeatureExpression,
    FFalse,
    FTrue,
    FVar,
    FNot,
    Product,
    TRUE,
    conj,
    conjoin,
    substitute,
)
from .profiles import (
    Profile,
    add,
    constant,
    indicator,
    probability_range_findings,
    reward_range_findings,
    sub,
    to_dense,
)
from .rational import ONE, ZERO, rational

State = Hashable


@dataclass(frozen=True)
class ActionLabel:
    """Base action name plus an observation guard over foreign propositions."""

    name: str
    obs: FeatureExpression = TRUE

    def __str__(self):
        if isinstance(self.obs, FTrue):
            return self.name
        return f"{self.name} | obs: {self.obs}"


@dataclass
class ValidationReport:
    """Findings from a structural model check; empty means the model is valid."""

    violations: list = field(default_factory=list)
    findings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations and not self.findings

    def __str__(self):
        if self.ok:
            return "valid"
        lines = list(self.findings)
        for item in self.violations:
            lines.append(str(item))
        return "\n".join(lines)


def render_state(state: State) -> str:
    if isinstance(state, tuple):
        return "(" + ",".join(render_state(s) for s in state) + ")"
    return str(state)


# ---------------------------------------------------------------------------
# FDTMC
# ---------------------------------------------------------------------------


class FDTMC:
    """Featured discrete-time Markov chain with optional state rewards."""

    def __init__(
        self,
        states: Sequence[State],
        init: Mapping[State, object] | State,
        diagram: FeatureDiagram,
        transitions: Mapping[tuple[State, State], Profile],
        ap: Iterable[str] = (),
        labels: Mapping[State, Iterable[str]] | None = None,
        rewards: Mapping[State, Profile] | None = None,
    ):
        self.states = tuple(states)
        state_set = set(self.states)
        if len(state_set) != len(self.states):
            raise ModelError("duplicate states")
        if not isinstance(init, Mapping):
            init = {init: ONE}
        self.init = {s: rational(v) if not isinstance(v, float) else v for s, v in init.items()}
        for s in self.init:
            if s not in state_set:
                raise ModelError(f"initial state {render_state(s)} not in state set")
        self.diagram = diagram
        self.transitions = dict(transitions)
        for (s, t), profile in self.transitions.items():
            if s not in state_set or t not in state_set:
                raise ModelError(f"transition ({render_state(s)},{render_state(t)}) uses unknown state")
            if profile.diagram != diagram:
                raise ModelError("transition profile has a foreign diagram")
        self.ap = frozenset(ap)
        self.labels = {s: frozenset(labels.get(s, ())) if labels else frozenset() for s in self.states}
        for s, props in self.labels.items():
            if not props <= self.ap:
                raise ModelError(f"state {render_state(s)} labeled with undeclared propositions")
        self.rewards = dict(rewards) if rewards is not None else None
        self._out: dict[State, list[tuple[State, Profile]]] | None = None

    def out_edges(self, state: State) -> list[tuple[State, Profile]]:
        if self._out is None:
            out: dict[State, list[tuple[State, Profile]]] = {s: [] for s in self.states}
            for (s, t), profile in self.transitions.items():
                out[s].append((t, profile))
            self._out = out
        return self._out[state]

    def reward_profile(self, state: State) -> Profile:
        if self.rewards is None or state not in self.rewards:
            return constant(ZERO, self.diagram)
        return self.rewards[state]

    def states_with(self, proposition: str) -> set[State]:
        return {s for s in self.states if proposition in self.labels[s]}

    def __repr__(self):
        return (
            f"FDTMC(states={len(self.states)}, transitions={len(self.transitions)}, "
            f"products={len(self.diagram.valid_products())})"
        )


class DTMC:
    """Concrete chain for one product; carries rewards when projected from an MRM."""

    def __init__(
        self,
        states: Sequence[State],
        init: Mapping[State, object],
        transitions: Mapping[tuple[State, State], object],
        labels: Mapping[State, frozenset] | None = None,
        rewards: Mapping[State, object] | None = None,
    ):
        self.states = tuple(states)
        self.init = dict(init)
        self.transitions = {k: v for k, v in transitions.items() if v != 0}
        self.labels = {s: frozenset(labels.get(s, ())) if labels else frozenset() for s in self.states}
        self.rewards = dict(rewards) if rewards is not None else None
        out: dict[State, list[tuple[State, object]]] = {s: [] for s in self.states}
        for (s, t), p in self.transitions.items():
            out[s].append((t, p))
        self._out = out

    def out_edges(self, state: State):
        return self._out[state]

    def states_with(self, proposition: str) -> set[State]:
        return {s for s in self.states if proposition in self.labels[s]}

    def validate(self) -> ValidationReport:
        report = ValidationReport()
        for s in self.states:
            total = sum((p for _, p in self._out[s]), ZERO)
            if total != 1:
                report.violations.append((s, total))
        return report


def validate_fdtmc(model: FDTMC) -> ValidationReport:
    """Check the product-consistency axiom plus profile and init sanity.

    Every violating (state, product, row sum) triple is reported, so a
    seeded error points directly at the offending combination.
    """
    report = ValidationReport()
    total_init = sum(model.init.values(), ZERO)
    if total_init != 1:
        report.findings.append(f"initial distribution sums to {total_init}, not 1")
    for s, weight in model.init.items():
        if weight < 0:
            report.findings.append(f"negative initial weight on {render_state(s)}")
    products = model.diagram.valid_products()
    for s in model.states:
        edges = model.out_edges(s)
        row = [ZERO] * len(products)
        for _, profile in edges:
            for i, v in enumerate(to_dense(profile).values):
                row[i] += v
            for finding in probability_range_findings(profile):
                report.findings.append(f"state {render_state(s)}: {finding}")
        for i, total in enumerate(row):
            if total != 1:
                report.violations.append((s, products[i], total))
    if model.rewards:
        for s, profile in model.rewards.items():
            for finding in reward_range_findings(profile):
                report.findings.append(f"reward of {render_state(s)}: {finding}")
    return report


def project(model: FDTMC, product: Product) -> DTMC:
    """Instantiate at one product: profiles collapse to their values there."""
    if not model.diagram.is_valid(product):
        raise InvalidProductError(f"{product} is not valid for this model")
    transitions = {
        key: profile.evaluate(product) for key, profile in model.transitions.items()
    }
    rewards = None
    if model.rewards is not None:
        rewards = {s: model.reward_profile(s).evaluate(product) for s in model.states}
    return DTMC(model.states, model.init, transitions, model.labels, rewards)


def path_probability(model: FDTMC, path: Sequence[State]) -> Profile:
    """Product of the profiles along the path; empty and singleton paths give 1."""
    result: Profile = constant(ONE, model.diagram)
    for s, t in zip(path, path[1:]):
        profile = model.transitions.get((s, t))
        if profile is None:
            raise ModelError(
                f"({render_state(s)},{render_state(t)}) is not a transition of the model"
            )
        result = result * profile
    return result


# ---------------------------------------------------------------------------
# FMDP
# ---------------------------------------------------------------------------


class FMDP:
    """Featured Markov decision process keyed by (state, action label, state).

    The action set is the set of base names; each concrete transition refines
    its base action with an observation guard.  A row may sum to 0 for some
    product, meaning the action is disabled there.
    """

    def __init__(
        self,
        states: Sequence[State],
        init: Mapping[State, object] | State,
        diagram: FeatureDiagram,
        transitions: Mapping[tuple[State, ActionLabel, State], Profile],
        ap: Iterable[str] = (),
        labels: Mapping[State, Iterable[str]] | None = None,
    ):
        self.states = tuple(states)
        state_set = set(self.states)
        if not isinstance(init, Mapping):
            init = {init: ONE}
        self.init = {s: rational(v) if not isinstance(v, float) else v for s, v in init.items()}
        self.diagram = diagram
        self.transitions = dict(transitions)
        for (s, label, t), profile in self.transitions.items():
            if s not in state_set or t not in state_set:
                raise ModelError("transition uses unknown state")
            if profile.diagram != diagram:
                raise ModelError("transition profile has a foreign diagram")
        self.ap = frozenset(ap)
        self.labels = {s: frozenset(labels.get(s, ())) if labels else frozenset() for s in self.states}
        self.action_names = frozenset(label.name for (_, label, _) in self.transitions)

    def transitions_from(self, state: State, name: str | None = None):
        for (s, label, t), profile in self.transitions.items():
            if s == state and (name is None or label.name == name):
                yield label, t, profile

    def obs_variables(self) -> frozenset[str]:
        out: set[str] = set()
        for (_, label, _) in self.transitions:
            out |= label.obs.variables()
        return frozenset(out)

    def __repr__(self):
        return (
            f"FMDP(states={len(self.states)}, actions={sorted(self.action_names)}, "
            f"transitions={len(self.transitions)})"
        )


def _obs_classes(variables):
    """Split the observation space into assignments over the relevant guards."""
    variables = sorted(variables)
    for values in itertools.product((False, True), repeat=len(variables)):
        yield dict(zip(variables, values))


def _row_groups(model: FMDP):
    """Yield (state, action name, obs assignment, matching edges) rows.

    Each row is one cell of the consistency axiom: a concrete observation
    class of one action in one state.
    """
    by_sa: dict[tuple[State, str], list] = {}
    for (s, label, t), profile in model.transitions.items():
        by_sa.setdefault((s, label.name), []).append((label, t, profile))
    names = sorted({name for (_, name) in by_sa}) or []
    for s in model.states:
        for name in names:
            edges = by_sa.get((s, name), [])
            variables = set()
            for label, _, _ in edges:
                variables |= label.obs.variables()
            for assignment in _obs_classes(variables):
                matching = [
                    (label, t, profile)
                    for label, t, profile in edges
                    if label.obs.evaluate(assignment)
                ]
                yield s, name, assignment, matching


def validate_fmdp(model: FMDP) -> ValidationReport:
    """Consistency axiom: every row sums to 0 or 1 for every product."""
    report = ValidationReport()
    products = model.diagram.valid_products()
    for s, name, assignment, edges in _row_groups(model):
        row = [ZERO] * len(products)
        for _, _, profile in edges:
            for i, v in enumerate(to_dense(profile).values):
                row[i] += v
        for i, total in enumerate(row):
            if total != 0 and total != 1:
                report.violations.append((s, name, dict(assignment), products[i], total))
    return report


def is_complete(model: FMDP) -> bool:
    """True iff every action is enabled in every state for every product."""
    products = model.diagram.valid_products()
    for s, name, assignment, edges in _row_groups(model):
        row = [ZERO] * len(products)
        for _, _, profile in edges:
            for i, v in enumerate(to_dense(profile).values):
                row[i] += v
        if any(total != 1 for total in row):
            return False
    return True


def project_fmdp(model: FMDP, product: Product) -> FMDP:
    """Project onto one product, keeping observation guards symbolic.

    The result is an FMDP over the empty feature diagram (a plain MDP), so
    composition operators apply to projected components unchanged.
    """
    if not model.diagram.is_valid(product):
        raise InvalidProductError(f"{product} is not valid for this model")
    trivial = FeatureDiagram(())
    transitions = {}
    for key, profile in model.transitions.items():
        value = profile.evaluate(product)
        if value != 0:
            transitions[key] = constant(value, trivial)
    return FMDP(model.states, model.init, trivial, transitions, model.ap, model.labels)


def fdtmc_as_fmdp(model: FDTMC, action: str = "tick") -> FMDP:
    """View an FDTMC as the complete single-action FMDP it degenerates from."""
    transitions = {
        (s, ActionLabel(action), t): profile
        for (s, t), profile in model.transitions.items()
    }
    return FMDP(model.states, model.init, model.diagram, transitions, model.ap, model.labels)


def as_fdtmc(model: FMDP) -> FDTMC:
    """Collapse a complete single-action FMDP back to an FDTMC."""
    if len(model.action_names) != 1:
        raise ModelError(
            f"expected a single action, found {sorted(model.action_names)}"
        )
    for (_, label, _) in model.transitions:
        if not isinstance(label.obs, FTrue):
            raise ModelError(
                f"unresolved observation guard {label.obs} left after composition"
            )
    if not is_complete(model):
        raise ModelError("FMDP is not complete; cannot view it as an FDTMC")
    transitions: dict[tuple[State, State], Profile] = {}
    for (s, label, t), profile in model.transitions.items():
        key = (s, t)
        if key in transitions:
            transitions[key] = add(transitions[key], profile)
        else:
            transitions[key] = profile
    return FDTMC(model.states, model.init, model.diagram, transitions, model.ap, model.labels)


# ---------------------------------------------------------------------------
# Featured transition systems
# ---------------------------------------------------------------------------


class FTS:
    """Transition system with feature expressions: probability-free variability."""

    def __init__(
        self,
        states: Sequence[State],
        init: State,
        diagram: FeatureDiagram,
        transitions: Mapping[tuple[State, ActionLabel, State], FeatureExpression],
        ap: Iterable[str] = (),
        labels: Mapping[State, Iterable[str]] | None = None,
    ):
        self.states = tuple(states)
        self.init = init
        self.diagram = diagram
        self.transitions = dict(transitions)
        self.ap = frozenset(ap)
        self.labels = {s: frozenset(labels.get(s, ())) if labels else frozenset() for s in self.states}


def fts_to_fmdp(fts: FTS) -> FMDP:
    """Feature expressions become 0/1 indicator profiles.

    Rejects nondeterminism: no state may enable two targets for the same
    action, observation and product.
    """
    transitions = {
        key: indicator(guard, fts.diagram) for key, guard in fts.transitions.items()
    }
    model = FMDP(fts.states, fts.init, fts.diagram, transitions, fts.ap, fts.labels)
    products = model.diagram.valid_products()
    for s, name, assignment, edges in _row_groups(model):
        if len(edges) < 2:
            continue
        for i, product in enumerate(products):
            enabled = [t for _, t, profile in edges if to_dense(profile).values[i] != 0]
            if len(enabled) > 1:
                raise NondeterminismError(
                    f"state {render_state(s)}, action {name}, observation "
                    f"{assignment} enables {len(enabled)} targets for product {product}"
                )
    return model


def complete_deterministic(model: FMDP) -> FMDP:
    """Add probability-1 self-loops wherever a row sums to 0.

    Rows that sum to anything other than 0 or 1 are structural errors.
    The added self-loop is guarded by the exact observation class it covers.
    """
    transitions = dict(model.transitions)
    for s, name, assignment, edges in _row_groups(model):
        row_sum: Profile = constant(ZERO, model.diagram)
        for _, _, profile in edges:
            row_sum = add(row_sum, profile)
        residual = sub(constant(ONE, model.diagram), row_sum)
        residual_values = to_dense(residual).values
        if any(v not in (0, 1) for v in residual_values):
            bad = next(v for v in residual_values if v not in (0, 1))
            raise ModelError(
                f"state {render_state(s)}, action {name}: row sums to {1 - bad}, "
                "cannot complete a non-deterministic-profile row"
            )
        if all(v == 0 for v in residual_values):
            continue
        literals = [
            FVar(n) if v else FNot(FVar(n)) for n, v in sorted(assignment.items())
        ]
        label = ActionLabel(name, conj(*literals))
        key = (s, label, s)
        if key in transitions:
            transitions[key] = add(transitions[key], residual)
        else:
            transitions[key] = residual
    return FMDP(model.states, model.init, model.diagram, transitions, model.ap, model.labels)


# ---------------------------------------------------------------------------
# Composition
# ---------------------------------------------------------------------------


def _substitute_partner(guard: FeatureExpression, partner_ap: frozenset, partner_labels: frozenset):
    if isinstance(guard, FTrue):
        return guard
    binding = {p: (p in partner_labels) for p in partner_ap & guard.variables()}
    return substitute(guard, binding)


def _prune_unreachable(
    states, init, transitions, labels, diagram
):
    """Keep states reachable with positive probability for some product.

    Reachability is per product: a kept state has, for at least one single
    product, a positive-probability path from the initial distribution.
    """
    n = len(diagram.valid_products())
    succ: dict[State, list[tuple[State, tuple]]] = {s: [] for s in states}
    for key, profile in transitions.items():
        s, t = key[0], key[-1]
        succ[s].append((t, to_dense(profile).values))
    reach: dict[State, list[bool]] = {s: [False] * n for s in states}
    frontier = []
    for s, w in init.items():
        if w != 0:
            reach[s] = [True] * n
            frontier.append(s)
    while frontier:
        s = frontier.pop()
        row = reach[s]
        for t, vec in succ[s]:
            target = reach[t]
            changed = False
            for i in range(n):
                if row[i] and vec[i] > 0 and not target[i]:
                    target[i] = True
                    changed = True
            if changed:
                frontier.append(t)
    reachable = {s for s in states if any(reach[s])}
    kept_states = tuple(s for s in states if s in reachable)
    kept_transitions = {
        key: profile
        for key, profile in transitions.items()
        if key[0] in reachable and key[-1] in reachable
    }
    kept_labels = {s: labels[s] for s in kept_states}
    return kept_states, kept_transitions, kept_labels


def sync_product(m1: FMDP, m2: FMDP, prune: bool = True) -> FMDP:
    """CSP-style synchronized product.

    Shared actions fire jointly with independent probabilistic choices;
    either side's observation guards read the partner's *current* labels.
    Unshared actions move one component while the other stays put.
    """
    if m1.ap & m2.ap:
        raise ModelError(f"overlapping atomic propositions: {sorted(m1.ap & m2.ap)}")
    diagram = conjoin(m1.diagram, m2.diagram)
    shared = m1.action_names & m2.action_names
    transitions: dict[tuple[State, ActionLabel, State], Profile] = {}

    def accumulate(key, profile):
        if key in transitions:
            transitions[key] = add(transitions[key], profile)
        else:
            transitions[key] = profile

    edges1: dict[str, list] = {}
    for (s, label, t), profile in m1.transitions.items():
        edges1.setdefault(label.name, []).append((s, label, t, profile.lift(diagram)))
    edges2: dict[str, list] = {}
    for (s, label, t), profile in m2.transitions.items():
        edges2.setdefault(label.name, []).append((s, label, t, profile.lift(diagram)))

    for name in shared:
        for s1, label1, t1, p1 in edges1.get(name, ()):
            for s2, label2, t2, p2 in edges2.get(name, ()):
                g1 = _substitute_partner(label1.obs, m2.ap, m2.labels[s2])
                g2 = _substitute_partner(label2.obs, m1.ap, m1.labels[s1])
                guard = conj(g1, g2)
                if isinstance(guard, FFalse):
                    continue
                accumulate(((s1, s2), ActionLabel(name, guard), (t1, t2)), p1 * p2)
    for name in m1.action_names - shared:
        for s1, label1, t1, p1 in edges1.get(name, ()):
            for s2 in m2.states:
                guard = _substitute_partner(label1.obs, m2.ap, m2.labels[s2])
                if isinstance(guard, FFalse):
                    continue
                accumulate(((s1, s2), ActionLabel(name, guard), (t1, s2)), p1)
    for name in m2.action_names - shared:
        for s2, label2, t2, p2 in edges2.get(name, ()):
            for s1 in m1.states:
                guard = _substitute_partner(label2.obs, m1.ap, m1.labels[s1])
                if isinstance(guard, FFalse):
                    continue
                accumulate(((s1, s2), ActionLabel(name, guard), (s1, t2)), p2)

    states = tuple((a, b) for a in m1.states for b in m2.states)
    init = {
        (a, b): wa * wb
        for a, wa in m1.init.items()
        for b, wb in m2.init.items()
    }
    labels = {(a, b): m1.labels[a] | m2.labels[b] for (a, b) in states}
    if prune:
        states, transitions, labels = _prune_unreachable(
            states, init, transitions, labels, diagram
        )
    return FMDP(states, init, diagram, transitions, m1.ap | m2.ap, labels)


def observer_product(m1: FMDP, m2: FMDP, prune: bool = True) -> FMDP:
    """Asymmetric composition: m2 reacts instantly to m1's successor labels.

    m2 must be complete and its guards may only mention m1's propositions.
    m1's own observation guards, if any, are resolved against m2's current
    labels, which is the only causally sound direction for a mutual read.
    """
    if m1.ap & m2.ap:
        raise ModelError(f"overlapping atomic propositions: {sorted(m1.ap & m2.ap)}")
    stray = m2.obs_variables() - m1.ap
    if stray:
        raise ModelError(
            f"observer guards mention propositions outside the observee: {sorted(stray)}"
        )
    if len(m2.action_names) > 1:
        raise ModelError(
            "the observer's action alphabet is the set of observations; it may "
            f"not mix base actions {sorted(m2.action_names)}"
        )
    if not is_complete(m2):
        raise ModelError("observer must be a complete FMDP")
    diagram = conjoin(m1.diagram, m2.diagram)
    transitions: dict[tuple[State, ActionLabel, State], Profile] = {}

    def accumulate(key, profile):
        if key in transitions:
            transitions[key] = add(transitions[key], profile)
        else:
            transitions[key] = profile

    observer_edges: dict[State, list] = {}
    for (s, label, t), profile in m2.transitions.items():
        observer_edges.setdefault(s, []).append((label, t, profile.lift(diagram)))

    for (s1, label1, t1), p1 in m1.transitions.items():
        p1l = p1.lift(diagram)
        observed = {p: (p in m1.labels[t1]) for p in m1.ap}
        for s2 in m2.states:
            g1 = _substitute_partner(label1.obs, m2.ap, m2.labels[s2])
            if isinstance(g1, FFalse):
                continue
            for label2, t2, p2 in observer_edges.get(s2, ()):
                if not label2.obs.evaluate(observed):
                    continue
                accumulate(
                    ((s1, s2), ActionLabel(label1.name, g1), (t1, t2)), p1l * p2
                )

    states = tuple((a, b) for a in m1.states for b in m2.states)
    init = {
        (a, b): wa * wb
        for a, wa in m1.init.items()
        for b, wb in m2.init.items()
    }
    labels = {(a, b): m1.labels[a] | m2.labels[b] for (a, b) in states}
    if prune:
        states, transitions, labels = _prune_unreachable(
            states, init, transitions, labels, diagram
        )
    return FMDP(states, init, diagram, transitions, m1.ap | m2.ap, labels)
