"""Shared fixtures: bundled models, random model generators, oracles."""

from __future__ import annotations

import itertools
import random

import pytest

from featmc import bundled_model_path, load_model
from featmc.features import FNot, FVar, FeatureDiagram, TRUE, conj
from featmc.models import FDTMC, FMDP, ActionLabel
from featmc.profiles import GuardedProfile
from featmc.rational import ONE, ZERO, rational


@pytest.fixture(scope="session")
def wiper():
    return load_model(bundled_model_path("wiper"))


@pytest.fixture(scope="session")
def minepump():
    return load_model(bundled_model_path("minepump"))


# ---------------------------------------------------------------------------
# Random model construction (axiom-correct by construction)
# ---------------------------------------------------------------------------


def _guard_classes(rng: random.Random, features, max_guard_features=2):
    """A random partition of the product space into literal-conjunctions."""
    chosen = rng.sample(features, min(len(features), rng.randint(0, max_guard_features)))
    if not chosen:
        return [TRUE]
    classes = []
    for values in itertools.product((False, True), repeat=len(chosen)):
        literals = [FVar(f) if v else FNot(FVar(f)) for f, v in zip(chosen, values)]
        classes.append(conj(*literals))
    return classes


def _random_distribution(rng: random.Random, size: int, grain: int = 8):
    """Random rationals with denominator ``grain`` summing to one."""
    cuts = sorted(rng.randint(0, grain) for _ in range(size - 1))
    weights = []
    prev = 0
    for c in cuts:
        weights.append(c - prev)
        prev = c
    weights.append(grain - prev)
    return [rational(w, grain) for w in weights]


def random_fdtmc(
    rng: random.Random,
    max_states: int = 8,
    max_features: int = 4,
    with_rewards: bool = False,
    propositions=("a", "b", "c"),
) -> FDTMC:
    """A random product-consistent FDTMC with guard-list profiles."""
    n_states = rng.randint(2, max_states)
    n_features = rng.randint(1, max_features)
    features = [f"f{i}" for i in range(1, n_features + 1)]
    diagram = FeatureDiagram(features)
    states = [f"s{i}" for i in range(n_states)]
    transitions = {}
    for s in states:
        classes = _guard_classes(rng, features)
        successors = rng.sample(states, rng.randint(1, min(3, n_states)))
        case_values = {t: [] for t in successors}
        for guard in classes:
            dist = _random_distribution(rng, len(successors))
            for t, p in zip(successors, dist):
                case_values[t].append((guard, p))
        for t, cases in case_values.items():
            if len(classes) == 1:
                profile = GuardedProfile(diagram, (), cases[0][1])
            else:
                profile = GuardedProfile(diagram, cases, ZERO)
            if not profile.is_zero():
                transitions[(s, t)] = profile
    labels = {}
    ap = set()
    for s in states:
        props = [p for p in propositions if rng.random() < 0.4]
        labels[s] = props
        ap.update(props)
    # make sure every proposition labels at least one state
    for p in propositions:
        if p not in ap:
            labels[states[rng.randrange(n_states)]].append(p)
            ap.add(p)
    rewards = None
    if with_rewards:
        rewards = {}
        for s in states:
            classes = _guard_classes(rng, features, 1)
            cases = [(g, rational(rng.randint(0, 3))) for g in classes]
            rewards[s] = GuardedProfile(diagram, cases[:-1], cases[-1][1])
    return FDTMC(states, states[0], diagram, transitions, sorted(ap), labels, rewards)


def random_complete_fmdp(
    rng: random.Random,
    feature_prefix: str,
    propositions,
    foreign_propositions=(),
    max_states: int = 3,
    max_actions: int = 2,
    single_action: bool = False,
) -> FMDP:
    """A random complete FMDP; observation guards read foreign propositions."""
    n_states = rng.randint(1, max_states)
    n_features = rng.randint(1, 2)
    features = [f"{feature_prefix}{i}" for i in range(1, n_features + 1)]
    diagram = FeatureDiagram(features)
    states = [f"{feature_prefix}q{i}" for i in range(n_states)]
    if single_action:
        max_actions = 1
    actions = [f"act{i}" for i in range(1, rng.randint(1, max_actions) + 1)]
    transitions = {}
    for s in states:
        for a in actions:
            obs_classes = [TRUE]
            if foreign_propositions and rng.random() < 0.5:
                prop = rng.choice(list(foreign_propositions))
                obs_classes = [FVar(prop), FNot(FVar(prop))]
            for obs in obs_classes:
                classes = _guard_classes(rng, features, 1)
                successors = rng.sample(states, rng.randint(1, n_states))
                case_values = {t: [] for t in successors}
                for guard in classes:
                    dist = _random_distribution(rng, len(successors))
                    for t, p in zip(successors, dist):
                        case_values[t].append((guard, p))
                for t, cases in case_values.items():
                    if len(classes) == 1:
                        profile = GuardedProfile(diagram, (), cases[0][1])
                    else:
                        profile = GuardedProfile(diagram, cases, ZERO)
                    if profile.is_zero():
                        continue
                    key = (s, ActionLabel(a, obs), t)
                    transitions[key] = profile
    labels = {s: [p for p in propositions if rng.random() < 0.5] for s in states}
    return FMDP(states, states[0], diagram, transitions, propositions, labels)


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------


def path_enumeration_until(dtmc, sat1, sat2, bound):
    """Brute-force bounded-until probabilities by enumerating paths."""
    out = {}
    for start in dtmc.states:
        def rec(s, depth, weight):
            if s in sat2:
                return weight
            if depth == bound or s not in sat1:
                return ZERO
            total = ZERO
            for t, p in dtmc.out_edges(s):
                total += rec(t, depth + 1, weight * p)
            return total

        out[start] = rec(start, 0, ONE)
    return out


def value_iteration_until(dtmc, sat1, sat2, steps=10_000, float_mode=True):
    """Long float value iteration; independent check of the exact solver."""
    values = {s: (1.0 if s in sat2 else 0.0) for s in dtmc.states}
    edges = {
        s: [(t, float(p)) for t, p in dtmc.out_edges(s)] for s in dtmc.states
    }
    for _ in range(steps):
        nxt = {}
        delta = 0.0
        for s in dtmc.states:
            if s in sat2:
                nxt[s] = 1.0
            elif s not in sat1:
                nxt[s] = 0.0
            else:
                nxt[s] = sum(p * values[t] for t, p in edges[s])
            delta = max(delta, abs(nxt[s] - values[s]))
        values = nxt
        if delta < 1e-15:
            break
    return values
