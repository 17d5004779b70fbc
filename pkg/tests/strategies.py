"""Hypothesis strategies and seeded generators over the bundled domains."""

from __future__ import annotations

import random
from functools import lru_cache

from hypothesis import strategies as st

from raclab.core import Literal, State
from raclab.engine import is_applicable
from raclab.registry import bundled

PROBLEMS = [
    (name, problem)
    for name in ("blocksworld", "depots", "grippers")
    for problem in sorted(bundled().get(name).problems)
]


@lru_cache(maxsize=None)
def groundings(domain: str, problem: str):
    entry = bundled().get(domain)
    return tuple(entry.domain.groundings(entry.problems[problem].objects))


@lru_cache(maxsize=None)
def fluent_universe(domain: str, problem: str):
    entry = bundled().get(domain)
    return tuple(sorted(entry.domain.all_fluents(entry.problems[problem].objects)))


def applicable(domain: str, problem: str, s: State):
    return [a for a in groundings(domain, problem) if is_applicable(s, a).applicable]


def random_walk(rng: random.Random, domain: str, problem: str, length: int):
    """An applicable sequence of up to ``length`` actions (shorter if a dead end is hit)."""
    s = bundled().get(domain).problems[problem].init
    out = []
    for _ in range(length):
        options = applicable(domain, problem, s)
        if not options:
            break
        a = rng.choice(options)
        out.append(a)
        s = s.update(add=a.add, remove=a.delete)
    return out


def random_state(rng: random.Random, domain: str, problem: str) -> State:
    universe = fluent_universe(domain, problem)
    return State(f for f in universe if rng.random() < 0.3)


problems = st.sampled_from(PROBLEMS)


@st.composite
def walks(draw, max_length: int = 12):
    domain, problem = draw(problems)
    seed = draw(st.integers(0, 2**32 - 1))
    length = draw(st.integers(0, max_length))
    return domain, problem, random_walk(random.Random(seed), domain, problem, length)


@st.composite
def states(draw):
    domain, problem = draw(problems)
    universe = fluent_universe(domain, problem)
    picked = draw(st.lists(st.sampled_from(universe), max_size=25))
    return domain, problem, State(picked)


@st.composite
def literal_sets(draw, domain: str, problem: str, max_size: int = 4):
    universe = fluent_universe(domain, problem)
    fluents = draw(st.lists(st.sampled_from(universe), max_size=max_size, unique=True))
    return frozenset(Literal(f, draw(st.booleans())) for f in fluents)


__all__ = ["PROBLEMS", "applicable", "fluent_universe", "groundings", "literal_sets", "random_state", "random_walk", "states", "walks"]
