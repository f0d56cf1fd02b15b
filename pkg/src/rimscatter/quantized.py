"""Discrete phase-only weight search: firefly algorithm and serial search."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .openloop import ConstraintSet
from .weights import PhaseAlphabet, WeightVector


@dataclass
class FireflySettings:
    population: int = 50
    movements: int = 600
    absorption_gamma: float | None = None  # None -> 1/N
    seed: int = 0
    init: str = "random"
    initial: WeightVector | np.ndarray | None = None
    mutation_probability: float = 0.02
    brightest_trials: int | None = None  # None -> population

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if self.movements < 1:
            raise ValueError("movements must be >= 1")
        if self.absorption_gamma is not None and not self.absorption_gamma > 0:
            raise ValueError("absorption_gamma must be > 0")
        if self.init not in ("random", "provided"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.init == "provided" and self.initial is None:
            raise ValueError("init='provided' needs an initial weight vector")
        if self.brightest_trials is not None and self.brightest_trials < 1:
            raise ValueError("brightest_trials must be >= 1")


@dataclass
class SearchResult:
    weights: WeightVector
    cost_trace: np.ndarray
    evaluations: int = 0

    @property
    def cost(self) -> float:
        return float(self.cost_trace[-1])


def cost(w, constraints: ConstraintSet) -> float:
    """||A w - t||^2; the firefly intensity is its reciprocal."""
    return constraints.cost(w)


def intensity(c):
    c = np.asarray(c, dtype=float)
    with np.errstate(divide="ignore"):
        return 1.0 / c


def hamming_distance(w_a: WeightVector, w_b: WeightVector) -> int:
    if w_a.alphabet != w_b.alphabet:
        raise ValueError("weight vectors use different alphabets")
    if len(w_a) != len(w_b):
        raise ValueError("weight vectors differ in length")
    return int(np.count_nonzero(w_a.indices != w_b.indices))


def _population_costs(pop, a, t, values):
    r = values[pop] @ a.T - t
    return np.sum(r.real**2 + r.imag**2, axis=1)


def _indices_of(w, alphabet):
    if isinstance(w, WeightVector) and w.indices is not None:
        if w.alphabet != alphabet:
            raise ValueError("initial weights use a different alphabet")
        return np.asarray(w.indices, dtype=np.int64)
    return alphabet.nearest(getattr(w, "values", w)).astype(np.int64)


def firefly_search(
    constraints: ConstraintSet, alphabet: PhaseAlphabet, settings: FireflySettings | None = None
) -> SearchResult:
    """Discrete firefly algorithm over the phase alphabet.

    Each movement ranks the population by intensity (ties broken by index),
    pulls every dimmer firefly toward each brighter one by copying differing
    coordinates with probability 1/(1 + gamma d_H), then moves the brightest
    firefly at random: ``brightest_trials`` single-coordinate redraws (default
    one per population member), each kept only if its intensity improves.
    Ranking uses the intensities from the start of the movement.
    """
    settings = settings or FireflySettings()
    a, t = constraints.matrix, constraints.targets
    n = a.shape[1]
    m = alphabet.m_levels
    values = alphabet.values
    gamma = settings.absorption_gamma if settings.absorption_gamma is not None else 1.0 / n
    rng = np.random.default_rng(settings.seed)
    p = settings.population
    trials = settings.brightest_trials or p

    if settings.init == "provided":
        base = _indices_of(settings.initial, alphabet)
        pop = np.tile(base, (p, 1))
        redraw = rng.random((p - 1, n)) < settings.mutation_probability
        pop[1:][redraw] = rng.integers(0, m, size=int(redraw.sum()))
    else:
        pop = rng.integers(0, m, size=(p, n))

    costs = _population_costs(pop, a, t, values)
    evals = p
    order = np.argsort(-costs, kind="stable")
    pop, costs = pop[order], costs[order]
    best = pop[-1].copy()
    best_cost = float(costs[-1])
    trace = np.empty(settings.movements + 1)
    trace[0] = best_cost

    for it in range(settings.movements):
        inten = intensity(costs)
        for i in range(p - 1):
            row = pop[i]
            for j in range(i + 1, p):
                if not inten[j] > inten[i]:
                    continue
                diff = row != pop[j]
                d = int(np.count_nonzero(diff))
                if d == 0:
                    continue
                beta = 1.0 / (1.0 + gamma * d)
                take = diff & (rng.random(n) < beta)
                row[take] = pop[j][take]

        # brightest firefly: random single-coordinate moves, each kept only on improvement
        top = pop[-1]
        r = values[top] @ a.T - t
        rc = float(np.vdot(r, r).real)
        ks = rng.integers(n, size=trials)
        news = rng.integers(m, size=trials)
        for k, new in zip(ks, news):
            if new == top[k]:
                continue
            trial = r + a[:, k] * (values[new] - values[top[k]])
            tc = float(np.vdot(trial, trial).real)
            evals += 1
            if tc < rc:
                top[k] = new
                r, rc = trial, tc

        costs = _population_costs(pop, a, t, values)
        evals += p
        order = np.argsort(-costs, kind="stable")
        pop, costs = pop[order], costs[order]
        if costs[-1] < best_cost:
            best_cost = float(costs[-1])
            best = pop[-1].copy()
        trace[it + 1] = best_cost

    return SearchResult(WeightVector.from_indices(best, alphabet), trace, evals)


def serial_search(
    constraints: ConstraintSet,
    alphabet: PhaseAlphabet,
    order_seed: int = 0,
    initial: WeightVector | None = None,
    max_passes: int = 10,
) -> SearchResult:
    """Coordinate descent over elements in a seeded random order.

    Starts from all weights equal to 1 unless ``initial`` is given.  Each visit
    sets one element to the alphabet value minimizing the cost with all others
    held fixed; passes repeat until nothing changes or ``max_passes`` is hit.
    """
    a, t = constraints.matrix, constraints.targets
    n = a.shape[1]
    values = alphabet.values
    if initial is None:
        idx = np.full(n, alphabet.m_levels - 1, dtype=np.int64)
    else:
        idx = _indices_of(initial, alphabet).copy()
    rng = np.random.default_rng(order_seed)
    order = rng.permutation(n)
    r = values[idx] @ a.T - t
    trace = [float(np.vdot(r, r).real)]
    for _ in range(max_passes):
        changed = 0
        for k in order:
            col = a[:, k]
            base = r - col * values[idx[k]]
            cand = base[None, :] + values[:, None] * col[None, :]
            c = np.sum(cand.real**2 + cand.imag**2, axis=1)
            best = int(np.argmin(c))
            if best != idx[k] and c[best] < c[idx[k]]:
                idx[k] = best
                r = cand[best]
                changed += 1
        trace.append(float(np.vdot(r, r).real))
        if changed == 0:
            break
    return SearchResult(WeightVector.from_indices(idx, alphabet), np.array(trace))


def complexity_estimate(settings: FireflySettings) -> float:
    """movements * (P(P+1)/2 + P log2 P) elementary operations."""
    p = settings.population
    return settings.movements * (p * (p + 1) / 2 + p * math.log2(p))
