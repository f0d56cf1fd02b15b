"""Acceptance criteria 1-10.

Each criterion prints one PASS/FAIL line; under pytest the lines are also
collected into the terminal summary.  Run directly for the lines alone::

    python tests/test_acceptance.py [1 4 9 ...]
"""
import functools
import itertools
import math
import sys
import time

import numpy as np
import pytest

from rimscatter.closedloop import (
    AngleTable,
    AnnealSettings,
    SignalScenario,
    anneal_closed_loop,
    db_to_linear,
    ensemble_weight_stats,
    mc_error_probability,
    sample_from_ensemble,
    theorem1_error_probability,
    track_moving_source,
    true_gain,
)
from rimscatter.core import (
    DishConfig,
    build_geometry,
    element_field_vector,
    fixed_field,
    gain_dbi,
    to_dbi,
    total_pattern,
)
from rimscatter.hybrid import HybridScenario, run_hybrid
from rimscatter.openloop import build_constraints, gp_solve, optimal_weights_multi
from rimscatter.quantized import FireflySettings, firefly_search
from rimscatter.weights import PhaseAlphabet, WeightVector

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # pragma: no cover - direct runs from another directory
    ACCEPTANCE_LINES = []


@functools.cache
def _geo():
    return build_geometry(DishConfig())


def _deg(x):
    return math.radians(x)


def _quiescent(psi):
    g = _geo()
    return fixed_field(g, psi) + np.sum(element_field_vector(g, psi))


def _report(number, ok, detail, started):
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}  [{time.perf_counter() - started:.0f} s]"
    print(line, flush=True)
    ACCEPTANCE_LINES.append(line)
    return ok


# --- criteria ---------------------------------------------------------------------

def criterion_1():
    """Exact-null certificate for optimal and gradient-projection weights."""
    t0 = time.perf_counter()
    g = _geo()
    worst = 0.0
    for psi in map(_deg, (1.0, 1.25, 2.0, 3.0)):
        cs = build_constraints(g, [psi])
        ef = fixed_field(g, psi)
        for w in (optimal_weights_multi(cs).values, gp_solve(cs).weights.values):
            worst = max(worst, abs(ef + element_field_vector(g, psi) @ w) / abs(ef))
    return _report(1, worst < 1e-10, f"max |E_f + e.w|/|E_f| = {worst:.1e} (need < 1e-10)", t0)


def criterion_2():
    """Boresight bookkeeping: optimal null drop, GP main-lobe row holds."""
    t0 = time.perf_counter()
    g = _geo()
    ones = np.ones(g.n_elements)
    g0 = float(total_pattern(g, ones, [0.0]).gain_dbi[0])
    w = optimal_weights_multi(build_constraints(g, [_deg(1.25)])).values
    drop = float(total_pattern(g, w, [0.0]).gain_dbi[0]) - g0
    ok_a = abs(drop + 0.4) <= 0.2
    held = []
    for psi in np.radians(np.arange(1.0, 3.0001, 0.05)):
        wg = gp_solve(build_constraints(g, [psi], mainlobe=0.03)).weights.values
        held.append(float(gain_dbi(g, fixed_field(g, 0.0) + element_field_vector(g, 0.0) @ wg)))
    held = np.array(held)
    dev = float(np.max(np.abs(held - np.median(held))))
    ok_b = dev <= 0.1
    detail = (
        f"optimal null at 1.25 deg: {g0:.2f} -> {g0 + drop:.2f} dBi ({drop:+.2f} dB, need -0.4+-0.2); "
        f"gp+mainlobe boresight {np.median(held):.2f} dBi, max deviation {dev:.3f} dB over 41 angles (need <= 0.1)"
    )
    return _report(2, ok_a and ok_b, detail, t0)


def criterion_3():
    """Three simultaneous GP nulls, each >= 60 dB below the quiescent pattern."""
    t0 = time.perf_counter()
    g = _geo()
    angles = [_deg(a) for a in (1.0, 2.0, 3.0)]
    w = gp_solve(build_constraints(g, angles)).weights.values
    supp = [20 * math.log10(abs(_quiescent(p)) / abs(fixed_field(g, p) + element_field_vector(g, p) @ w)) for p in angles]
    return _report(3, min(supp) >= 60, "suppression at 1/2/3 deg = " + ", ".join(f"{s:.0f}" for s in supp) + " dB (need >= 60)", t0)


def criterion_4():
    """Firefly M=4 with a main-lobe row: >= 40 dB suppression at 1.75 deg."""
    t0 = time.perf_counter()
    g = _geo()
    psi = _deg(1.75)
    cs = build_constraints(g, [psi], mainlobe=0.03)
    quiet = float(gain_dbi(g, _quiescent(psi)))
    depths = []
    for seed in range(3):
        w = firefly_search(cs, PhaseAlphabet(4), FireflySettings(population=50, movements=600, seed=seed)).weights
        depths.append(float(to_dbi(true_gain(g, w, psi))))
    supp = [quiet - d for d in depths]
    detail = (
        f"quiescent {quiet:.1f} dBi; null " + ", ".join(f"{d:.1f}" for d in depths)
        + " dBi; suppression " + ", ".join(f"{s:.0f}" for s in supp) + " dB over seeds 0-2 (need >= 40 each)"
    )
    return _report(4, min(supp) >= 40, detail, t0)


def criterion_5():
    """Analytic decision-error probability against exact chi-square Monte Carlo on the 81-point grid."""
    t0 = time.perf_counter()
    grid = list(itertools.product((0.25, 1.0, 4.0), (0.01, 0.1, 0.5), (0.0, 10.0, 20.0), (10**3, 10**4, 10**5)))
    bad, bad_printed, worst = 0, 0, 0.0  # worst = largest |analytic - mc|
    for k, (G, frac, inr_db, n) in enumerate(grid):
        inr = float(db_to_linear(inr_db))
        mc, se = mc_error_probability(G, frac * G, inr, n, trials=10**6, seed=k)
        pa = theorem1_error_probability(G, frac * G, inr, n)
        pp = theorem1_error_probability(G, frac * G, inr, n, form="printed")
        tol = 3 * se + 0.01
        worst = max(worst, abs(pa - mc))
        bad += abs(pa - mc) > tol
        bad_printed += not (abs(pp - mc) <= tol)  # NaN counts as a miss
    detail = (
        f"derived denominator: {len(grid) - bad}/{len(grid)} points within 3 se + 0.01 "
        f"(largest |analytic - mc| {worst:.4f}); printed 4G form: {bad_printed} points outside"
    )
    return _report(5, bad == 0, detail, t0)


def _final_median(n_samples, reference, decisions=20_000):
    out = []
    for seed in range(10):
        sc = SignalScenario(_deg(1.75), inr_db=30.0, samples_per_decision=n_samples, seed=seed)
        st = AnnealSettings(schedule_length=decisions, alphabet=PhaseAlphabet(16), seed=seed, reference=reference)
        out.append(anneal_closed_loop(sc, _geo(), st).trace.final_gain_dbi)
    return float(np.median(out))


def criterion_6():
    """Final gain non-increasing in samples per decision (median of 10 seeds)."""
    t0 = time.perf_counter()
    ns = (10**3, 10**4, 10**5)
    literal = [_final_median(n, "last-accepted") for n in ns]
    fresh = [_final_median(n, "remeasure") for n in ns]
    ok = bool(np.all(np.diff(literal) <= 0))
    detail = (
        "median final dBi at N=1e3/1e4/1e5, 2e4 decisions, INR 30 dB: "
        + "/".join(f"{v:.2f}" for v in literal)
        + " (table bookkeeping); "
        + "/".join(f"{v:.1f}" for v in fresh)
        + " (remeasured reference, informational)"
    )
    return _report(6, ok, detail, t0)


def _noiseless_finals(levels, cluster, seeds, decisions, psi_deg=2.0):
    out = []
    for seed in seeds:
        st = AnnealSettings(schedule_length=decisions, alphabet=PhaseAlphabet(levels), cluster_size=cluster, seed=seed)
        out.append(anneal_closed_loop(SignalScenario(_deg(psi_deg), seed=seed), _geo(), st, noiseless=True))
    return out


def criterion_7():
    """Clustering 1/10/50 within 3 dB of each other (noiseless, M=4, 2 deg, 1e4 decisions)."""
    t0 = time.perf_counter()
    med = {}
    for c in (1, 10, 50):
        med[c] = float(np.median([r.trace.final_gain_dbi for r in _noiseless_finals(4, c, range(10), 10_000)]))
    binary50 = float(np.median([r.trace.final_gain_dbi for r in _noiseless_finals(2, 50, range(10), 10_000)]))
    spread = max(med.values()) - min(med.values())
    detail = (
        "median final dBi for cluster 1/10/50: " + "/".join(f"{med[c]:.1f}" for c in (1, 10, 50))
        + f", spread {spread:.1f} dB (need <= 3); binary cluster 50: {binary50:.1f} dBi (allowed to degrade)"
    )
    return _report(7, spread <= 3.0, detail, t0)


def criterion_8():
    """Binary ensemble structure over 100 noiseless SA runs at 2 deg."""
    t0 = time.perf_counter()
    g = _geo()
    psi = _deg(2.0)
    runs = _noiseless_finals(2, 1, range(100), 20_000)
    stats = ensemble_weight_stats([r.weights for r in runs])
    biased = float(np.mean(np.abs(stats.means) > 0.5))
    sa = np.median([r.trace.final_gain_dbi for r in runs])
    sampled = np.median([to_dbi(true_gain(g, sample_from_ensemble(stats, 1000 + k), psi)) for k in range(100)])
    rng = np.random.default_rng(7)
    b = PhaseAlphabet(2)
    rand = np.median([to_dbi(true_gain(g, WeightVector.from_indices(rng.integers(0, 2, g.n_elements), b), psi)) for _ in range(100)])
    ok_h = stats.mean_hamming < 0.25
    ok_m = biased > 0.5
    ok_o = sa < sampled < rand
    detail = (
        f"mean Hamming {stats.mean_hamming:.3f} (need < 0.25); |mean| > 0.5 for {100 * biased:.0f}% of elements "
        f"(need > 50%); median dBi SA {sa:.1f} < sampled {sampled:.1f} < random {rand:.1f}: {'yes' if ok_o else 'no'}"
    )
    return _report(8, ok_h and ok_m and ok_o, detail, t0)


def criterion_9():
    """Hybrid warm start reaches -40 dBi in <= 1/5 of the cold-start decisions."""
    t0 = time.perf_counter()
    runs = run_hybrid(HybridScenario(), true=_geo())
    warm = [r.warm_steps for r in runs]
    cold = [r.cold_steps for r in runs]
    ok = None not in warm and None not in cold and np.median(warm) <= np.median(cold) / 5
    gain_units = run_hybrid(HybridScenario(seeds=(0, 1, 2), stage2_metric="gain"), true=_geo())
    ratio_gain = np.median([r.ratio for r in gain_units])
    detail = (
        f"median decisions to -40 dBi warm {np.median(warm):.0f} vs cold {np.median(cold):.0f} "
        f"(ratio {np.median(cold) / max(np.median(warm), 1):.1f}, need >= 5); "
        f"stage-1 weights on true dish {np.median([r.stage1_true_gain_dbi for r in runs]):.1f} dBi; "
        f"bare-gain stage-2 metric ratio {ratio_gain:.1f} (informational)"
    )
    return _report(9, ok, detail, t0)


def criterion_10():
    """Scaled moving source: 16-ary tracking <= -45 dBi outside the first sidelobe for >= 90% of the track."""
    t0 = time.perf_counter()
    g = _geo()
    start, stop = _deg(3.0), _deg(1.2)
    # the first sidelobe lies between the first two minima of the quiescent cut
    ang = np.radians(np.arange(0.5, 2.5, 0.005))
    q = total_pattern(g, np.ones(g.n_elements), ang).gain_dbi
    mins = [i for i in range(1, q.size - 1) if q[i] < q[i - 1] and q[i] < q[i + 1]]
    lo, hi = np.degrees(ang[mins[0]]), np.degrees(ang[mins[1]])
    table = AngleTable(g, stop - 1e-4, start + 1e-4)
    alphabet = PhaseAlphabet(16)
    fractions = []
    for seed in range(3):
        warm = anneal_closed_loop(
            SignalScenario(start, seed=seed), g, AnnealSettings(schedule_length=100_000, alphabet=alphabet, seed=100 + seed),
            noiseless=True,
        ).weights
        # 10x slower decisions and 10x slower source: same decisions per degree as 1.1 GS/s, N=1e3, 0.79 deg/s
        sc = SignalScenario(start, inr_db=60, samples_per_decision=1000, sample_rate_hz=1.1e8,
                            angular_velocity_deg_s=-0.079, seed=seed)
        st = AnnealSettings(schedule_length=100_000, alphabet=alphabet, seed=seed, init="provided", initial=warm,
                            reference="remeasure")
        tr = track_moving_source(sc, g, st, stop_angle_rad=stop, table=table).trace
        a = np.degrees(tr.angle_rad)
        outside = (a < lo) | (a > hi)
        fractions.append(float(np.mean(tr.true_gain_dbi[outside] <= -45)))
    detail = (
        f"{len(tr) - 1} decisions per run; first sidelobe {lo:.2f}-{hi:.2f} deg excluded; "
        "fraction <= -45 dBi: " + ", ".join(f"{f:.4f}" for f in fractions) + " over seeds 0-2 (need >= 0.90 each)"
    )
    return _report(10, min(fractions) >= 0.90, detail, t0)


CRITERIA = {k: globals()[f"criterion_{k}"] for k in range(1, 11)}


@pytest.mark.slow
@pytest.mark.parametrize("number", list(CRITERIA))
def test_acceptance(number):
    assert CRITERIA[number](), f"acceptance criterion {number} failed; see the summary line"


if __name__ == "__main__":
    chosen = [int(a) for a in sys.argv[1:]] or list(CRITERIA)
    results = [CRITERIA[k]() for k in chosen]
    sys.exit(0 if all(results) else 1)
