"""Closed-loop weight adaptation driven by noisy received-power measurements.

Received samples are real baseband ``x[k] = sqrt(G) z[k] + n[k]`` with
``z ~ N(0, INR)`` and ``n ~ N(0, 1)``, G being the linear directive gain toward
the interferer.  Each decision averages ``x**2`` over N samples.

Every run draws from two independent streams spawned from its seed: stream 0
for proposals and acceptance draws, stream 1 for the signal/noise
measurements.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .core import Geometry, element_field_vector, fixed_field, to_dbi
from .weights import PhaseAlphabet, WeightVector


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def q_function(x):
    return 0.5 * special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


@dataclass
class SignalScenario:
    interferer_angle_rad: float
    inr_db: float = 30.0
    samples_per_decision: int = 1000
    sample_rate_hz: float = 1.1e9
    seed: int = 0
    angular_velocity_deg_s: float = 0.0

    def __post_init__(self):
        if self.samples_per_decision < 1:
            raise ValueError("samples_per_decision must be >= 1")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be > 0")

    @property
    def inr(self) -> float:
        return float(db_to_linear(self.inr_db))

    @property
    def decision_interval_s(self) -> float:
        return self.samples_per_decision / self.sample_rate_hz

    def angle_at(self, decision):
        t = np.asarray(decision, dtype=float) * self.decision_interval_s
        return self.interferer_angle_rad + np.radians(self.angular_velocity_deg_s) * t


@dataclass
class AnnealSettings:
    schedule_length: int = 10_000
    alphabet: PhaseAlphabet = field(default_factory=lambda: PhaseAlphabet(16))
    cluster_size: int = 1
    seed: int = 0
    init: str = "random"
    initial: WeightVector | np.ndarray | None = None
    decisions: int | None = None  # None -> schedule_length
    reference: str = "last-accepted"

    def __post_init__(self):
        if self.reference not in ("last-accepted", "remeasure"):
            raise ValueError(f"unknown reference {self.reference!r}")
        if self.schedule_length < 1:
            raise ValueError("schedule_length must be >= 1")
        if self.cluster_size < 1:
            raise ValueError("cluster_size must be >= 1")
        if self.init not in ("random", "provided"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.init == "provided" and self.initial is None:
            raise ValueError("init='provided' needs an initial weight vector")

    def temperature(self, k):
        """T(k) = 1/(k+1), held at 1/T once the schedule is exhausted."""
        k = np.minimum(np.asarray(k), self.schedule_length - 1)
        return 1.0 / (k + 1.0)


@dataclass
class ClosedLoopTrace:
    index: np.ndarray
    accepted: np.ndarray
    measured: np.ndarray
    true_gain_dbi: np.ndarray
    angle_rad: np.ndarray
    time_s: np.ndarray

    def __len__(self):
        return self.index.size

    @property
    def final_gain_dbi(self) -> float:
        return float(self.true_gain_dbi[-1])

    def decisions_to(self, threshold_dbi: float) -> int | None:
        """First decision index at which the true gain is at or below threshold."""
        hit = np.flatnonzero(self.true_gain_dbi <= threshold_dbi)
        return int(self.index[hit[0]]) if hit.size else None


@dataclass
class AnnealResult:
    trace: ClosedLoopTrace
    weights: WeightVector


@dataclass
class WeightLibrary:
    angles_rad: np.ndarray
    weights: list
    flags: list = field(default_factory=list)

    def __post_init__(self):
        self.angles_rad = np.asarray(self.angles_rad, dtype=float)
        if np.any(np.diff(self.angles_rad) <= 0):
            raise ValueError("library angles must be strictly increasing")
        if len(self.weights) != self.angles_rad.size:
            raise ValueError("one weight vector per library angle")
        if not self.flags:
            self.flags = ["ok"] * self.angles_rad.size

    def __len__(self):
        return self.angles_rad.size

    @property
    def entries(self):
        return list(zip(self.angles_rad, self.weights))


# --- measurement model ---------------------------------------------------

def _streams(seed):
    a, b = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(a), np.random.default_rng(b)


def true_gain(geometry: Geometry, w, psi: float) -> float:
    w = np.asarray(getattr(w, "values", w))
    e = fixed_field(geometry, psi) + element_field_vector(geometry, psi) @ w
    return geometry.gain_constant * abs(e) ** 2


def generate_samples(scenario: SignalScenario, geometry: Geometry, w, count: int, rng=None, gain=None):
    """Real samples sqrt(G) z + n at the scenario's starting angle."""
    rng = rng if rng is not None else _streams(scenario.seed)[1]
    g = true_gain(geometry, w, scenario.interferer_angle_rad) if gain is None else float(gain)
    z = rng.normal(0.0, math.sqrt(scenario.inr), count)
    n = rng.normal(0.0, 1.0, count)
    return math.sqrt(g) * z + n


def power_metric(samples) -> float:
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("power metric of an empty sample block")
    return float(np.mean(x * x))


def measure(gain: float, inr: float, n_samples: int, rng, method: str = "chisquare") -> float:
    """One decision's power metric Z for linear gain ``gain``.

    ``chisquare`` draws Z = (G INR + 1) chi2_N / N directly, which has exactly
    the law of the sample mean of N squared real Gaussians; ``samples``
    generates the N samples.
    """
    if method == "samples":
        x = math.sqrt(gain) * rng.normal(0.0, math.sqrt(inr), n_samples) + rng.normal(0.0, 1.0, n_samples)
        return power_metric(x)
    return (gain * inr + 1.0) * rng.chisquare(n_samples) / n_samples


# --- decision error probability -----------------------------------------

def theorem1_gamma(G, delta_G, inr, n_samples, form: str = "derived"):
    """Gaussian-approximation argument of Q in the rejection probability.

    ``derived`` carries the algebra through: the leading denominator term is
    (4 G^2 - 4 G dG + 2 dG^2) INR.  ``printed`` uses 4 G in place of 4 G^2,
    as the closed form is sometimes quoted; the two coincide at G = 1.
    """
    G = np.asarray(G, dtype=float)
    dG = np.asarray(delta_G, dtype=float)
    inr = np.asarray(inr, dtype=float)
    lead = 4.0 * G**2 if form == "derived" else 4.0 * G
    if form not in ("derived", "printed"):
        raise ValueError(f"unknown form {form!r}")
    den = (lead - 4.0 * G * dG + 2.0 * dG**2) * inr + 8.0 * G - 4.0 * dG + 4.0 / inr
    # the printed form can go negative for G < 1 and large dG; that yields NaN
    with np.errstate(invalid="ignore"):
        return np.sqrt(n_samples * dG**2 * inr / den)


def theorem1_error_probability(G, delta_G, inr, n_samples, form: str = "derived"):
    """Q(Gamma): probability of keeping the worse of two weight vectors.

    ``inr`` is linear.  Requires 0 < delta_G <= G.
    """
    if np.any(np.asarray(delta_G) <= 0):
        raise ValueError("delta_G must be > 0")
    if np.any(np.asarray(G) < np.asarray(delta_G)):
        raise ValueError("delta_G cannot exceed G")
    if np.any(np.asarray(inr) <= 0) or np.any(np.asarray(n_samples) < 1):
        raise ValueError("inr must be > 0 and n_samples >= 1")
    p = q_function(theorem1_gamma(G, delta_G, inr, n_samples, form))
    return float(p) if np.ndim(p) == 0 else p


def mc_error_probability(G, delta_G, inr, n_samples, trials: int = 10_000, seed: int = 0):
    """Monte Carlo estimate of Pr(Z1 > Z0) from exact chi-square draws.

    Z0 and Z1 use independent signal and noise (separate measurement
    intervals).  Returns ``(estimate, binomial_stderr)``.
    """
    if trials < 10_000:
        raise ValueError("trials must be >= 1e4 for a usable binomial error bar")
    rng = np.random.default_rng(seed)
    s0 = G * inr + 1.0
    s1 = (G - delta_G) * inr + 1.0
    z0 = s0 * rng.chisquare(n_samples, trials) / n_samples
    z1 = s1 * rng.chisquare(n_samples, trials) / n_samples
    p = float(np.mean(z1 > z0))
    return p, math.sqrt(max(p * (1.0 - p), 0.25 / trials) / trials)


# --- rim clustering --------------------------------------------------------

def cluster_partition(geometry: Geometry, cluster_size: int) -> list[np.ndarray]:
    """Contiguous azimuthal runs of ``cluster_size`` elements on each ring.

    The last run on a ring keeps the remainder.
    """
    if cluster_size < 1:
        raise ValueError("cluster_size must be >= 1")
    out = []
    for ring in np.unique(geometry.rings):
        members = np.flatnonzero(geometry.rings == ring)
        phi = np.arctan2(geometry.positions[members, 1], geometry.positions[members, 0]) % (2 * np.pi)
        members = members[np.argsort(phi, kind="stable")]
        for start in range(0, members.size, cluster_size):
            out.append(members[start : start + cluster_size])
    return out


# --- simulated annealing ---------------------------------------------------

def _check_metric(metric):
    if metric not in ("gain", "power"):
        raise ValueError(f"unknown noiseless metric {metric!r}")


class _PatternEvaluator:
    """Complex field toward one fixed angle, updated per cluster."""

    def __init__(self, geometry: Geometry, psi: float):
        self.ef = fixed_field(geometry, psi)
        self.e = element_field_vector(geometry, psi)
        self.k = geometry.gain_constant

    def gain(self, rim_sum):
        z = self.ef + rim_sum
        return self.k * (z.real * z.real + z.imag * z.imag)


def _initial_indices(settings: AnnealSettings, n: int, clusters, rng):
    alphabet = settings.alphabet
    if settings.init == "provided":
        w = settings.initial
        if isinstance(w, WeightVector) and w.indices is not None and w.alphabet == alphabet:
            idx = np.asarray(w.indices, dtype=np.int64).copy()
        else:
            idx = alphabet.nearest(getattr(w, "values", w)).astype(np.int64)
        if idx.size != n:
            raise ValueError("initial weights have the wrong length")
        return idx
    idx = np.empty(n, dtype=np.int64)
    draws = rng.integers(0, alphabet.m_levels, size=len(clusters))
    for c, v in zip(clusters, draws):
        idx[c] = v
    return idx


def anneal_closed_loop(
    scenario: SignalScenario,
    geometry: Geometry,
    settings: AnnealSettings,
    noiseless: bool = False,
    measurement: str = "chisquare",
    angle_fn=None,
    noiseless_metric: str = "gain",
) -> AnnealResult:
    """Closed-loop simulated annealing on measured interference power.

    Each decision redraws one element (or one whole cluster) to a uniformly
    random alphabet value, measures Z on fresh samples and accepts when
    ``dE = E_best - E_tmp >= 0`` or ``u < exp(dE / T(k))``.  ``E_best`` is the
    last accepted measurement, exactly as tabulated, so a lucky low reading
    makes later acceptances harder.  With ``noiseless`` the measurement is the
    true linear gain, or with ``noiseless_metric="power"`` the noise-free
    received power G INR + 1 (the N -> infinity limit of Z).  The two differ
    only in how the fixed temperature schedule scales against the cost.
    ``settings.reference="remeasure"`` compares against a fresh measurement
    of the current weights instead of the last accepted reading.

    ``angle_fn(k)`` optionally supplies ``(fixed_field, element_vector)`` for
    decision ``k``; it is how moving sources are simulated.
    """
    n = geometry.n_elements
    alphabet = settings.alphabet
    values = alphabet.values
    m = alphabet.m_levels
    clusters = cluster_partition(geometry, settings.cluster_size)
    owner = np.empty(n, dtype=np.int64)
    for ci, c in enumerate(clusters):
        owner[c] = ci
    rng_prop, rng_sig = _streams(settings.seed)
    idx = _initial_indices(settings, n, clusters, rng_prop)
    total = settings.decisions or settings.schedule_length
    inr = scenario.inr
    nsamp = scenario.samples_per_decision
    kgain = geometry.gain_constant

    if angle_fn is None:
        ev = _PatternEvaluator(geometry, scenario.interferer_angle_rad)
        e_static = ev.e
        ef_static = ev.ef
        psi_static = scenario.interferer_angle_rad
    else:
        e_static = None

    def field_at(k):
        if e_static is not None:
            return ef_static, e_static, psi_static
        return angle_fn(k)

    ef, e, psi = field_at(0)
    cluster_sum = np.array([np.dot(e[c], values[idx[c]]) for c in clusters])
    rim = complex(cluster_sum.sum())

    def gain_of(ef_, rim_):
        z = ef_ + rim_
        return kgain * (z.real * z.real + z.imag * z.imag)

    _check_metric(noiseless_metric)

    def observe(g):
        if noiseless:
            return g if noiseless_metric == "gain" else g * inr + 1.0
        return measure(g, inr, nsamp, rng_sig, measurement)

    g_now = gain_of(ef, rim)
    e_best = observe(g_now)

    index = np.arange(total + 1)
    accepted = np.zeros(total + 1, dtype=bool)
    measured = np.empty(total + 1)
    gains = np.empty(total + 1)
    angles = np.empty(total + 1)
    measured[0], gains[0], angles[0] = e_best, g_now, psi

    csel = rng_prop.integers(0, len(clusters), size=total)
    vsel = rng_prop.integers(0, m, size=total)
    usel = rng_prop.random(total)
    temps = settings.temperature(np.arange(total))
    moving = e_static is None
    remeasure = settings.reference == "remeasure"

    for k in range(total):
        if moving:
            ef, e, psi = field_at(k + 1)
            # per-cluster sums follow the angle; recompute lazily from idx
            cluster_sum = None
            rim = complex(np.dot(e, values[idx]))
        ci = csel[k]
        members = clusters[ci]
        v = values[vsel[k]]
        if cluster_sum is not None:
            old = cluster_sum[ci]
            new = v * complex(e[members].sum()) if members.size > 1 else v * e[members[0]]
        else:
            old = complex(np.dot(e[members], values[idx[members]]))
            new = v * complex(e[members].sum())
        rim_tmp = rim - old + new
        g_tmp = gain_of(ef, rim_tmp)
        if remeasure and not noiseless:
            e_best = observe(gain_of(ef, rim))
        e_tmp = observe(g_tmp)
        d = e_best - e_tmp
        if d >= 0 or usel[k] < math.exp(min(0.0, d / temps[k])):
            idx[members] = vsel[k]
            rim = rim_tmp
            if cluster_sum is not None:
                cluster_sum[ci] = new
            e_best = e_tmp
            g_now = g_tmp
            accepted[k + 1] = True
        else:
            g_now = gain_of(ef, rim)
        measured[k + 1] = e_tmp
        gains[k + 1] = g_now
        angles[k + 1] = psi

    trace = ClosedLoopTrace(
        index, accepted, measured, to_dbi(gains), angles, index * scenario.decision_interval_s
    )
    return AnnealResult(trace, WeightVector.from_indices(idx, alphabet))


# --- ensembles of binary solutions ------------------------------------------

@dataclass
class EnsembleStats:
    means: np.ndarray
    mean_hamming: float
    alphabet: PhaseAlphabet


def _binary_signs(w: WeightVector) -> np.ndarray:
    if w.alphabet is None or w.alphabet.m_levels != 2:
        raise ValueError("ensemble statistics need binary quantized weights")
    return np.where(w.indices == 1, 1.0, -1.0)


def ensemble_weight_stats(runs) -> EnsembleStats:
    """Per-element mean of the +/-1 values and mean pairwise normalized Hamming distance."""
    runs = list(runs)
    if len(runs) < 2:
        raise ValueError("need at least two runs")
    s = np.array([_binary_signs(w) for w in runs])
    r, n = s.shape
    means = s.mean(axis=0)
    # pairwise disagreement from per-element counts of +1
    plus = (s > 0).sum(axis=0).astype(float)
    disagree = np.sum(plus * (r - plus))
    mean_hamming = float(disagree / (n * r * (r - 1) / 2))
    return EnsembleStats(means, mean_hamming, runs[0].alphabet)


def sample_from_ensemble(stats: EnsembleStats, seed: int = 0) -> WeightVector:
    """Independent per-element draw with P(+1) = (1 + mean) / 2."""
    rng = np.random.default_rng(seed)
    p_plus = (1.0 + stats.means) / 2.0
    idx = np.where(rng.random(p_plus.size) < p_plus, 1, 0)
    return WeightVector.from_indices(idx, PhaseAlphabet(2))


# --- moving source ---------------------------------------------------------

class AngleTable:
    """Fixed field and element vectors on a fine angle grid, linearly interpolated."""

    def __init__(self, geometry: Geometry, start_rad: float, stop_rad: float, step_rad: float = math.radians(0.002)):
        lo, hi = sorted((start_rad, stop_rad))
        count = int(math.ceil((hi - lo) / step_rad)) + 1
        self.grid = lo + step_rad * np.arange(count)
        self.step = step_rad
        self.ef = np.array([fixed_field(geometry, p) for p in self.grid])
        self.e = np.array([element_field_vector(geometry, p) for p in self.grid])

    def __call__(self, psi: float):
        x = (psi - self.grid[0]) / self.step
        i = int(min(max(math.floor(x), 0), self.grid.size - 2))
        f = min(max(x - i, 0.0), 1.0)
        ef = (1 - f) * self.ef[i] + f * self.ef[i + 1]
        e = (1 - f) * self.e[i] + f * self.e[i + 1]
        return ef, e


def track_moving_source(
    scenario: SignalScenario,
    geometry: Geometry,
    settings: AnnealSettings,
    stop_angle_rad: float | None = None,
    table: AngleTable | None = None,
    noiseless: bool = False,
    noiseless_metric: str = "gain",
) -> AnnealResult:
    """Anneal while the interferer moves linearly; records gain toward the current angle.

    The run length is ``settings.decisions`` (or the number of decisions the
    source needs to reach ``stop_angle_rad``).
    """
    if scenario.angular_velocity_deg_s == 0:
        return anneal_closed_loop(scenario, geometry, settings, noiseless=noiseless, noiseless_metric=noiseless_metric)
    rate = math.radians(scenario.angular_velocity_deg_s) * scenario.decision_interval_s
    if settings.decisions is None and stop_angle_rad is not None:
        total = int(math.ceil(abs(stop_angle_rad - scenario.interferer_angle_rad) / abs(rate)))
        settings = AnnealSettings(**{**settings.__dict__, "decisions": total})
    total = settings.decisions or settings.schedule_length
    end = scenario.interferer_angle_rad + rate * total
    if table is None:
        table = AngleTable(geometry, scenario.interferer_angle_rad, end)
    return _anneal_moving(scenario, geometry, settings, table, noiseless, noiseless_metric)


def _anneal_moving(scenario, geometry, settings, table, noiseless, noiseless_metric="gain"):
    """Per-element annealing with an interpolated, slowly moving look angle.

    The rim sum is kept at the two bracketing grid angles and updated in O(1)
    per accepted move; it is recomputed only when the source crosses a grid
    point.
    """
    n = geometry.n_elements
    alphabet = settings.alphabet
    values = alphabet.values
    m = alphabet.m_levels
    clusters = cluster_partition(geometry, settings.cluster_size)
    rng_prop, rng_sig = _streams(settings.seed)
    idx = _initial_indices(settings, n, clusters, rng_prop)
    total = settings.decisions or settings.schedule_length
    inr, nsamp = scenario.inr, scenario.samples_per_decision
    kgain = geometry.gain_constant
    grid, step = table.grid, table.step

    def locate(psi):
        x = (psi - grid[0]) / step
        i = int(min(max(math.floor(x), 0), grid.size - 2))
        return i, min(max(x - i, 0.0), 1.0)

    w = values[idx]
    seg, frac = locate(scenario.interferer_angle_rad)
    lo_sum = complex(table.e[seg] @ w)
    hi_sum = complex(table.e[seg + 1] @ w)

    def field(seg_, frac_, lo_, hi_):
        ef = (1 - frac_) * table.ef[seg_] + frac_ * table.ef[seg_ + 1]
        z = ef + (1 - frac_) * lo_ + frac_ * hi_
        return kgain * (z.real * z.real + z.imag * z.imag)

    _check_metric(noiseless_metric)

    def observe(g):
        if noiseless:
            return g if noiseless_metric == "gain" else g * inr + 1.0
        return (g * inr + 1.0) * rng_sig.chisquare(nsamp) / nsamp

    g_now = field(seg, frac, lo_sum, hi_sum)
    e_best = observe(g_now)
    index = np.arange(total + 1)
    accepted = np.zeros(total + 1, dtype=bool)
    measured = np.empty(total + 1)
    gains = np.empty(total + 1)
    angles = scenario.angle_at(index)
    measured[0], gains[0] = e_best, g_now

    csel = rng_prop.integers(0, len(clusters), size=total)
    vsel = rng_prop.integers(0, m, size=total)
    usel = rng_prop.random(total)
    temps = settings.temperature(np.arange(total))
    single = settings.cluster_size == 1
    remeasure = settings.reference == "remeasure"
    e_lo, e_hi = table.e[seg], table.e[seg + 1]

    for k in range(total):
        new_seg, frac = locate(angles[k + 1])
        if new_seg != seg:
            seg = new_seg
            e_lo, e_hi = table.e[seg], table.e[seg + 1]
            lo_sum = complex(e_lo @ w)
            hi_sum = complex(e_hi @ w)
        v = values[vsel[k]]
        if single:
            j = clusters[csel[k]][0]
            dv = v - w[j]
            d_lo = e_lo[j] * dv
            d_hi = e_hi[j] * dv
        else:
            members = clusters[csel[k]]
            dv = v - w[members]
            d_lo = complex(e_lo[members] @ dv)
            d_hi = complex(e_hi[members] @ dv)
        g_tmp = field(seg, frac, lo_sum + d_lo, hi_sum + d_hi)
        if remeasure:
            e_best = observe(field(seg, frac, lo_sum, hi_sum))
        e_tmp = observe(g_tmp)
        d = e_best - e_tmp
        if d >= 0 or usel[k] < math.exp(min(0.0, d / temps[k])):
            if single:
                w[j] = v
                idx[j] = vsel[k]
            else:
                w[members] = v
                idx[members] = vsel[k]
            lo_sum += d_lo
            hi_sum += d_hi
            e_best = e_tmp
            g_now = g_tmp
            accepted[k + 1] = True
        else:
            g_now = field(seg, frac, lo_sum, hi_sum)
        measured[k + 1] = e_tmp
        gains[k + 1] = g_now

    trace = ClosedLoopTrace(index, accepted, measured, to_dbi(gains), angles, index * scenario.decision_interval_s)
    return AnnealResult(trace, WeightVector.from_indices(idx, alphabet))


# --- library approach ------------------------------------------------------

def build_library(angle_grid, optimizer, geometry: Geometry) -> WeightLibrary:
    """Calibrate one weight vector per null angle with ``optimizer(geometry, psi)``.

    An optimizer exception at one angle flags that entry (weights all ones)
    rather than aborting the whole library.
    """
    angles = np.asarray(angle_grid, dtype=float)
    if angles.size == 0:
        raise ValueError("empty angle grid")
    order = np.argsort(angles)
    angles = angles[order]
    weights, flags = [], []
    for psi in angles:
        try:
            w = optimizer(geometry, float(psi))
            weights.append(w if isinstance(w, WeightVector) else WeightVector(np.asarray(w)))
            flags.append("ok")
        except Exception as exc:  # noqa: BLE001 - recorded per entry
            weights.append(WeightVector.ones(geometry.n_elements))
            flags.append(f"failed: {exc}")
    return WeightLibrary(angles, weights, flags)


def library_kernel(width: float, size: int) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric geometric distribution over nonzero index offsets."""
    if width <= 0:
        raise ValueError("kernel width must be > 0")
    offsets = np.concatenate([-np.arange(size - 1, 0, -1), np.arange(1, size)])
    p = np.exp(-np.abs(offsets) / width)
    return offsets, p / p.sum()


def track_with_library(
    scenario: SignalScenario,
    geometry: Geometry,
    library: WeightLibrary,
    kernel_width: float = 3.0,
    decisions: int | None = None,
    stop_angle_rad: float | None = None,
    start_index: int | None = None,
    schedule_length: int | None = None,
    reference: str = "last-accepted",
) -> ClosedLoopTrace:
    """Annealing over library indices with a locality-biased proposal kernel.

    Each decision applies a proposed entry and measures its power; the
    comparison reference follows ``reference`` as in :class:`AnnealSettings`.
    """
    if reference not in ("last-accepted", "remeasure"):
        raise ValueError(f"unknown reference {reference!r}")
    if len(library) == 0:
        raise ValueError("empty library")
    rate = math.radians(scenario.angular_velocity_deg_s) * scenario.decision_interval_s
    if decisions is None:
        if stop_angle_rad is None or rate == 0:
            raise ValueError("give decisions or a stop angle with a moving source")
        decisions = int(math.ceil(abs(stop_angle_rad - scenario.interferer_angle_rad) / abs(rate)))
    index = np.arange(decisions + 1)
    angles = scenario.angle_at(index)
    lo, hi = float(angles.min()), float(angles.max())
    table = AngleTable(geometry, lo, hi + 1e-9) if hi > lo else None
    w = np.array([wv.values for wv in library.weights])
    if table is None:
        ef = fixed_field(geometry, lo)
        gain_grid = None
        static = geometry.gain_constant * np.abs(ef + w @ element_field_vector(geometry, lo)) ** 2
    else:
        # gain of every library entry at every grid angle; interpolate the field
        fields = table.ef[:, None] + table.e @ w.T
        static = None

    def gains_at(psi):
        if static is not None:
            return static
        x = (psi - table.grid[0]) / table.step
        i = int(min(max(math.floor(x), 0), table.grid.size - 2))
        f = min(max(x - i, 0.0), 1.0)
        z = (1 - f) * fields[i] + f * fields[i + 1]
        return geometry.gain_constant * (z.real**2 + z.imag**2)

    size = len(library)
    rng_prop, rng_sig = _streams(scenario.seed)
    offsets, probs = library_kernel(kernel_width, max(size, 2))
    temps_len = schedule_length or decisions
    if start_index is None:
        start_index = int(np.argmin(np.abs(library.angles_rad - angles[0])))
    cur = start_index
    inr, nsamp = scenario.inr, scenario.samples_per_decision

    g = gains_at(angles[0])
    e_best = (g[cur] * inr + 1.0) * rng_sig.chisquare(nsamp) / nsamp
    accepted = np.zeros(decisions + 1, dtype=bool)
    measured = np.empty(decisions + 1)
    true_g = np.empty(decisions + 1)
    measured[0], true_g[0] = e_best, g[cur]
    steps = rng_prop.choice(offsets, size=decisions, p=probs) if size > 1 else np.zeros(decisions, dtype=int)
    usel = rng_prop.random(decisions)
    for k in range(decisions):
        g = gains_at(angles[k + 1])
        prop = cur + int(steps[k])
        if prop < 0 or prop >= size:
            prop = cur
        if reference == "remeasure":
            e_best = (g[cur] * inr + 1.0) * rng_sig.chisquare(nsamp) / nsamp
        z = (g[prop] * inr + 1.0) * rng_sig.chisquare(nsamp) / nsamp
        d = e_best - z
        temp = 1.0 / (min(k, temps_len - 1) + 1.0)
        if d >= 0 or usel[k] < math.exp(min(0.0, d / temp)):
            cur = prop
            e_best = z
            accepted[k + 1] = True
        measured[k + 1] = z
        true_g[k + 1] = g[cur]
    return ClosedLoopTrace(index, accepted, measured, to_dbi(true_g), angles, index * scenario.decision_interval_s)
