"""Open-loop weight synthesis from known pattern quantities.

Every constraint row says ``field_vector @ w == target``.  A null at psi has
target ``-E_f(psi)``; the main-lobe row has target ``kappa = delta * E_f(0)``.
The residual minimized by gradient projection is therefore ``A w - t``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import FieldBundle, Geometry, element_field_vector, fixed_field
from .weights import WeightVector

log = logging.getLogger(__name__)

DEFAULT_DELTA = 0.03


class RankDeficientError(ValueError):
    def __init__(self, rows, labels):
        self.rows = list(rows)
        names = ", ".join(f"{r} ({labels[r]})" for r in self.rows)
        super().__init__(f"constraint Gram matrix is singular; dependent rows: {names}")


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    matrix: np.ndarray
    targets: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.matrix, dtype=complex))
        t = np.atleast_1d(np.asarray(self.targets, dtype=complex))
        if a.shape[0] != t.size:
            raise ValueError("one target per constraint row")
        labels = tuple(self.labels) or tuple(f"row{i}" for i in range(t.size))
        if len(labels) != t.size:
            raise ValueError("one label per constraint row")
        if sum(1 for s in labels if s == "mainlobe") > 1:
            raise ValueError("at most one mainlobe row")
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "targets", t)
        object.__setattr__(self, "labels", labels)

    @property
    def n_rows(self) -> int:
        return self.targets.size

    @property
    def n_elements(self) -> int:
        return self.matrix.shape[1]

    @property
    def rows(self):
        return list(zip(self.matrix, self.targets))

    def residual(self, w) -> np.ndarray:
        return self.matrix @ np.asarray(getattr(w, "values", w)) - self.targets

    def cost(self, w) -> float:
        r = self.residual(w)
        return float(np.real(np.vdot(r, r)))

    @classmethod
    def from_bundle(cls, bundle: FieldBundle) -> "ConstraintSet":
        return cls(bundle.element_vector[None, :], [-bundle.fixed_field], (f"null@{bundle.psi_rad:.6g}",))


@dataclass
class GpSettings:
    step_fraction_gamma: float = 0.9
    max_iterations: int = 5000
    residual_tolerance: float = 1e-10
    init: str = "least-squares-phase"
    initial: np.ndarray | None = None
    seed: int = 0
    absolute_tolerance: float = 1e-13
    stall_window: int = 10

    def __post_init__(self):
        if not 0 < self.step_fraction_gamma < 1:
            raise ValueError("step_fraction_gamma must lie in (0, 1)")
        if not self.residual_tolerance > 0:
            raise ValueError("residual_tolerance must be > 0")
        if self.init not in ("least-squares-phase", "provided", "random"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.init == "provided" and self.initial is None:
            raise ValueError("init='provided' needs an initial weight vector")


@dataclass
class GpResult:
    weights: WeightVector
    cost_trace: np.ndarray
    converged: bool
    iterations: int
    step_size: float
    init_used: str = "least-squares-phase"

    @property
    def cost(self) -> float:
        return float(self.cost_trace[-1])


def optimal_weights_single(bundle: FieldBundle) -> WeightVector:
    """Minimum-norm weights that cancel the fixed field at one angle."""
    e = np.asarray(bundle.element_vector)
    norm2 = float(np.real(np.vdot(e, e)))
    if norm2 == 0.0:
        raise ValueError("element field vector is identically zero")
    return WeightVector(-bundle.fixed_field * np.conj(e) / norm2, "unconstrained")


def _dependent_rows(a, tol):
    dependent, basis = [], []
    for i, row in enumerate(a):
        if basis:
            q = np.array(basis)
            row = row - (row @ q.conj().T) @ q
        nrm = np.linalg.norm(row)
        if nrm <= tol * max(1.0, np.linalg.norm(a[i])):
            dependent.append(i)
        else:
            basis.append(row / nrm)
    return dependent


def optimal_weights_multi(constraints: ConstraintSet, rcond: float = 1e-10) -> WeightVector:
    """Minimum-norm solution of ``A w = t``: w = A^H (A A^H)^{-1} t."""
    a, t = constraints.matrix, constraints.targets
    if a.shape[0] > a.shape[1]:
        raise ValueError("more constraints than elements")
    gram = a @ a.conj().T
    s = np.linalg.svd(gram, compute_uv=False)
    if s[-1] <= rcond * s[0]:
        raise RankDeficientError(_dependent_rows(a, 1e-8), constraints.labels)
    return WeightVector(a.conj().T @ np.linalg.solve(gram, t), "unconstrained")


def project_unit_modulus(x) -> np.ndarray:
    """Phase-only projection; exact zeros map to 1 + 0j."""
    x = np.asarray(x, dtype=complex)
    mag = np.abs(x)
    out = np.ones_like(x)
    nz = mag > 0
    out[nz] = x[nz] / mag[nz]
    return out


def max_eigenvalue(a: np.ndarray, iterations: int = 50, tol: float = 1e-6, seed: int = 0) -> float:
    """Largest eigenvalue of A^H A by power iteration with matrix-vector products."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(a.shape[1]) + 1j * rng.standard_normal(a.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iterations):
        u = a.conj().T @ (a @ v)
        new = float(np.real(np.vdot(v, u)))
        nrm = np.linalg.norm(u)
        if nrm == 0:
            return 0.0
        v = u / nrm
        if abs(new - lam) <= tol * abs(new):
            lam = new
            break
        lam = new
    # Rayleigh quotient underestimates; one more product bounds it from above
    return max(lam, float(np.linalg.norm(a.conj().T @ (a @ v))))


def gp_solve(constraints: ConstraintSet, settings: GpSettings | None = None) -> GpResult:
    """Unit-modulus least squares by gradient projection.

    Iterates ``eta = w - alpha A^H (A w - t)`` followed by the phase
    projection, with ``alpha = gamma / lambda_max(A^H A)``.  The returned
    weights are the best iterate seen.
    """
    settings = settings or GpSettings()
    a, t = constraints.matrix, constraints.targets
    lam = max_eigenvalue(a)
    if lam <= 0:
        raise ValueError("constraint matrix is zero")
    alpha = settings.step_fraction_gamma / lam

    init_used = settings.init
    if settings.init == "provided":
        w = project_unit_modulus(getattr(settings.initial, "values", settings.initial))
    elif settings.init == "random":
        rng = np.random.default_rng(settings.seed)
        w = np.exp(2j * np.pi * rng.random(a.shape[1]))
    else:
        gram = a @ a.conj().T
        w = project_unit_modulus(a.conj().T @ np.linalg.lstsq(gram, t, rcond=None)[0])
        # With one row this start aligns every term of e.w with the target, so
        # it overshoots whenever sum|e_n| > |t| and the gradient stays parallel
        # to w: projection cannot leave it.  Break the symmetry instead.
        if a.shape[0] == 1 and np.sum(np.abs(a[0])) > abs(t[0]):
            log.debug("least-squares phase start is stationary; using seeded random phases")
            init_used = "random"
            w = np.exp(2j * np.pi * np.random.default_rng(settings.seed).random(a.shape[1]))
    if w.size != a.shape[1]:
        raise ValueError("initial weights have the wrong length")

    scale = float(np.real(np.vdot(t, t))) or 1.0
    r = a @ w - t
    cost = float(np.real(np.vdot(r, r)))
    trace = [cost]
    best_w, best_cost = w, cost
    stall = 0
    converged = cost <= settings.absolute_tolerance**2 * scale
    k = 0
    while not converged and k < settings.max_iterations:
        w = project_unit_modulus(w - alpha * (a.conj().T @ r))
        r = a @ w - t
        new = float(np.real(np.vdot(r, r)))
        trace.append(new)
        k += 1
        if new < best_cost:
            best_w, best_cost = w, new
        if new <= settings.absolute_tolerance**2 * scale:
            converged = True
            break
        rel = abs(cost - new) / max(cost, np.finfo(float).tiny)
        stall = stall + 1 if rel < settings.residual_tolerance else 0
        if stall >= settings.stall_window:
            converged = True
        cost = new
    if not converged:
        log.info("gradient projection stopped at max_iterations=%d, cost %.3e", k, best_cost)
    return GpResult(WeightVector(best_w, "unit-modulus"), np.array(trace), converged, k, alpha, init_used)


def build_constraints(
    geometry: Geometry,
    angles,
    mainlobe: float | None = None,
    frequencies=None,
) -> ConstraintSet:
    """Null rows for every (angle, frequency) plus an optional main-lobe row.

    ``mainlobe`` is the fraction delta in kappa = delta * E_f(0), evaluated at
    the geometry's own frequency.
    """
    angles = [float(a) for a in np.atleast_1d(angles)] if angles is not None else []
    if not angles:
        raise ValueError("at least one null angle is required")
    if mainlobe is not None:
        hpbw = 0.6 * geometry.config.wavelength_m / geometry.config.diameter_m
        inside = [a for a in angles if abs(a) < hpbw]
        if inside:
            raise ValueError(f"null angles {inside} fall inside the main beam")
    freqs = [geometry.config.frequency_hz] if frequencies is None else list(frequencies)
    rows, targets, labels = [], [], []
    if mainlobe is not None:
        rows.append(element_field_vector(geometry, 0.0))
        targets.append(mainlobe * fixed_field(geometry, 0.0))
        labels.append("mainlobe")
    for f in freqs:
        g = geometry if f == geometry.config.frequency_hz else geometry.retune(f)
        for psi in angles:
            rows.append(element_field_vector(g, psi))
            targets.append(-fixed_field(g, psi))
            labels.append(f"null@{np.degrees(psi):.4f}deg,{f:.6g}Hz")
    return ConstraintSet(np.array(rows), np.array(targets), tuple(labels))
