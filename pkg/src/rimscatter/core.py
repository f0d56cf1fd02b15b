"""Physical-optics model of a prime-focus paraboloid with a reconfigurable rim.

Coordinates put the feed at the focus (the origin) with the reflector
opening toward +z.  A surface point at feed angle ``theta`` (measured from the
-z axis toward the rim) and azimuth ``phi`` sits at

    s = r(theta) * (sin theta cos phi, sin theta sin phi, -cos theta),
    r(theta) = 2F / (1 + cos theta).

Pattern cuts are taken in the phi = 90 deg plane, so the far-field direction
for an angle ``psi`` off boresight is (0, sin psi, cos psi).  The common
far-field factor -j*omega*mu0*exp(-j*beta*R)/(4*pi*R) and the free-space
impedance are dropped from every stored field; :func:`gain_normalization`
restores absolute directive gain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from functools import cached_property

import numpy as np
from scipy import integrate, optimize

C0 = 299_792_458.0


def calibrate_rim_angle(feed_taper_q: float, edge_illumination_db: float = -11.0) -> float:
    """Solve for the rim angle giving the requested edge illumination.

    Edge illumination is the feed's far-field intensity toward the rim
    relative to that toward the vertex, taken in the pattern-cut plane
    (phi = 90 deg, where the dipole contributes its own cos(theta) factor).
    Spherical spreading to the rim is not included, so the closed form is
    cos(theta0)**(q + 1) and the solve is a root find on that.
    """
    if edge_illumination_db >= 0:
        raise ValueError("edge illumination must be negative (dB)")

    def excess(theta0):
        return edge_illumination_db_at(theta0, feed_taper_q) - edge_illumination_db

    return optimize.brentq(excess, 1e-6, math.pi / 2 - 1e-9, xtol=1e-14)


def edge_illumination_db_at(theta0: float, feed_taper_q: float) -> float:
    return 20.0 * (feed_taper_q + 1.0) * math.log10(math.cos(theta0))


@dataclass(frozen=True)
class DishConfig:
    """Reflector, feed, rim annulus and operating frequency.

    ``rim_width_m`` is measured along the reflector surface (arc length from
    the rim inward).  ``subtended_half_angle_rad`` defaults to the rim angle
    that gives -11 dB edge illumination for the configured feed taper.
    """

    diameter_m: float = 18.0
    rim_width_m: float = 0.5
    frequency_hz: float = 1.5e9
    feed_taper_q: float = 1.14
    subtended_half_angle_rad: float | None = None
    fixed_mesh_density: float = 8.0
    element_side_wavelengths: float = 0.5
    feed_amplitude: float = 1.0
    edge_illumination_db: float = -11.0

    def __post_init__(self):
        if self.subtended_half_angle_rad is None:
            theta0 = calibrate_rim_angle(self.feed_taper_q, self.edge_illumination_db)
            object.__setattr__(self, "subtended_half_angle_rad", theta0)
        self.validate()

    def validate(self) -> None:
        problems = []
        if not self.diameter_m > 0:
            problems.append("diameter_m must be > 0")
        if not 0 < self.rim_width_m < self.diameter_m / 2:
            problems.append("rim_width_m must lie in (0, diameter_m/2)")
        if not self.frequency_hz > 0:
            problems.append("frequency_hz must be > 0")
        if not self.feed_taper_q >= 0:
            problems.append("feed_taper_q must be >= 0")
        if not 0 < self.subtended_half_angle_rad < math.pi / 2:
            problems.append("subtended_half_angle_rad must lie in (0, pi/2)")
        if not self.fixed_mesh_density > 0:
            problems.append("fixed_mesh_density must be > 0")
        if not self.element_side_wavelengths > 0:
            problems.append("element_side_wavelengths must be > 0")
        if problems:
            raise ValueError("invalid DishConfig: " + "; ".join(problems))

    @property
    def wavelength_m(self) -> float:
        return C0 / self.frequency_hz

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength_m

    @property
    def focal_length_m(self) -> float:
        return self.diameter_m / (4.0 * math.tan(self.subtended_half_angle_rad / 2.0))

    def with_(self, **changes) -> "DishConfig":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class RimElement:
    index: int
    position_m: np.ndarray
    current: np.ndarray
    area_m2: float
    ring: int


@dataclass(frozen=True, eq=False)
class FieldBundle:
    psi_rad: float
    fixed_field: complex
    element_vector: np.ndarray


@dataclass(frozen=True, eq=False)
class PatternCut:
    angles_rad: np.ndarray
    copol_field: np.ndarray
    crosspol_field: np.ndarray
    gain_dbi: np.ndarray
    crosspol_dbi: np.ndarray


# --- paraboloid helpers --------------------------------------------------

def _radius(theta, focal):
    return 2.0 * focal / (1.0 + np.cos(theta))


def _theta_from_rho(rho, focal):
    return 2.0 * np.arctan(rho / (2.0 * focal))


def _arc_from_vertex(rho, focal):
    # arc length along z = rho^2/(4F) from the vertex out to radius rho
    u = rho / (2.0 * focal)
    return focal * (u * np.sqrt(1.0 + u * u) + np.arcsinh(u))


def _rho_from_arc(arc, focal):
    return optimize.brentq(lambda r: _arc_from_vertex(r, focal) - arc, 0.0, 10.0 * focal + arc)


def _surface_points(theta, phi, focal):
    r = _radius(theta, focal)
    st = np.sin(theta)
    return np.stack([r * st * np.cos(phi), r * st * np.sin(phi), -r * np.cos(theta)], axis=-1)


def _feed_field(rhat, q):
    """Far field of the y-directed short dipole times (cos theta_f)^q, unit scale."""
    cos_tf = -rhat[..., 2]
    taper = np.where(cos_tf > 0, np.clip(cos_tf, 0.0, None) ** q, 0.0)
    ydot = rhat[..., 1]
    e = -ydot[..., None] * rhat
    e[..., 1] += 1.0
    return e * taper[..., None]


def _po_current(points, focal, beta, q, amplitude):
    """J0 = 2 n x H_inc with the 1/eta and 1/(4 pi) factors dropped.

    Includes the exp(-j beta r)/r propagation from the feed and a constant
    exp(+j 2 beta F) that references phase to the aperture plane.
    """
    r = np.linalg.norm(points, axis=-1)
    rhat = points / r[..., None]
    e_inc = amplitude * _feed_field(rhat, q)
    h_inc = np.cross(rhat, e_inc)
    zhat = np.array([0.0, 0.0, 1.0])
    n = zhat - rhat
    n /= np.linalg.norm(n, axis=-1)[..., None]
    j0 = 2.0 * np.cross(n, h_inc)
    phase = np.exp(-1j * beta * (r - 2.0 * focal)) / r
    return j0 * phase[..., None]


def feed_radiated_power(q: float, amplitude: float = 1.0) -> float:
    """Integral of |F|^2 over the sphere for the tapered dipole feed (numeric)."""

    def integrand(phi, theta):
        rhat = np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), -np.cos(theta)])
        f = _feed_field(rhat, q)
        return float(np.dot(f, f)) * np.sin(theta)

    val, _ = integrate.dblquad(integrand, 0.0, math.pi / 2, 0.0, 2.0 * math.pi, epsabs=1e-12, epsrel=1e-10)
    return amplitude**2 * val


def direction(psi):
    psi = np.asarray(psi, dtype=float)
    return np.stack([np.zeros_like(psi), np.sin(psi), np.cos(psi)], axis=-1)


# --- geometry ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Geometry:
    """Discretized reflector: fixed-surface quadrature mesh plus rim elements.

    Element positions, areas and the fixed mesh are physical and do not move
    when the geometry is retuned to another frequency; only beta and the
    induced currents change.
    """

    config: DishConfig
    positions: np.ndarray
    currents: np.ndarray
    areas: np.ndarray
    rings: np.ndarray
    mesh_positions: np.ndarray
    mesh_currents: np.ndarray
    mesh_areas: np.ndarray
    theta1: float
    tiling_frequency_hz: float

    @property
    def n_elements(self) -> int:
        return self.positions.shape[0]

    @property
    def beta(self) -> float:
        return self.config.wavenumber

    @property
    def elements(self) -> list[RimElement]:
        return [
            RimElement(i, self.positions[i], self.currents[i], float(self.areas[i]), int(self.rings[i]))
            for i in range(self.n_elements)
        ]

    @cached_property
    def gain_constant(self) -> float:
        return gain_normalization(self)

    def retune(self, frequency_hz: float) -> "Geometry":
        cfg = self.config.with_(frequency_hz=frequency_hz)
        focal = cfg.focal_length_m
        beta = cfg.wavenumber
        cur = _po_current(self.positions, focal, beta, cfg.feed_taper_q, cfg.feed_amplitude)
        mcur = _po_current(self.mesh_positions, focal, beta, cfg.feed_taper_q, cfg.feed_amplitude)
        return replace(self, config=cfg, currents=cur, mesh_currents=mcur)

    def permuted(self, order) -> "Geometry":
        order = np.asarray(order)
        return replace(
            self,
            positions=self.positions[order],
            currents=self.currents[order],
            areas=self.areas[order],
            rings=self.rings[order],
        )


def _tile_rim(cfg: DishConfig):
    focal = cfg.focal_length_m
    side = cfg.element_side_wavelengths * cfg.wavelength_m
    rho0 = cfg.diameter_m / 2.0
    arc0 = _arc_from_vertex(rho0, focal)
    n_rings = int(math.floor(cfg.rim_width_m / side + 1e-9))
    if n_rings < 1:
        raise ValueError(
            f"rim annulus ({cfg.rim_width_m} m) is narrower than one element side ({side:.4f} m)"
        )
    band = cfg.rim_width_m / n_rings
    arc1 = arc0 - cfg.rim_width_m
    if arc1 <= 0:
        raise ValueError("rim annulus covers the whole reflector")
    rho1 = _rho_from_arc(arc1, focal)

    pos, areas, rings = [], [], []
    for k in range(n_rings):
        a_in = arc1 + k * band
        r_in = _rho_from_arc(a_in, focal)
        r_out = _rho_from_arc(a_in + band, focal)
        r_mid = _rho_from_arc(a_in + 0.5 * band, focal)
        count = int(math.floor(2.0 * math.pi * r_mid / side))
        band_area = _band_area(r_in, r_out, focal)
        phi = 2.0 * math.pi * (np.arange(count) + 0.5) / count
        theta = np.full(count, _theta_from_rho(r_mid, focal))
        pos.append(_surface_points(theta, phi, focal))
        areas.append(np.full(count, band_area / count))
        rings.append(np.full(count, k, dtype=int))
    return np.concatenate(pos), np.concatenate(areas), np.concatenate(rings), rho1


def _band_area(r_in, r_out, focal):
    # surface area of the paraboloid between projected radii r_in and r_out
    def f(r):
        return (2.0 * math.pi / 3.0) * (4.0 * focal * focal) * ((1.0 + (r / (2.0 * focal)) ** 2) ** 1.5)

    return f(r_out) - f(r_in)


def _fixed_mesh(cfg: DishConfig, rho_max: float):
    """Midpoint rings in projected radius, midpoint azimuths per ring."""
    focal = cfg.focal_length_m
    h = cfg.wavelength_m / cfg.fixed_mesh_density
    n_rho = max(1, int(math.ceil(rho_max / h)))
    d_rho = rho_max / n_rho
    pts, areas = [], []
    for i in range(n_rho):
        rho = (i + 0.5) * d_rho
        n_phi = max(8, int(math.ceil(2.0 * math.pi * rho / h)))
        phi = 2.0 * math.pi * (np.arange(n_phi) + 0.5) / n_phi
        theta = np.full(n_phi, _theta_from_rho(rho, focal))
        pts.append(_surface_points(theta, phi, focal))
        da = math.sqrt(1.0 + (rho / (2.0 * focal)) ** 2) * rho * d_rho * (2.0 * math.pi / n_phi)
        areas.append(np.full(n_phi, da))
    return np.concatenate(pts), np.concatenate(areas)


def build_geometry(config: DishConfig) -> Geometry:
    """Tile the rim and mesh the fixed surface; deterministic in ``config``."""
    config.validate()
    positions, areas, rings, rho1 = _tile_rim(config)
    focal = config.focal_length_m
    beta = config.wavenumber
    q = config.feed_taper_q
    currents = _po_current(positions, focal, beta, q, config.feed_amplitude)
    mesh_pos, mesh_areas = _fixed_mesh(config, rho1)
    mesh_cur = _po_current(mesh_pos, focal, beta, q, config.feed_amplitude)
    return Geometry(
        config=config,
        positions=positions,
        currents=currents,
        areas=areas,
        rings=rings,
        mesh_positions=mesh_pos,
        mesh_currents=mesh_cur,
        mesh_areas=mesh_areas,
        theta1=float(_theta_from_rho(rho1, focal)),
        tiling_frequency_hz=config.frequency_hz,
    )


# --- field evaluation ----------------------------------------------------

def _radiate(positions, currents, areas, beta, psi, component):
    rhat = direction(psi)
    phase = np.exp(1j * beta * (positions @ rhat))
    return currents[:, component] * phase * areas


def fixed_field(geometry: Geometry, psi: float, component: int = 1) -> complex:
    """Co-pol (y) or cross-pol (x, ``component=0``) field of the fixed surface."""
    g = geometry
    return complex(np.sum(_radiate(g.mesh_positions, g.mesh_currents, g.mesh_areas, g.beta, psi, component)))


def element_field_vector(geometry: Geometry, psi: float, component: int = 1) -> np.ndarray:
    g = geometry
    return _radiate(g.positions, g.currents, g.areas, g.beta, psi, component)


def field_bundle(geometry: Geometry, psi: float) -> FieldBundle:
    return FieldBundle(float(psi), fixed_field(geometry, psi), element_field_vector(geometry, psi))


def full_dish_field(geometry: Geometry, psi: float, density: float | None = None) -> complex:
    """Co-pol field of the undivided dish from one quadrature over 0..theta0."""
    cfg = geometry.config
    if density is not None:
        cfg = cfg.with_(fixed_mesh_density=density)
    pts, areas = _fixed_mesh(cfg.with_(frequency_hz=geometry.tiling_frequency_hz), cfg.diameter_m / 2.0)
    cur = _po_current(pts, cfg.focal_length_m, geometry.beta, cfg.feed_taper_q, cfg.feed_amplitude)
    return complex(np.sum(_radiate(pts, cur, areas, geometry.beta, psi, 1)))


def gain_normalization(geometry: Geometry) -> float:
    """Constant k with directive gain G(psi) = k |E(psi)|^2 for stored fields.

    G = 4 pi U / P_rad reduces to beta^2 |I|^2 / (4 pi P) once the common
    factors are cancelled, P being the feed's integrated |F|^2.
    """
    cfg = geometry.config
    p_rad = feed_radiated_power(cfg.feed_taper_q, cfg.feed_amplitude)
    return geometry.beta**2 / (4.0 * math.pi * p_rad)


def to_dbi(gain_linear):
    g = np.asarray(gain_linear, dtype=float)
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(g)


def gain_dbi(geometry: Geometry, field) -> np.ndarray:
    return to_dbi(geometry.gain_constant * np.abs(np.asarray(field)) ** 2)


def total_pattern(geometry: Geometry, w, angles) -> PatternCut:
    w = np.asarray(w, dtype=complex)
    if w.shape != (geometry.n_elements,):
        raise ValueError(f"weight vector has length {w.size}, geometry has {geometry.n_elements} elements")
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    co = np.empty(angles.size, dtype=complex)
    cx = np.empty(angles.size, dtype=complex)
    for i, psi in enumerate(angles):
        co[i] = fixed_field(geometry, psi, 1) + element_field_vector(geometry, psi, 1) @ w
        cx[i] = fixed_field(geometry, psi, 0) + element_field_vector(geometry, psi, 0) @ w
    return PatternCut(angles, co, cx, gain_dbi(geometry, co), gain_dbi(geometry, cx))


def aperture_efficiency(geometry: Geometry) -> float:
    ones = np.ones(geometry.n_elements)
    e0 = fixed_field(geometry, 0.0) + element_field_vector(geometry, 0.0) @ ones
    g = geometry.gain_constant * abs(e0) ** 2
    ideal = (math.pi * geometry.config.diameter_m / geometry.config.wavelength_m) ** 2
    return g / ideal
