"""Equations of motion for the two-body, CR3BP and Uranus aerocapture problems.

Every right-hand side is written against the elementary functions in
:mod:`dstt_kit.jets`, so it evaluates on plain floats and on Taylor jets alike.
All right-hand sides work in nondimensional units; each model carries the
affine map between its dimensional and nondimensional states.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import jets as J

DEG = math.pi / 180.0

# Uranus (planet only, not system) gravitational parameter, IAU 1 bar
# equatorial radius, sidereal rotation 17.24 h, and J2 at that radius.
URANUS_MU = 5_793_951.3  # km^3/s^2
URANUS_RADIUS = 25_559.0  # km
URANUS_OMEGA = 2.0 * math.pi / (17.24 * 3600.0)  # rad/s
URANUS_J2 = 3.51068e-3

EARTH_MU = 398_600.4418  # km^3/s^2
EARTH_RADIUS = 6378.137  # km

EARTH_MOON_LU = 384_400.0  # km
EARTH_MOON_TU = 375_190.25  # s


class DomainError(ValueError):
    """Raised when a state lies outside the valid domain of a model."""


@dataclass(frozen=True)
class TwoBodyParams:
    mu: float = EARTH_MU
    length_unit: float = EARTH_RADIUS

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("mu must be positive")


@dataclass(frozen=True)
class Cr3bpParams:
    mu_star: float = 1.0 / (81.30059 + 1.0)
    length_unit: float = EARTH_MOON_LU
    time_unit: float = EARTH_MOON_TU

    def __post_init__(self):
        if not 0.0 <= self.mu_star < 0.5:
            raise ValueError("mu_star must lie in [0, 1/2)")


@dataclass(frozen=True)
class AerocaptureParams:
    """Vehicle, planet and atmosphere constants (dimensional)."""

    lift_to_drag: float = 0.25
    ballistic_coeff: float = 145.0  # kg/m^2
    bank_angle: float = 78.0  # deg
    omega_planet: float = URANUS_OMEGA  # rad/s
    radius_planet: float = URANUS_RADIUS  # km
    mu_planet: float = URANUS_MU  # km^3/s^2
    j2: float = URANUS_J2
    rho0: float = 6.40e-3  # kg/m^3
    h0: float = 0.0  # km
    scale_height: float = 54.72  # km
    mref_over_Rp3: float = 20.0  # kg/m^3

    def __post_init__(self):
        if self.scale_height <= 0 or self.rho0 <= 0 or self.ballistic_coeff <= 0:
            raise ValueError("scale_height, rho0 and ballistic_coeff must be positive")

    @property
    def g0(self) -> float:
        """Surface gravity, km/s^2."""
        return self.mu_planet / self.radius_planet**2

    @property
    def time_unit(self) -> float:
        return math.sqrt(self.radius_planet / self.g0)

    @property
    def velocity_unit(self) -> float:
        return math.sqrt(self.g0 * self.radius_planet)

    @property
    def drag_constant(self) -> float:
        """Nondimensional drag is ``0.5 * drag_constant * rho* * V*^2``."""
        return self.mref_over_Rp3 * self.radius_planet * 1e3 / self.ballistic_coeff

    def as_dict(self) -> dict:
        return asdict(self)


def eval_two_body(x, mu: float | TwoBodyParams = 1.0):
    """Two-body rates; canonical units (``mu = 1``) unless a parameter is given."""
    mu = getattr(mu, "mu", mu)
    rx, ry, rz, vx, vy, vz = x
    r2 = rx * rx + ry * ry + rz * rz
    if J.value_of(r2) <= 0.0:
        raise DomainError("two-body dynamics are singular at r = 0")
    k = -mu * J.power(r2, -1.5)
    return [vx, vy, vz, k * rx, k * ry, k * rz]


def cr3bp_potential_gradient(x, y, z, mu_star: float):
    r1 = J.power((x + mu_star) ** 2 + y * y + z * z, -1.5)
    a = (1.0 - mu_star) * r1
    ux = x - a * (x + mu_star)
    uy = y - a * y
    uz = -a * z
    if mu_star > 0.0:
        # a massless secondary contributes nothing, even at its own location
        b = mu_star * J.power((x - 1.0 + mu_star) ** 2 + y * y + z * z, -1.5)
        ux = ux - b * (x - 1.0 + mu_star)
        uy = uy - b * y
        uz = uz - b * z
    return ux, uy, uz


def eval_cr3bp(x, p: Cr3bpParams):
    """Synodic-frame CR3BP rates, standard Coriolis signs."""
    px, py, pz, vx, vy, vz = x
    mu = p.mu_star
    d1 = J.value_of((px + mu) ** 2 + py * py + pz * pz)
    d2 = J.value_of((px - 1.0 + mu) ** 2 + py * py + pz * pz)
    if d1 <= 0.0 or (mu > 0 and d2 <= 0.0):
        raise DomainError("CR3BP state coincides with a primary")
    ux, uy, uz = cr3bp_potential_gradient(px, py, pz, mu)
    return [vx, vy, vz, 2.0 * vy + ux, -2.0 * vx + uy, uz]


def jacobi_constant(x, p: Cr3bpParams) -> float:
    px, py, pz, vx, vy, vz = np.asarray(x, dtype=float)
    mu = p.mu_star
    r1 = math.sqrt((px + mu) ** 2 + py**2 + pz**2)
    r2 = math.sqrt((px - 1 + mu) ** 2 + py**2 + pz**2)
    u = (1 - mu) / r1 + (mu / r2 if mu > 0 else 0.0) + 0.5 * (px**2 + py**2)
    return 2 * u - (vx**2 + vy**2 + vz**2)


def eval_aerocapture(x, p: AerocaptureParams):
    """Nondimensional 3DOF atmospheric flight rates over a rotating oblate planet.

    State is ``[r, theta, phi, V, gamma, psi, ln rho]`` with ``r`` in planet
    radii, angles in radians, ``V`` in units of ``sqrt(g0 Rp)`` and ``rho``
    normalized by ``mref/Rp^3``. ``phi`` is the angle whose cosine divides the
    ``theta`` rate (it plays the latitude role in the rate equations).
    """
    r, theta, phi, V, gamma, psi, lnrho = x
    if J.value_of(r) <= 1.0:
        raise DomainError("vehicle is below the planet surface")
    if J.value_of(V) <= 0.0:
        raise DomainError("planet-relative speed must be positive")
    if abs(J.value_of(gamma)) >= math.pi / 2:
        raise DomainError("flight path angle must satisfy |gamma| < 90 deg")

    omega = p.omega_planet * p.time_unit
    H = p.scale_height / p.radius_planet
    sig = p.bank_angle * DEG

    sg, cg = J.sin(gamma), J.cos(gamma)
    sf, cf = J.sin(phi), J.cos(phi)
    sp, cp = J.sin(psi), J.cos(psi)
    tf = J.tan(phi)
    tg = J.tan(gamma)
    inv_r = 1.0 / r
    inv_V = 1.0 / V
    inv_cg = 1.0 / cg
    inv_cf = 1.0 / cf

    rho = J.exp(lnrho)
    D = 0.5 * p.drag_constant * rho * V * V
    L = p.lift_to_drag * D

    inv_r2 = inv_r * inv_r
    g_r = inv_r2 * (1.0 + 1.5 * p.j2 * inv_r2 * (1.0 - 3.0 * sf * sf))
    g_phi = 3.0 * p.j2 * inv_r2 * inv_r2 * sf * cf

    r_dot = V * sg
    theta_dot = V * cg * sp * inv_r * inv_cf
    phi_dot = V * cg * cp * inv_r
    V_dot = (
        -D
        - g_r * sg
        - g_phi * cg * cp
        + omega**2 * r * cf * (sg * cf - cg * sf * cp)
    )
    gamma_dot = inv_V * (
        L * math.cos(sig)
        + (V * V * inv_r - g_r) * cg
        + g_phi * sg * cp
        + 2.0 * omega * V * cf * sp
        + omega**2 * r * cf * (cg * cf + sg * cp * sf)
    )
    psi_dot = inv_V * (
        L * math.sin(sig) * inv_cg
        + V * V * inv_r * cg * sp * tf
        + g_phi * sp * inv_cg
        - 2.0 * omega * V * (tg * cp * cf - sf)
        + omega**2 * r * inv_cg * sp * sf * cf
    )
    lnrho_dot = -V * sg / H
    return [r_dot, theta_dot, phi_dot, V_dot, gamma_dot, psi_dot, lnrho_dot]


def aerocapture_energy(x, p: AerocaptureParams) -> float:
    """Rotating-frame energy integral, conserved when lift and drag vanish."""
    r, _, phi, V, *_ = np.asarray(x, dtype=float)
    omega = p.omega_planet * p.time_unit
    p2 = 0.5 * (3.0 * math.sin(phi) ** 2 - 1.0)
    potential = -1.0 / r + p.j2 * p2 / r**3
    return 0.5 * V**2 + potential - 0.5 * omega**2 * r**2 * math.cos(phi) ** 2


@dataclass(frozen=True)
class Model:
    """A dynamics model plus its dimensional/nondimensional state map.

    ``nondim = (dim - offset) / scale`` componentwise.
    """

    name: str
    params: object
    scale: np.ndarray = field(repr=False)
    offset: np.ndarray = field(repr=False)
    time_unit: float = 1.0
    # user-supplied rates ``f(x) -> list`` (jet-compatible); overrides the named models
    func: object = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return len(self.scale)

    def rhs(self, x):
        if self.func is not None:
            return self.func(x)
        if self.name == "two_body":
            return eval_two_body(x)
        if self.name == "cr3bp":
            return eval_cr3bp(x, self.params)
        return eval_aerocapture(x, self.params)

    def __call__(self, t, x) -> np.ndarray:
        return np.array(self.rhs(list(x)), dtype=float)

    def nondimensionalize(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.offset) / self.scale

    def dimensionalize(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) * self.scale + self.offset

    def nondimensionalize_cov(self, P) -> np.ndarray:
        s = 1.0 / self.scale
        return np.asarray(P, dtype=float) * np.outer(s, s)

    def dimensionalize_cov(self, P) -> np.ndarray:
        return np.asarray(P, dtype=float) * np.outer(self.scale, self.scale)

    def check_domain(self, x) -> None:
        self.rhs(list(np.asarray(x, dtype=float)))


def two_body_model(params: TwoBodyParams | None = None) -> Model:
    p = params or TwoBodyParams()
    lu = p.length_unit
    tu = math.sqrt(lu**3 / p.mu)
    vu = lu / tu
    return Model("two_body", p, np.array([lu, lu, lu, vu, vu, vu]), np.zeros(6), tu)


def cr3bp_model(params: Cr3bpParams | None = None) -> Model:
    p = params or Cr3bpParams()
    lu, tu = p.length_unit, p.time_unit
    vu = lu / tu
    return Model("cr3bp", p, np.array([lu, lu, lu, vu, vu, vu]), np.zeros(6), tu)


def aerocapture_model(params: AerocaptureParams | None = None) -> Model:
    """Dimensional state: ``[r km, theta deg, phi deg, V km/s, gamma deg, psi deg, ln rho]``."""
    p = params or AerocaptureParams()
    scale = np.array([p.radius_planet, 1 / DEG, 1 / DEG, p.velocity_unit, 1 / DEG, 1 / DEG, 1.0])
    offset = np.zeros(7)
    offset[6] = math.log(p.mref_over_Rp3)
    return Model("aerocapture", p, scale, offset, p.time_unit)


def custom_model(func, n: int, name: str = "custom") -> Model:
    """Wrap jet-compatible rates ``func(x) -> sequence`` of an ``n``-state system (already nondimensional)."""
    return Model(name, None, np.ones(n), np.zeros(n), 1.0, func)


def make_model(name: str, params: dict | None = None) -> Model:
    params = dict(params or {})
    if name == "two_body":
        return two_body_model(TwoBodyParams(**params))
    if name == "cr3bp":
        return cr3bp_model(Cr3bpParams(**params))
    if name == "aerocapture":
        return aerocapture_model(AerocaptureParams(**params))
    raise KeyError(f"unknown model {name!r}")


def inertial_to_relative(x_dim, p: AerocaptureParams) -> np.ndarray:
    """Convert a dimensional aerocapture state with inertial ``V, gamma, psi`` to planet-relative."""
    x = np.array(x_dim, dtype=float)
    r, _, phi, V, gamma, psi = x[0], x[1], x[2] * DEG, x[3], x[4] * DEG, x[5] * DEG
    # local up / east / north components; heading measured from north toward east
    up = V * math.sin(gamma)
    east = V * math.cos(gamma) * math.sin(psi) - p.omega_planet * r * math.cos(phi)
    north = V * math.cos(gamma) * math.cos(psi)
    horiz = math.hypot(east, north)
    x[3] = math.sqrt(up**2 + horiz**2)
    x[4] = math.atan2(up, horiz) / DEG
    x[5] = math.atan2(east, north) / DEG
    return x


def collinear_point(mu_star: float, which: int = 1) -> float:
    """x-coordinate of the L1/L2/L3 equilibrium from the collinear force balance."""
    from scipy.optimize import brentq

    def fx(x):
        r1 = x + mu_star
        r2 = x - 1 + mu_star
        return x - (1 - mu_star) * r1 / abs(r1) ** 3 - mu_star * r2 / abs(r2) ** 3

    eps = 1e-9
    if which == 1:
        return brentq(fx, -mu_star + eps, 1 - mu_star - eps, xtol=1e-15)
    if which == 2:
        return brentq(fx, 1 - mu_star + eps, 2.0, xtol=1e-15)
    return brentq(fx, -2.0, -mu_star - eps, xtol=1e-15)
