"""System configuration, near-field geometry, steering vectors and channels.

Antenna indices follow the centered convention ``n = -N/2+1, ..., N/2`` so
that element ``n = 0`` sits at the array reference point. Angles are handled
as directional cosines ``theta0 in [-1, 1]`` throughout; there is no
trigonometric conversion layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

#: Speed of light used to derive the wavelength. The rounded value reproduces
#: the reference constants (r_min = 12.29 m at 512 antennas / 50 GHz).
SPEED_OF_LIGHT = 3e8
#: CODATA value, available through ``SystemConfig(c=SPEED_OF_LIGHT_EXACT)``.
SPEED_OF_LIGHT_EXACT = 299_792_458.0

SteeringMode = Literal["exact", "taylor"]


@dataclass(frozen=True)
class SystemConfig:
    """Uniform linear array at the base station.

    Parameters
    ----------
    n_bs : int
        Number of antennas; even and at least 2.
    f_c : float
        Carrier frequency in Hz.
    d : float, optional
        Element spacing in meters, half a wavelength when omitted.
    r_min_override : float, optional
        Minimum serving distance replacing the Fresnel lower bound.
    c : float
        Propagation speed in m/s.
    """

    n_bs: int
    f_c: float
    d: float | None = None
    r_min_override: float | None = None
    c: float = SPEED_OF_LIGHT

    def __post_init__(self) -> None:
        if int(self.n_bs) != self.n_bs or self.n_bs < 2 or self.n_bs % 2:
            raise ValueError(f"n_bs must be an even integer >= 2, got {self.n_bs!r}")
        if not self.f_c > 0:
            raise ValueError(f"f_c must be positive, got {self.f_c!r}")
        if self.d is not None and not self.d > 0:
            raise ValueError(f"antenna spacing must be positive, got {self.d!r}")
        if self.r_min_override is not None and not self.r_min_override > 0:
            raise ValueError(
                f"r_min_override must be positive, got {self.r_min_override!r}")

    @property
    def wavelength(self) -> float:
        return self.c / self.f_c

    @property
    def spacing(self) -> float:
        return self.wavelength / 2 if self.d is None else self.d

    @property
    def aperture(self) -> float:
        """Physical array length ``d * (N - 1)``."""
        return self.spacing * (self.n_bs - 1)

    @property
    def effective_aperture(self) -> float:
        """Aperture ``d * N`` used by the Fresnel/Rayleigh closed forms."""
        return self.spacing * self.n_bs

    @property
    def indices(self) -> NDArray[np.int64]:
        return np.arange(-self.n_bs // 2 + 1, self.n_bs // 2 + 1)

    @property
    def r_min(self) -> float:
        """Minimum serving distance: the override when set, else the Fresnel bound."""
        if self.r_min_override is not None:
            return float(self.r_min_override)
        return fresnel_min_distance(self)

    @property
    def k_min(self) -> float:
        return 0.0

    @property
    def k_max(self) -> float:
        return self.wavelength / (4.0 * self.r_min)


@dataclass(frozen=True)
class UserGeometry:
    """Distance ``r0`` (m) and directional cosine ``theta0`` seen from the array center.

    ``r0 = inf`` denotes a far-field (plane-wave) source.
    """

    r0: float
    theta0: float

    def __post_init__(self) -> None:
        if not self.r0 > 0:
            raise ValueError(f"r0 must be positive, got {self.r0!r}")
        if not abs(self.theta0) <= 1:
            raise ValueError(f"theta0 must lie in [-1, 1], got {self.theta0!r}")

    @property
    def is_far_field(self) -> bool:
        return math.isinf(self.r0)


@dataclass(frozen=True)
class KbPoint:
    """A point in the slope-intercept domain."""

    k: float
    b: float

    def __iter__(self):
        yield self.k
        yield self.b


def fresnel_min_distance(cfg: SystemConfig) -> float:
    """Fresnel-region lower bound ``0.5 * sqrt(D^3 / lambda)``."""
    D = cfg.effective_aperture
    return 0.5 * math.sqrt(D**3 / cfg.wavelength)


def rayleigh_distance(cfg: SystemConfig) -> float:
    """Rayleigh distance ``2 D^2 / lambda``."""
    return 2.0 * cfg.effective_aperture**2 / cfg.wavelength


def _path_difference(cfg: SystemConfig, n: ArrayLike, geo: UserGeometry) -> NDArray[np.float64]:
    # r_n - r0 without cancellation: (r_n^2 - r0^2) / (r_n + r0)
    x = np.asarray(n, dtype=float) * cfg.spacing
    r0, th = geo.r0, geo.theta0
    num = x * (x + 2.0 * r0 * th)
    return num / (np.sqrt(r0**2 + num) + r0)


def exact_distance(cfg: SystemConfig, n: ArrayLike, geo: UserGeometry) -> NDArray[np.float64] | float:
    """Cosine-rule distance from antenna ``n`` to the user.

    The cross term enters with a plus sign, ``r0^2 + (nd)^2 + 2 r0 nd theta0``.
    """
    out = geo.r0 + _path_difference(cfg, n, geo)
    return float(out) if np.ndim(out) == 0 else out


def taylor_distance(cfg: SystemConfig, n: ArrayLike, geo: UserGeometry) -> NDArray[np.float64] | float:
    """Second-order (Fresnel) approximation of :func:`exact_distance`."""
    x = np.asarray(n, dtype=float) * cfg.spacing
    th = geo.theta0
    out = geo.r0 + th * x + (1.0 - th**2) / (2.0 * geo.r0) * x**2
    return float(out) if np.ndim(out) == 0 else out


def params_to_kb(cfg: SystemConfig, geo: UserGeometry) -> KbPoint:
    """Map (r0, theta0) to slope ``lambda (1 - theta0^2) / (4 r0)`` and intercept ``theta0``."""
    if not geo.r0 > 0:
        raise ValueError("r0 must be positive")
    k = cfg.wavelength * (1.0 - geo.theta0**2) / (4.0 * geo.r0)
    return KbPoint(k=float(k), b=float(geo.theta0))


def kb_to_params(cfg: SystemConfig, p: KbPoint) -> UserGeometry:
    """Inverse of :func:`params_to_kb`.

    ``k = 0`` maps to a far-field geometry with ``r0 = inf``.
    """
    if p.k < 0:
        raise ValueError(f"slope must be non-negative, got {p.k!r}")
    if p.k == 0:
        return UserGeometry(r0=math.inf, theta0=p.b)
    if abs(p.b) >= 1:
        raise ValueError(
            f"intercept |b| = 1 with k > 0 implies r0 = 0 (endfire); got b={p.b!r}")
    return UserGeometry(r0=cfg.wavelength * (1.0 - p.b**2) / (4.0 * p.k), theta0=p.b)


def nearfield_steering(cfg: SystemConfig, geo: UserGeometry,
                       mode: SteeringMode = "exact") -> NDArray[np.complex128]:
    """Unit-modulus array response toward ``geo``.

    ``exact`` uses ``exp(-j 2 pi r_n / lambda)`` with the cosine-rule distance.
    ``taylor`` uses the chirp form ``exp(-j pi (theta0 n + k n^2))`` and drops
    the phase common to all elements.
    """
    if mode not in ("exact", "taylor"):
        raise ValueError(f"unknown steering mode {mode!r}")
    n = cfg.indices.astype(float)
    u = 2.0 * cfg.spacing / cfg.wavelength  # spacing in half-wavelengths
    if geo.is_far_field:
        return np.exp(-1j * np.pi * geo.theta0 * u * n)
    if mode == "taylor":
        k = params_to_kb(cfg, geo).k
        return np.exp(-1j * np.pi * (geo.theta0 * u * n + k * (u * n) ** 2))
    common = np.exp(-2j * np.pi * math.fmod(geo.r0 / cfg.wavelength, 1.0))
    return common * np.exp(-2j * np.pi * _path_difference(cfg, n, geo) / cfg.wavelength)


@dataclass(frozen=True)
class Scenario:
    """Random user/scatterer placement and path-power split.

    Ranges are closed intervals sampled uniformly; equal bounds pin the value.
    ``rho_db`` is the LoS-to-total-NLoS power ratio; ``inf`` gives pure LoS.
    """

    r0_range: tuple[float, float] = (13.0, 100.0)
    theta_range: tuple[float, float] = (-1.0, 1.0)
    rho_db: float = 10.0
    n_nlos: int = 3
    scatterer_r_range: tuple[float, float] | None = None
    scatterer_theta_range: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if self.n_nlos < 0:
            raise ValueError(f"n_nlos must be >= 0, got {self.n_nlos}")
        for name in ("r0_range", "theta_range", "scatterer_r_range", "scatterer_theta_range"):
            rng = getattr(self, name)
            if rng is not None and not rng[0] <= rng[1]:
                raise ValueError(f"{name} must satisfy lo <= hi, got {rng}")
        if not self.r0_range[0] > 0:
            raise ValueError("r0_range must be positive")
        if self.theta_range[0] < -1 or self.theta_range[1] > 1:
            raise ValueError("theta_range must lie within [-1, 1]")

    @property
    def rho(self) -> float:
        return 10.0 ** (self.rho_db / 10.0)


@dataclass(frozen=True, eq=False)
class Channel:
    """Multipath channel ``h = beta_los a_los + sum_l beta_l a_l``."""

    h: NDArray[np.complex128]
    los: UserGeometry
    los_gain: complex
    cfg: SystemConfig
    nlos: tuple[tuple[UserGeometry, complex], ...] = ()

    def reconstruct(self) -> NDArray[np.complex128]:
        return _superpose(self.cfg, self.los, self.los_gain, self.nlos)

    @property
    def power_ratio(self) -> float:
        """Measured LoS-to-NLoS power ratio (``inf`` without NLoS power)."""
        p_nlos = sum(abs(g) ** 2 for _, g in self.nlos)
        return math.inf if p_nlos == 0 else abs(self.los_gain) ** 2 / p_nlos

    @property
    def kb(self) -> KbPoint:
        """Slope-intercept coordinate of the LoS path."""
        return params_to_kb(self.cfg, self.los)


def _superpose(cfg, los, los_gain, nlos) -> NDArray[np.complex128]:
    h = los_gain * nearfield_steering(cfg, los, "exact")
    for geo, g in nlos:
        h = h + g * nearfield_steering(cfg, geo, "exact")
    return h


def free_space_gain(cfg: SystemConfig, r: float) -> complex:
    """Friis amplitude ``lambda / (4 pi r)`` with carrier phase ``exp(-j 2 pi r / lambda)``."""
    lam = cfg.wavelength
    return lam / (4 * math.pi * r) * complex(np.exp(-2j * np.pi * math.fmod(r / lam, 1.0)))


def make_channel(cfg: SystemConfig, los: UserGeometry, rho_db: float = math.inf,
                 nlos_geometries: tuple[UserGeometry, ...] = (),
                 nlos_raw_gains: ArrayLike | None = None) -> Channel:
    """Build a channel from explicit geometries.

    ``nlos_raw_gains`` are rescaled so the NLoS power totals ``|beta_los|^2 / rho``.
    """
    beta = free_space_gain(cfg, los.r0)
    nlos: tuple[tuple[UserGeometry, complex], ...] = ()
    if nlos_geometries:
        raw = (np.ones(len(nlos_geometries), complex) if nlos_raw_gains is None
               else np.asarray(nlos_raw_gains, dtype=complex))
        if math.isinf(rho_db) and rho_db > 0:
            scaled = np.zeros_like(raw)
        else:
            target = abs(beta) ** 2 / 10.0 ** (rho_db / 10.0)
            scaled = raw * math.sqrt(target / float(np.sum(np.abs(raw) ** 2)))
        nlos = tuple((g, complex(s)) for g, s in zip(nlos_geometries, scaled))
    h = _superpose(cfg, los, beta, nlos)
    return Channel(h=h, los=los, los_gain=beta, cfg=cfg, nlos=nlos)


def generate_channel(cfg: SystemConfig, scenario: Scenario, rng: np.random.Generator) -> Channel:
    """Draw a random channel instance for ``scenario``.

    The LoS path uses free-space gain at the user's distance. NLoS gains are
    complex Gaussian draws rescaled to the configured power ratio; scatterers
    reuse the user distributions unless their own ranges are given.
    """
    r_lo, r_hi = scenario.r0_range
    t_lo, t_hi = scenario.theta_range
    los = UserGeometry(r0=float(rng.uniform(r_lo, r_hi)), theta0=float(rng.uniform(t_lo, t_hi)))
    sr = scenario.scatterer_r_range or scenario.r0_range
    st = scenario.scatterer_theta_range or scenario.theta_range
    geos = tuple(
        UserGeometry(r0=float(rng.uniform(*sr)), theta0=float(rng.uniform(*st)))
        for _ in range(scenario.n_nlos)
    )
    raw = (rng.standard_normal(scenario.n_nlos) + 1j * rng.standard_normal(scenario.n_nlos)) / math.sqrt(2)
    return make_channel(cfg, los, scenario.rho_db, geos, raw)
