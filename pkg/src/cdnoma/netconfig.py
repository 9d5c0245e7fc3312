"""Network parameters, link geometry and UE drops.

All dB/linear conversions live here; everything downstream works in
linear scale. Angles are radians internally and degrees in config files.

The multicell layout is a fixed 2x2 grid of square cells with the BS at
each cell center and no wrap-around. Cell ``j`` occupies grid position
``(j % 2, j // 2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Any

import numpy as np
import yaml

BS_HEIGHT = 25.0
UE_HEIGHT = 1.5
MIN_DISTANCE = 10.0
SHADOW_STD_DB = 10.0

DROP_TYPES = ("uniform-cell", "sector", "circle-clusters")


class ConfigError(ValueError):
    """Raised for inconsistent network or scenario parameters."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def db2lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def lin2db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def dbm2watt(x):
    return db2lin(x) / 1000.0


@dataclass
class NetworkConfig:
    """Network-wide parameters.

    Powers are in watts. ``p_ul`` and ``rho_dl`` are ``(L, K)`` arrays;
    scalars passed at construction are broadcast.
    """

    L: int = 4
    M: int = 64
    K: int = 16
    N: int = 1
    tau_c: int = 200
    tau_p: int = 16
    tau_u: int = 92
    tau_d: int = 92
    p_ul: Any = 0.1
    rho_dl: Any = 0.1
    sigma2_ul: float = float(dbm2watt(-94.0))
    sigma2_dl: float = float(dbm2watt(-94.0))
    cell_side: float = 250.0

    def __post_init__(self):
        self.p_ul = np.broadcast_to(np.asarray(self.p_ul, dtype=float), (self.L, self.K)).copy()
        self.rho_dl = np.broadcast_to(np.asarray(self.rho_dl, dtype=float), (self.L, self.K)).copy()
        problems = self.problems()
        if problems:
            raise ConfigError(problems)

    def problems(self) -> list[str]:
        out = []
        for name in ("L", "M", "K", "N", "tau_p"):
            if int(getattr(self, name)) < 1:
                out.append(f"{name} must be >= 1")
        for name in ("tau_u", "tau_d"):
            if int(getattr(self, name)) < 0:
                out.append(f"{name} must be >= 0")
        if self.tau_c != self.tau_p + self.tau_u + self.tau_d:
            out.append(
                f"tau_c={self.tau_c} != tau_p + tau_u + tau_d = "
                f"{self.tau_p + self.tau_u + self.tau_d}"
            )
        if np.any(self.p_ul <= 0) or np.any(self.rho_dl <= 0):
            out.append("transmit powers must be strictly positive")
        if self.sigma2_ul <= 0 or self.sigma2_dl <= 0:
            out.append("noise powers must be strictly positive")
        if self.cell_side <= 0:
            out.append("cell_side must be positive")
        return out

    @property
    def is_square_array(self) -> bool:
        r = math.isqrt(self.M)
        return r * r == self.M

    def replace(self, **changes) -> "NetworkConfig":
        d = self.to_dict()
        if "K" in changes or "L" in changes:
            # per-UE power arrays no longer fit the new shape
            d["p_ul"] = float(self.p_ul.flat[0])
            d["rho_dl"] = float(self.rho_dl.flat[0])
        d.update(changes)
        return NetworkConfig(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["p_ul"] = self.p_ul.copy()
        d["rho_dl"] = self.rho_dl.copy()
        return d


@dataclass(frozen=True)
class LinkGeometry:
    """Geometry of one UE-to-BS link."""

    distance: float
    shadow_db: float = 0.0
    azimuth: float = 0.0
    elevation: float = 0.0
    delta: float = math.radians(2.0)

    def __post_init__(self):
        if not self.distance > 0:
            raise ValueError(f"distance must be positive, got {self.distance}")
        if self.delta < 0:
            raise ValueError(f"angular spread must be >= 0, got {self.delta}")


@dataclass
class Scenario:
    """How UEs are dropped in every cell.

    ``sector``: uniform over a circular sector of ``radius`` and opening
    ``2 * half_angle`` centered at ``center_azimuth`` (drawn uniformly per
    cell when ``None``). ``circle-clusters``: ``clusters`` discs of radius
    ``cluster_radius`` placed at random inside the cell, ``K / clusters``
    UEs uniformly in each disc. UE indices are cluster-major. Explicit
    ``positions`` (per cell, complex metres relative to the BS) override
    the drop type; ``shadowing=False`` zeroes the shadow fading.
    """

    drop: str = "uniform-cell"
    half_angle: float = math.radians(15.0)
    radius: float = 100.0
    center_azimuth: float | None = None
    clusters: int = 4
    cluster_radius: float = 20.0
    positions: list = field(default_factory=list)
    shadowing: bool = True

    def problems(self, K: int, cell_side: float) -> list[str]:
        out = []
        if self.drop not in DROP_TYPES:
            out.append(f"unknown drop type {self.drop!r}; expected one of {DROP_TYPES}")
        if self.drop == "circle-clusters":
            if self.clusters < 1 or K % self.clusters:
                out.append(f"K={K} is not divisible by clusters={self.clusters}")
            if 2 * (self.cluster_radius + MIN_DISTANCE) > cell_side:
                out.append("cluster radius too large for the cell")
        if self.drop == "sector":
            if self.radius <= MIN_DISTANCE or self.radius > cell_side / 2:
                out.append(f"sector radius must lie in ({MIN_DISTANCE}, {cell_side / 2}]")
            if not 0 < self.half_angle <= math.pi:
                out.append("sector half-angle must lie in (0, pi]")
        return out


def large_scale_fading(geometry: LinkGeometry) -> float:
    """Average channel gain (linear) of a link.

    ``-148.1 - 37.6 log10(d / 1 km) + F`` dB.
    """
    if not geometry.distance > 0:
        raise ValueError("distance must be positive")
    db = -148.1 - 37.6 * math.log10(geometry.distance / 1000.0) + geometry.shadow_db
    return 10.0 ** (db / 10.0)


def pathloss_db(distance):
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    return -148.1 - 37.6 * np.log10(d / 1000.0)


def elevation_angle(distance):
    """Elevation (rad) seen from a 25 m BS toward a 1.5 m UE at horizontal ``distance``."""
    return np.arctan2(BS_HEIGHT - UE_HEIGHT, np.asarray(distance, dtype=float))


def bs_positions(L: int, cell_side: float) -> np.ndarray:
    """BS coordinates as complex numbers ``x + jy``, one per cell."""
    cols = int(math.ceil(math.sqrt(L)))
    idx = np.arange(L)
    x = (idx % cols + 0.5) * cell_side
    y = (idx // cols + 0.5) * cell_side
    return x + 1j * y


def _uniform_in_square(rng, n, half):
    pos = np.empty(n, dtype=complex)
    filled = 0
    while filled < n:
        cand = rng.uniform(-half, half, n) + 1j * rng.uniform(-half, half, n)
        cand = cand[np.abs(cand) >= MIN_DISTANCE]
        take = min(n - filled, cand.size)
        pos[filled:filled + take] = cand[:take]
        filled += take
    return pos


def _uniform_in_sector(rng, n, radius, center, half_angle):
    # area-uniform radius on [MIN_DISTANCE, radius]
    u = rng.uniform(MIN_DISTANCE**2, radius**2, n)
    r = np.sqrt(u)
    ang = center + rng.uniform(-half_angle, half_angle, n)
    return r * np.exp(1j * ang)


def _uniform_in_disc(rng, n, radius):
    r = radius * np.sqrt(rng.uniform(0.0, 1.0, n))
    return r * np.exp(1j * rng.uniform(0.0, 2 * np.pi, n))


def _cluster_positions(rng, K, scenario, half):
    per = K // scenario.clusters
    rc = scenario.cluster_radius
    out = []
    for _ in range(scenario.clusters):
        while True:
            c = rng.uniform(-half + rc, half - rc) + 1j * rng.uniform(-half + rc, half - rc)
            if abs(c) >= MIN_DISTANCE + rc:
                break
        pts = np.empty(per, dtype=complex)
        filled = 0
        while filled < per:
            cand = c + _uniform_in_disc(rng, per, rc)
            cand = cand[np.abs(cand) >= MIN_DISTANCE]
            take = min(per - filled, cand.size)
            pts[filled:filled + take] = cand[:take]
            filled += take
        out.append(pts)
    return np.concatenate(out)


@dataclass
class Drop:
    """One realization of UE positions with the derived link geometry.

    Arrays are indexed ``[j, l, k]`` for the link between UE ``k`` of cell
    ``l`` and BS ``j``.
    """

    positions: np.ndarray  # (L, K) complex, absolute coordinates
    distance: np.ndarray
    shadow_db: np.ndarray
    azimuth: np.ndarray
    elevation: np.ndarray
    delta: float

    @property
    def beta(self) -> np.ndarray:
        return db2lin(pathloss_db(self.distance) + self.shadow_db)

    def geometry(self, j: int, l: int, k: int) -> LinkGeometry:
        return LinkGeometry(
            distance=float(self.distance[j, l, k]),
            shadow_db=float(self.shadow_db[j, l, k]),
            azimuth=float(self.azimuth[j, l, k]),
            elevation=float(self.elevation[j, l, k]),
            delta=self.delta,
        )

    def geometries(self) -> list:
        """Nested ``[j][l][k]`` lists of :class:`LinkGeometry`."""
        L, _, K = self.distance.shape
        return [[[self.geometry(j, l, k) for k in range(K)] for l in range(L)] for j in range(L)]


def drop_ues(config: NetworkConfig, scenario: Scenario, rng_seed=None, *,
             delta: float = math.radians(2.0)) -> Drop:
    """Drop ``K`` UEs in every cell and derive all link geometries.

    Shadow fading is i.i.d. ``N(0, 10^2)`` dB per link. The result is a
    deterministic function of ``rng_seed`` (an int, SeedSequence or
    Generator).
    """
    problems = scenario.problems(config.K, config.cell_side)
    if problems:
        raise ConfigError(problems)
    rng = np.random.default_rng(rng_seed)
    L, K = config.L, config.K
    half = config.cell_side / 2
    bs = bs_positions(L, config.cell_side)

    rel = np.empty((L, K), dtype=complex)
    for l in range(L):
        if scenario.positions:
            rel[l] = np.asarray(scenario.positions[l], dtype=complex)
        elif scenario.drop == "uniform-cell":
            rel[l] = _uniform_in_square(rng, K, half)
        elif scenario.drop == "sector":
            center = scenario.center_azimuth
            if center is None:
                center = rng.uniform(-np.pi, np.pi)
            rel[l] = _uniform_in_sector(rng, K, scenario.radius, center, scenario.half_angle)
        else:
            rel[l] = _cluster_positions(rng, K, scenario, half)
    positions = rel + bs[:, None]

    diff = positions[None, :, :] - bs[:, None, None]
    distance = np.maximum(np.abs(diff), MIN_DISTANCE)
    azimuth = np.angle(diff)
    elevation = elevation_angle(distance)
    shadow = rng.normal(0.0, SHADOW_STD_DB, size=distance.shape)
    if not scenario.shadowing:
        shadow[:] = 0.0
    return Drop(positions, distance, shadow, azimuth, elevation, float(delta))


# ---------------------------------------------------------------- config IO

_ANGLE_KEYS = {"half_angle", "center_azimuth", "delta", "azimuth_spread", "elevation_spread"}
_POWER_DBM_KEYS = {"p_ul_dbm": "p_ul", "rho_dl_dbm": "rho_dl",
                   "sigma2_ul_dbm": "sigma2_ul", "sigma2_dl_dbm": "sigma2_dl"}


def network_from_dict(d: dict) -> NetworkConfig:
    """Build a :class:`NetworkConfig` from a plain mapping.

    Powers may be given in watts under their field names or in dBm with a
    ``_dbm`` suffix (``p_ul_dbm: 20``).
    """
    d = dict(d)
    for key, target in _POWER_DBM_KEYS.items():
        if key in d:
            d[target] = float(dbm2watt(d.pop(key)))
    known = set(NetworkConfig.__dataclass_fields__)
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown network keys: {sorted(unknown)}")
    return NetworkConfig(**d)


def scenario_from_dict(d: dict) -> Scenario:
    """Build a :class:`Scenario`; angles in the mapping are in degrees."""
    d = dict(d)
    for key in list(d):
        if key in _ANGLE_KEYS and d[key] is not None:
            d[key] = math.radians(float(d[key]))
    known = set(Scenario.__dataclass_fields__)
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
    return Scenario(**d)


def load_config(path) -> dict:
    """Read a YAML config file into a dict (see README for the schema)."""
    with open(Path(path)) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data
