"""Synthetic single-layer laser scanner by 2D ray casting.

The scan plane is horizontal at the mounting height; only obstacle segments at
least that tall can reflect.  Scanners pitched towards the road are modeled by
``ground_distance``: the line where the tilted scan plane meets the road,
``ground_distance`` meters ahead of the scanner and orthogonal to its yaw.
Rays reaching that line before any obstacle report the road hit.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dmcp import ConfigError, ConfigurationSet
from .dsl.geometry import Pose, Segment
from .serialization import Container, Int32, message, pack

SCAN_TYPE = 100
_PARALLEL_EPS = 1e-12


@functools.lru_cache(maxsize=64)
def _ray_angles(fov: float, resolution: float, count: int) -> np.ndarray:
    a = np.radians(-fov / 2 + resolution * np.arange(count))
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ScannerMount:
    x: float = 0.0  # vehicle frame, m (forward)
    y: float = 0.0  # vehicle frame, m (left)
    height: float = 0.5
    yaw: float = 0.0  # rad, vehicle frame
    fov: float = 180.0  # deg
    resolution: float = 1.0  # deg
    max_range: float = 80.0
    ground_distance: float | None = None

    def __post_init__(self):
        if not 0 < self.fov <= 360:
            raise ValueError(f"fov must be in (0, 360], got {self.fov}")
        if not 0 < self.resolution <= self.fov:
            raise ValueError(f"resolution must be in (0, fov], got {self.resolution}")
        if not self.max_range > 0:
            raise ValueError(f"max range must be > 0, got {self.max_range}")
        if self.ground_distance is not None and not self.ground_distance > 0:
            raise ValueError("ground distance must be > 0")

    @property
    def reading_count(self) -> int:
        return math.floor(self.fov / self.resolution + 1e-9) + 1

    def angles(self) -> np.ndarray:
        """Ray angles in the scanner frame, radians, ascending from -fov/2 (read-only)."""
        return _ray_angles(self.fov, self.resolution, self.reading_count)

    def origin(self, pose: Pose) -> tuple[float, float, float]:
        """Scanner position and boresight direction in the world frame."""
        c, s = math.cos(pose.heading), math.sin(pose.heading)
        return (pose.x + c * self.x - s * self.y, pose.y + s * self.x + c * self.y, pose.heading + self.yaw)


@dataclass
class ScanResult:
    angles: np.ndarray
    distances: np.ndarray
    valid: np.ndarray
    timestamp: int = 0

    def __len__(self):
        return len(self.angles)

    def readings(self) -> list[tuple[float, float, bool]]:
        return list(zip(self.angles.tolist(), self.distances.tolist(), self.valid.tolist()))


@message(SCAN_TYPE)
@dataclass(frozen=True)
class ScanMsg:
    vehicle_id: Int32 = 0
    scanner: Int32 = 0
    timestamp: int = 0
    angles: list[float] = field(default_factory=list)
    distances: list[float] = field(default_factory=list)
    valid: list[bool] = field(default_factory=list)

    @classmethod
    def from_result(cls, vehicle_id: int, scanner: int, r: ScanResult) -> "ScanMsg":
        return cls(vehicle_id, scanner, r.timestamp, r.angles.tolist(), r.distances.tolist(), r.valid.tolist())

    @classmethod
    def pack_result(cls, vehicle_id: int, scanner: int, r: ScanResult, sent: int) -> Container:
        """Same frame as ``pack(from_result(...), sent)`` without the round trip through lists."""
        # arrays only live inside this transient record; decoding always yields lists
        return pack(cls(vehicle_id, scanner, r.timestamp, r.angles, r.distances, r.valid), sent)

    def to_result(self) -> ScanResult:
        return ScanResult(np.array(self.angles), np.array(self.distances), np.array(self.valid, dtype=bool),
                          self.timestamp)


def segments_array(obstacles: Sequence[Segment]) -> np.ndarray:
    """(n, 5) array of x1, y1, x2, y2, height."""
    if not obstacles:
        return np.zeros((0, 5))
    return np.array([(s.x1, s.y1, s.x2, s.y2, s.height) for s in obstacles], dtype=float)


def _hits(ax, ay, ex, ey, dx, dy) -> np.ndarray:
    """Ray parameter t of each ray/segment pair, inf where the ray misses.

    Rays start at the origin with direction (dx, dy); segments run from
    origin + (ax, ay) along (ex, ey).  Inputs broadcast.
    """
    # origin + t*d = a + u*e  ->  solve with 2D cross products
    denom = dx * ey - dy * ex
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (ax * ey - ay * ex) / denom
        u = (ax * dy - ay * dx) / denom
    hit = (np.abs(denom) > _PARALLEL_EPS) & (t >= 0) & (u >= 0) & (u <= 1)
    return np.where(hit, t, np.inf)


def _nearest_dense(segs: np.ndarray, ox: float, oy: float, dx: np.ndarray, dy: np.ndarray,
                   min_height: float) -> np.ndarray:
    """Every ray against every segment with whole-array numpy; the reference for :func:`_nearest`."""
    segs = segs[segs[:, 4] >= min_height]
    if not len(segs):
        return np.full(len(dx), np.inf)
    ax = segs[:, 0] - ox
    ay = segs[:, 1] - oy
    ex = segs[:, 2] - segs[:, 0]
    ey = segs[:, 3] - segs[:, 1]
    return _hits(ax[None, :], ay[None, :], ex[None, :], ey[None, :], dx[:, None], dy[:, None]).min(axis=1)


def _nearest_loop(segs, ox, oy, dx, dy, min_height):
    """Nearest hit per ray over segments at least ``min_height`` tall.

    Same arithmetic, operation for operation, as :func:`_hits`.  Runs
    compiled (see :func:`_nearest`); plain Python would be far too slow.
    """
    n = dx.shape[0]
    best = np.full(n, np.inf)
    for j in range(segs.shape[0]):
        if segs[j, 4] < min_height:
            continue
        ax = segs[j, 0] - ox
        ay = segs[j, 1] - oy
        ex = segs[j, 2] - segs[j, 0]
        ey = segs[j, 3] - segs[j, 1]
        for i in range(n):
            denom = dx[i] * ey - dy[i] * ex
            if abs(denom) <= _PARALLEL_EPS:
                continue
            t = (ax * ey - ay * ex) / denom
            if not (t >= 0.0) or t >= best[i]:
                continue
            u = (ax * dy[i] - ay * dx[i]) / denom
            if u >= 0.0 and u <= 1.0:
                best[i] = t
    return best


@functools.lru_cache(maxsize=None)
def _compiled():
    # numba is imported on first use so tools that never scan start fast
    import numba

    sig = "float64[:](float64[:, :], float64, float64, float64[:], float64[:], float64)"
    return numba.njit(sig, cache=True)(_nearest_loop)


def _nearest(segs, ox, oy, dx, dy, min_height) -> np.ndarray:
    return _compiled()(segs, float(ox), float(oy), dx, dy, float(min_height))


def scan(obstacles: Sequence[Segment] | np.ndarray, pose: Pose, mount: ScannerMount, timestamp: int = 0,
         noise_sigma: float = 0.0, rng: np.random.Generator | None = None) -> ScanResult:
    """Cast one sweep of rays and return ranges in the scanner frame.

    Only segments at least as tall as the mount height are seen.
    """
    if not all(math.isfinite(v) for v in pose):
        raise ValueError(f"non-finite pose {pose}")
    segs = obstacles if isinstance(obstacles, np.ndarray) else segments_array(obstacles)
    angles = mount.angles()
    ox, oy, boresight = mount.origin(pose)
    world = boresight + angles
    dx, dy = np.cos(world), np.sin(world)
    best = _nearest(np.ascontiguousarray(segs, dtype=np.float64).reshape(-1, 5), ox, oy, dx, dy,
                    float(mount.height))

    if mount.ground_distance is not None:
        cos_a = np.cos(angles)
        with np.errstate(divide="ignore"):
            ground = np.where(cos_a > _PARALLEL_EPS, mount.ground_distance / cos_a, np.inf)
        best = np.minimum(best, ground)

    valid = best <= mount.max_range
    distances = np.where(valid, best, mount.max_range)
    if noise_sigma > 0 and valid.any():
        if rng is None:
            raise ValueError("range noise needs a seeded generator")
        noisy = distances + rng.normal(0.0, noise_sigma, size=len(distances))
        distances = np.where(valid, np.clip(noisy, 0.0, mount.max_range), distances)
    return ScanResult(angles, distances, valid, timestamp)


def mounts_from_config(config: ConfigurationSet) -> list[ScannerMount]:
    """Read ``scanner.<n>.{x,y,height,yaw,fov,resolution,maxrange,grounddistance}``.

    Scanners are numbered from 0 without gaps; yaw is in radians, fov and
    resolution in degrees.
    """
    entries = config.with_prefix("scanner")
    mounts = []
    n = 0
    while any(k.startswith(f"{n}.") for k in entries):
        def f(key, default=None):
            full = f"scanner.{n}.{key}"
            return config.get_float(full, default)
        try:
            mounts.append(ScannerMount(
                x=f("x", 0.0), y=f("y", 0.0), height=f("height", 0.5), yaw=f("yaw", 0.0),
                fov=f("fov"), resolution=f("resolution"), max_range=f("maxrange"),
                ground_distance=f("grounddistance") if f"scanner.{n}.grounddistance" in config else None,
            ))
        except ValueError as exc:
            raise ConfigError(f"scanner.{n}: {exc}") from None
        n += 1
    stray = [k for k in entries if not k.split(".")[0].isdigit() or int(k.split(".")[0]) >= n]
    if stray:
        raise ConfigError(f"scanner keys out of sequence: {', '.join('scanner.' + k for k in stray)}")
    return mounts
