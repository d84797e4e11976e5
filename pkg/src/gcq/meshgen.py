"""Time meshes: uniform, graded towards the origin, and two-sided graded.

Every mesh is a :class:`TimeMesh` holding the strictly increasing points
``t_1 < ... < t_N = T`` (the origin ``t_0 = 0`` is implicit) together with
the steps ``tau_j = t_j - t_{j-1}``.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import check_count, check_positive

__all__ = [
    "TimeMesh",
    "MeshStats",
    "uniform_mesh",
    "graded_mesh",
    "two_sided_graded_mesh",
    "mesh_from_points",
    "mesh_stats",
    "read_mesh_csv",
    "write_mesh_csv",
]


@dataclass(frozen=True, eq=False)
class TimeMesh:
    """Strictly increasing time grid with exact terminal time.

    Arrays are 0-based in memory: ``points[n-1]`` is ``t_n`` and
    ``steps[n-1]`` is ``tau_n``.
    """

    points: np.ndarray
    steps: np.ndarray
    T: float
    N: int
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        stp = np.array(self.steps, dtype=float)
        pts.setflags(write=False)
        stp.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "steps", stp)

    @property
    def tau_max(self) -> float:
        return float(self.steps.max())

    @property
    def tau_min(self) -> float:
        return float(self.steps.min())

    def __len__(self) -> int:
        return self.N

    def fingerprint(self) -> str:
        """Short stable hash of the point values, used to tag derived objects."""
        return hashlib.sha256(self.points.tobytes()).hexdigest()[:16]

    def __eq__(self, other):
        if not isinstance(other, TimeMesh):
            return NotImplemented
        return np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash(self.fingerprint())

    def __repr__(self):
        return f"TimeMesh(kind={self.kind!r}, N={self.N}, T={self.T!r}, params={self.params!r})"


def _build(points, T, kind, params) -> TimeMesh:
    points = np.asarray(points, dtype=float)
    steps = np.diff(points, prepend=0.0)
    if not np.all(steps > 0):
        bad = int(np.argmin(steps)) + 1
        raise ValueError(f"mesh points must be strictly increasing (violation at index {bad})")
    return TimeMesh(points, steps, float(T), len(points), kind, dict(params))


def mesh_from_points(points) -> TimeMesh:
    """Wrap an arbitrary increasing sequence ``t_1..t_N`` (all > 0)."""
    points = np.asarray(points, dtype=float).ravel()
    if points.size == 0:
        raise ValueError("mesh needs at least one point")
    if not np.all(np.isfinite(points)):
        raise ValueError("mesh points must be finite")
    return _build(points, points[-1], "custom", {})


def uniform_mesh(T: float, N: int) -> TimeMesh:
    T = check_positive(T, "T")
    N = check_count(N, "N")
    pts = np.arange(1, N + 1, dtype=float) * (T / N)
    pts[-1] = T
    return _build(pts, T, "uniform", {})


def graded_mesh(T: float, N: int, gamma: float) -> TimeMesh:
    """Points ``t_n = (n tau)**gamma`` with ``tau = T**(1/gamma) / N``."""
    T = check_positive(T, "T")
    N = check_count(N, "N")
    gamma = float(gamma)
    if not (math.isfinite(gamma) and gamma >= 1.0):
        raise ValueError(f"gamma must be >= 1, got {gamma}")
    tau = T ** (1.0 / gamma) / N
    pts = (np.arange(1, N + 1, dtype=float) * tau) ** gamma
    pts[-1] = T
    return _build(pts, T, "graded", {"gamma": gamma})


def two_sided_graded_mesh(T: float, N: int, r: float, gamma1: float, gamma2: float) -> TimeMesh:
    """Mesh refined near ``t = 0`` and on both sides of an interior time ``r``.

    The first ``N1 = floor(N r / T)`` steps fill ``(0, r]`` with sizes
    proportional to ``n**(gamma1-1) * (N1-n+1)**(gamma2-1)``; the remaining
    points are ``r + (T-r) ((k-N1)/(N-N1))**gamma2``.
    """
    T = check_positive(T, "T")
    N = check_count(N, "N", minimum=4)
    r = float(r)
    gamma1, gamma2 = float(gamma1), float(gamma2)
    if not 0.0 < r < T:
        raise ValueError(f"r must lie in (0, T), got r={r}, T={T}")
    if gamma1 < 1.0 or gamma2 < 1.0:
        raise ValueError("gamma1 and gamma2 must be >= 1")
    N1 = int(math.floor(N * r / T))
    if N1 < 1:
        raise ValueError(f"N*r/T = {N * r / T} leaves no points before r")

    n = np.arange(1, N1 + 1, dtype=float)
    # the constant N1**(1-gamma1-gamma2) cancels in the normalisation
    ell = n ** (gamma1 - 1.0) * (N1 - n + 1.0) ** (gamma2 - 1.0)
    left = np.cumsum(r * ell / math.fsum(ell))
    left[-1] = r

    k = np.arange(N1 + 1, N + 1, dtype=float)
    right = r + (T - r) * ((k - N1) / (N - N1)) ** gamma2
    right[-1] = T

    params = {"r": r, "gamma1": gamma1, "gamma2": gamma2, "N1": N1}
    return _build(np.concatenate([left, right]), T, "two_sided", params)


@dataclass(frozen=True)
class MeshStats:
    tau_max: float
    tau_min: float
    q: float
    argmax: int  # 1-based
    argmin: int  # 1-based


def mesh_stats(mesh: TimeMesh, window: tuple[int, int] | None = None) -> MeshStats:
    """Step extrema and pole ratio ``q = tau_max / tau_min`` over a window.

    ``window`` is an inclusive 1-based index range ``(lo, hi)``; the default
    is the whole mesh.
    """
    lo, hi = (1, mesh.N) if window is None else (int(window[0]), int(window[1]))
    if lo < 1 or hi > mesh.N or lo > hi:
        raise ValueError(f"window {window!r} is empty or outside 1..{mesh.N}")
    seg = mesh.steps[lo - 1 : hi]
    imax, imin = int(np.argmax(seg)), int(np.argmin(seg))
    tmax, tmin = float(seg[imax]), float(seg[imin])
    return MeshStats(tmax, tmin, tmax / tmin, lo + imax, lo + imin)


def write_mesh_csv(mesh: TimeMesh, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "t", "tau"])
        for i, (t, s) in enumerate(zip(mesh.points, mesh.steps), start=1):
            w.writerow([i, repr(float(t)), repr(float(s))])


def read_mesh_csv(path) -> TimeMesh:
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no mesh rows")
    rows.sort(key=lambda row: int(row["index"]))
    return mesh_from_points([float(row["t"]) for row in rows])
