"""Barrier Lyapunov functions (BLFs) and their composition."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

# Initial conditions of the robot benchmark; the default mine layout keeps clear of them.
ROBOT_INITIAL_CONDITIONS = ((4.0, 6.0), (-7.5, 4.5), (1.0, -9.2))


@dataclass(frozen=True, eq=False)
class BarrierFn:
    """A BLF over a safe set.

    ``value`` returns ``inf`` outside the strict interior; ``contains`` is the
    strict-interior membership test. ``gamma`` is only a diagnostic.
    """

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    contains: Callable[[np.ndarray], bool]
    gamma: float | None = None
    name: str = "blf"
    scale: float = 1.0
    vanishes_at_origin: bool = True

    def __call__(self, x) -> float:
        return self.value(np.asarray(x, dtype=float))


def _positive(name, v):
    v = np.asarray(v, dtype=float)
    if v.size == 0 or np.any(~np.isfinite(v)) or np.any(v <= 0):
        raise ValueError(f"{name} must be positive, got {v.tolist()}")
    return v


def ball_log(beta: float) -> BarrierFn:
    """ln(beta^2 / (beta^2 - x^T x)) on the open ball of radius beta."""
    b2 = float(_positive("beta", beta)) ** 2

    def value(x):
        d = b2 - x @ x
        return np.log(b2 / d) if d > 0 else np.inf

    def gradient(x):
        return 2.0 * x / (b2 - x @ x)

    return BarrierFn(value, gradient, lambda x: bool(x @ x < b2), gamma=0.5 * float(beta),
                     name=f"ball_log({beta:g})", scale=float(beta))


def box_log(a: Sequence[float]) -> BarrierFn:
    """sum_i ln(a_i^2 / (a_i^2 - x_i^2)) on the open box |x_i| < a_i."""
    a = _positive("a", a).reshape(-1)
    a2 = a ** 2

    def value(x):
        d = a2 - x * x
        return float(np.sum(np.log(a2 / d))) if np.all(d > 0) else np.inf

    def gradient(x):
        return 2.0 * x / (a2 - x * x)

    return BarrierFn(value, gradient, lambda x: bool(np.all(np.abs(x) < a)),
                     gamma=0.5 * float(a.max()), name=f"box_log({a.tolist()})",
                     scale=float(a.min()))


def quartic_ratio(c: float) -> BarrierFn:
    """(c^2 / (c^2 - x^T x) - 1)^2 on the open ball of radius c."""
    c2 = float(_positive("scale", c)) ** 2

    def value(x):
        r2 = x @ x
        d = c2 - r2
        return (r2 / d) ** 2 if d > 0 else np.inf

    def gradient(x):
        r2 = x @ x
        d = c2 - r2
        return (4.0 * c2 * r2 / d ** 3) * x

    return BarrierFn(value, gradient, lambda x: bool(x @ x < c2),
                     name=f"quartic_ratio({c:g})", scale=float(c))


def inverse_obstacle(center, radius: float = 1.0) -> BarrierFn:
    """1 / (||x - center||^2 - radius^2) outside a circular obstacle."""
    return obstacle_field([center], radius)


def obstacle_field(centers, radius: float = 1.0) -> BarrierFn:
    """Sum of inverse obstacle barriers sharing one radius (vectorized)."""
    C = np.atleast_2d(np.asarray(centers, dtype=float))
    r2 = float(_positive("radius", radius)) ** 2

    def value(x):
        d = np.sum((x - C) ** 2, axis=1) - r2
        return float(np.sum(1.0 / d)) if np.all(d > 0) else np.inf

    def gradient(x):
        diff = x - C
        d = np.sum(diff ** 2, axis=1) - r2
        return -2.0 * (diff / (d ** 2)[:, None]).sum(axis=0)

    def contains(x):
        return bool(np.all(np.sum((x - C) ** 2, axis=1) > r2))

    label = "inverse_obstacle" if len(C) == 1 else f"obstacles[{len(C)}]"
    return BarrierFn(value, gradient, contains, name=label, scale=float(radius),
                     vanishes_at_origin=False)


_KINDS = {
    "ball_log": ball_log,
    "box_log": box_log,
    "quartic_ratio": quartic_ratio,
    "inverse_obstacle": inverse_obstacle,
}


def make_blf(kind: str, *args, **kwargs) -> BarrierFn:
    """Construct a BLF by kind name: ball_log, box_log, quartic_ratio, inverse_obstacle."""
    try:
        ctor = _KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown BLF kind {kind!r}; choose from {sorted(_KINDS)}") from None
    return ctor(*args, **kwargs)


def compose_sum(parts: Sequence[BarrierFn]) -> BarrierFn:
    """Sum of BLFs; the safe set is the intersection of the parts' sets."""
    parts = list(parts)
    if not parts:
        raise ValueError("compose_sum needs at least one part")
    if len(parts) == 1:
        p = parts[0]
        return BarrierFn(p.value, p.gradient, p.contains, None, p.name, p.scale,
                         p.vanishes_at_origin)

    def value(x):
        total = 0.0
        for p in parts:
            total += p.value(x)
        return total

    def gradient(x):
        total = parts[0].gradient(x)
        for p in parts[1:]:
            total = total + p.gradient(x)
        return total

    def contains(x):
        return all(p.contains(x) for p in parts)

    return BarrierFn(value, gradient, contains, None,
                     name=" + ".join(p.name for p in parts),
                     scale=min(p.scale for p in parts),
                     vanishes_at_origin=all(p.vanishes_at_origin for p in parts))


def minefield_layout(count: int = 12, radius: float = 8.0, clearance: float = 2.5,
                     avoid: Sequence[Sequence[float]] = ROBOT_INITIAL_CONDITIONS,
                     seed: int = 0, max_draws: int = 100_000) -> np.ndarray:
    """Draw mine centers uniformly in a disk by rejection.

    A candidate is rejected when it lies within ``clearance`` of the origin,
    of an already accepted center, or of any point in ``avoid``.
    """
    rng = np.random.default_rng(seed)
    avoid = np.atleast_2d(np.asarray(avoid, dtype=float)) if len(avoid) else np.zeros((0, 2))
    keep = [np.zeros(2), *avoid]
    centers = []
    for _ in range(max_draws):
        if len(centers) == count:
            break
        # area-uniform draw in the disk
        rad = radius * np.sqrt(rng.uniform())
        ang = rng.uniform(0.0, 2.0 * np.pi)
        c = np.array([rad * np.cos(ang), rad * np.sin(ang)])
        if all(np.linalg.norm(c - k) >= clearance for k in keep):
            centers.append(c)
            keep.append(c)
    else:
        raise RuntimeError(f"could only place {len(centers)} of {count} mines")
    return np.array(centers)


def load_centers(path) -> np.ndarray:
    """Read obstacle centers from text: one ``x y`` (or ``x,y``) pair per line."""
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            rows.append([float(v) for v in line.replace(",", " ").split()])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: cannot parse {line!r}") from None
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise ValueError(f"{path}: expected a nonempty list of equal-length centers")
    return np.array(rows)


def minefield_barrier(centers=None, field_radius: float = 10.0,
                      mine_radius: float = 1.0) -> BarrierFn:
    """Field BLF plus one inverse barrier per mine."""
    if centers is None:
        centers = minefield_layout()
    return compose_sum([quartic_ratio(field_radius), obstacle_field(centers, mine_radius)])


def estimate_gamma(b: BarrierFn, samples: int, box, seed: int = 0) -> float:
    """Empirical lower bound for the constant gamma with gamma*|grad B| >= B.

    ``box`` is ``(low, high)`` with per-coordinate bounds; interior points are
    found by rejection sampling.
    """
    low, high = (np.asarray(v, dtype=float) for v in box)
    rng = np.random.default_rng(seed)
    pts = rng.uniform(low, high, size=(int(samples), low.size))
    best = -np.inf
    for x in pts:
        if not b.contains(x):
            continue
        gn = np.linalg.norm(b.gradient(x))
        if gn < 1e-12:
            continue
        best = max(best, b.value(x) / gn)
    if not np.isfinite(best):
        raise RuntimeError(f"no interior samples with nonzero gradient for {b.name}")
    return float(best)
