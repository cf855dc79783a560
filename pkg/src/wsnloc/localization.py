"""Position estimation protocols: multilateration and Bounding-Box.

Multilateration minimizes the sum of squared range residuals
f_i = d_i - ||anchor_i - candidate|| with a damped Gauss-Newton
(Levenberg-Marquardt) iteration projected onto the testing plane. An
exhaustive grid oracle over the same objective serves as the independent
check hit by the acceptance suite.

Bounding-Box intersects axis-aligned squares of half-width R centered on
the connected anchors, clamps the intersection to the plane, and places the
node at the center of the resulting Location Area.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import Position

LATERATION_MIN_ANCHORS = 4
LATERATION_MAX_ANCHORS = 6

_STEP_TOL_M = 1e-6
_MAX_ITERATIONS = 250
_INITIAL_DAMPING = 1e-3
_MAX_DAMPING = 1e12


@dataclass(frozen=True)
class LaterationProblem:
    """4..6 anchors with positive range estimates toward an unknown node."""

    anchors: np.ndarray  # (n, 2)
    distances: np.ndarray  # (n,)

    def __post_init__(self) -> None:
        anchors = np.asarray(self.anchors, dtype=float)
        distances = np.asarray(self.distances, dtype=float)
        object.__setattr__(self, "anchors", anchors)
        object.__setattr__(self, "distances", distances)
        n = anchors.shape[0]
        if anchors.ndim != 2 or anchors.shape[1] != 2 or distances.shape != (n,):
            raise ValueError("anchors must be (n, 2) with matching (n,) distances")
        if not LATERATION_MIN_ANCHORS <= n <= LATERATION_MAX_ANCHORS:
            raise ValueError(f"lateration needs 4..6 anchors, got {n}")
        if not np.all(distances > 0.0):
            raise ValueError("all distances must be positive")
        for i in range(n):
            for j in range(i + 1, n):
                if anchors[i, 0] == anchors[j, 0] and anchors[i, 1] == anchors[j, 1]:
                    raise ValueError("anchor positions must be pairwise distinct")

    @property
    def count(self) -> int:
        return self.anchors.shape[0]


@dataclass(frozen=True)
class LaterationSolution:
    position: Position
    objective_m2: float
    converged: bool
    degenerate: bool
    iterations: int

    @property
    def flagged(self) -> bool:
        return (not self.converged) or self.degenerate


def lateration_residuals(candidate: Position, problem: LaterationProblem) -> np.ndarray:
    """Vector of d_i minus the euclidean distance from anchor i to candidate."""
    return _residuals(np.array([candidate.x, candidate.y]), problem)


def _residuals(xy: np.ndarray, problem: LaterationProblem) -> np.ndarray:
    diff = problem.anchors - xy
    return problem.distances - np.hypot(diff[:, 0], diff[:, 1])


def sum_squared_residuals(xy: Sequence[float], problem: LaterationProblem) -> float:
    r = _residuals(np.asarray(xy, dtype=float), problem)
    return float(r @ r)


def _thinness(anchors: np.ndarray) -> float:
    """Ratio of the anchor cloud's singular values, s2/s1 in [0, 1]."""
    xs = anchors[:, 0]
    ys = anchors[:, 1]
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    sxx = float(dx @ dx)
    sxy = float(dx @ dy)
    syy = float(dy @ dy)
    trace = sxx + syy
    if trace <= 0.0:
        return 0.0
    disc = math.sqrt((sxx - syy) ** 2 + 4.0 * sxy * sxy)
    lo = max((trace - disc) / 2.0, 0.0)
    hi = (trace + disc) / 2.0
    return math.sqrt(lo / hi)


def _collinear(anchors: np.ndarray) -> bool:
    return _thinness(anchors) <= 1e-9


def _lm_descent(
    problem: LaterationProblem,
    start: Sequence[float],
    plane: tuple[float, float],
    max_iterations: int,
) -> tuple[float, float, float, bool, int]:
    """One damped Gauss-Newton descent with iterates clamped to the plane.

    Scalar arithmetic on purpose: problems have at most six anchors and the
    simulator runs hundreds of solves per replication.
    """
    width, height = plane
    axs = problem.anchors[:, 0].tolist()
    ays = problem.anchors[:, 1].tolist()
    ds = problem.distances.tolist()
    x = min(max(float(start[0]), 0.0), width)
    y = min(max(float(start[1]), 0.0), height)

    def objective(px: float, py: float) -> float:
        total = 0.0
        for axi, ayi, di in zip(axs, ays, ds):
            r = di - math.hypot(px - axi, py - ayi)
            total += r * r
        return total

    obj = objective(x, y)
    lam = _INITIAL_DAMPING
    converged = obj == 0.0
    iterations = 0
    while not converged and iterations < max_iterations:
        iterations += 1
        gx = gy = hxx = hxy = hyy = 0.0
        for axi, ayi, di in zip(axs, ays, ds):
            dx = x - axi
            dy = y - ayi
            dist = math.hypot(dx, dy)
            if dist < 1e-12:  # candidate sitting on an anchor
                dist = 1e-12
            r = di - dist
            jx = -dx / dist
            jy = -dy / dist
            gx += jx * r
            gy += jy * r
            hxx += jx * jx
            hxy += jx * jy
            hyy += jy * jy
        # Active-set reduction: a coordinate pinned at a bound with the
        # gradient pointing outward stays put and the step solves the
        # reduced system, sliding along the remaining free coordinate.
        x_active = (x == 0.0 and gx > 0.0) or (x == width and gx < 0.0)
        y_active = (y == 0.0 and gy > 0.0) or (y == height and gy < 0.0)
        if x_active and y_active:
            converged = True  # constrained stationary point
            break
        if x_active:
            step_x = 0.0
            step_y = -gy / (hyy + lam)
        elif y_active:
            step_x = -gx / (hxx + lam)
            step_y = 0.0
        else:
            a11 = hxx + lam
            a22 = hyy + lam
            det = a11 * a22 - hxy * hxy
            if det <= 0.0 or not math.isfinite(det):
                lam *= 10.0
                continue
            step_x = (-gx * a22 + gy * hxy) / det
            step_y = (-gy * a11 + gx * hxy) / det
        cx = min(max(x + step_x, 0.0), width)
        cy = min(max(y + step_y, 0.0), height)
        cand = objective(cx, cy)
        if cand < obj:
            step = math.hypot(cx - x, cy - y)
            x, y, obj = cx, cy, cand
            lam = max(lam / 10.0, 1e-12)
            # A micro-step right after heavy damping is not convergence: on a
            # clamped boundary the first accepted step is tiny by construction
            # while the edge optimum may still be meters away.
            if step < _STEP_TOL_M and lam <= _INITIAL_DAMPING:
                converged = True
        else:
            lam *= 10.0
            if lam > _MAX_DAMPING:
                converged = True  # no improving step: stationary point
                break
    return x, y, obj, converged, iterations


def _linearized_start(problem: LaterationProblem) -> tuple[float, float] | None:
    """Classic linearization: subtract circle equations pairwise, solve LS.

    Exact for noise-free ranges and a good global guess otherwise; returns
    None when the normal equations are ill-conditioned or non-finite.
    """
    axs = problem.anchors[:, 0].tolist()
    ays = problem.anchors[:, 1].tolist()
    ds = problem.distances.tolist()
    refx, refy, refd = axs[-1], ays[-1], ds[-1]
    ref_norm = refx * refx + refy * refy
    s11 = s12 = s22 = b1 = b2 = 0.0
    for axi, ayi, di in zip(axs[:-1], ays[:-1], ds[:-1]):
        a1 = 2.0 * (refx - axi)
        a2 = 2.0 * (refy - ayi)
        rhs = di * di - refd * refd - (axi * axi + ayi * ayi) + ref_norm
        s11 += a1 * a1
        s12 += a1 * a2
        s22 += a2 * a2
        b1 += a1 * rhs
        b2 += a2 * rhs
    det = s11 * s22 - s12 * s12
    scale = s11 + s22
    if not math.isfinite(det) or det <= 1e-12 * scale * scale:
        return None
    x = (b1 * s22 - b2 * s12) / det
    y = (b2 * s11 - b1 * s12) / det
    if not (math.isfinite(x) and math.isfinite(y)):
        return None
    return x, y


def _grid_wells(
    problem: LaterationProblem,
    plane: tuple[float, float],
    points_per_axis: int = 21,
    cap: int = 3,
) -> list[np.ndarray]:
    """Local minima of the objective sampled on a fixed coarse grid.

    The wells enumerate candidate basins (a mirrored near-collinear
    solution shows up as its own well); at most `cap` are returned, lowest
    objective first.
    """
    xs = np.linspace(0.0, plane[0], points_per_axis)
    ys = np.linspace(0.0, plane[1], points_per_axis)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    objective = np.zeros_like(gx)
    for (ax, ay), d in zip(problem.anchors, problem.distances):
        objective += (d - np.hypot(gx - ax, gy - ay)) ** 2
    padded = np.pad(objective, 1, constant_values=np.inf)
    neighbor_min = np.full_like(objective, np.inf)
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            if dx == 0 and dy == 0:
                continue
            shifted = padded[1 + dx : 1 + dx + objective.shape[0],
                             1 + dy : 1 + dy + objective.shape[1]]
            neighbor_min = np.minimum(neighbor_min, shifted)
    well_idx = np.argwhere(objective <= neighbor_min)
    ranked = sorted(well_idx, key=lambda ij: (objective[ij[0], ij[1]], ij[0], ij[1]))
    return [np.array([xs[i], ys[j]]) for i, j in ranked[:cap]]


def solve_lateration(
    problem: LaterationProblem,
    plane: tuple[float, float] = (100.0, 100.0),
    max_iterations: int = _MAX_ITERATIONS,
) -> LaterationSolution:
    """Levenberg-Marquardt from the anchor centroid, clamped to the plane.

    Damping starts at 1e-3, grows tenfold on rejected steps and shrinks
    tenfold on accepted ones. Iteration stops once an accepted step moves
    less than 1e-6 m or the iteration budget runs out; in the latter case
    (and for collinear anchor geometry) the best iterate is returned with
    the corresponding flag set.

    Range noise makes the squared-residual landscape multimodal (a
    near-collinear anchor set has a mirror-image basin of almost equal
    depth), so the centroid descent is always followed by descents from the
    linearized least-squares point and from the distinct wells of a fixed
    coarse grid. The lowest final objective wins; every start is a
    deterministic function of the problem.
    """
    degenerate = _collinear(problem.anchors)
    centroid = (float(problem.anchors[:, 0].mean()), float(problem.anchors[:, 1].mean()))
    starts: list[Sequence[float]] = [centroid]
    linearized = _linearized_start(problem)
    if linearized is not None:
        starts.append(linearized)
    starts.extend(_grid_wells(problem, plane))

    x, y, obj, converged, iterations = _lm_descent(problem, starts[0], plane, max_iterations)
    for start in starts[1:]:
        x2, y2, obj2, conv2, it2 = _lm_descent(problem, start, plane, max_iterations)
        if obj2 < obj:
            x, y, obj, converged, iterations = x2, y2, obj2, conv2, it2

    # Curved shallow valleys occasionally exhaust the budget mid-crawl;
    # continuing from the best iterate with fresh damping is equivalent to
    # a larger budget but only paid for when actually needed.
    for _ in range(3):
        if converged:
            break
        x2, y2, obj2, converged, it2 = _lm_descent(problem, (x, y), plane, max_iterations)
        iterations += it2
        if obj2 < obj:
            x, y, obj = x2, y2, obj2

    return LaterationSolution(
        position=Position(x, y),
        objective_m2=obj,
        converged=converged,
        degenerate=degenerate,
        iterations=iterations,
    )


def oracle_lateration(
    problem: LaterationProblem,
    grid_step: float,
    plane: tuple[float, float] = (100.0, 100.0),
) -> Position:
    """Exhaustive grid argmin of the lateration objective over the plane.

    Ties break toward the smallest x, then smallest y. Independent of the
    iterative solver by construction; intended as a verification oracle.
    """
    if grid_step <= 0.0:
        raise ValueError(f"grid step must be positive, got {grid_step}")
    width, height = plane
    xs = np.arange(0.0, width + grid_step / 2, grid_step)
    ys = np.arange(0.0, height + grid_step / 2, grid_step)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")  # x on axis 0: C-order argmin
    objective = np.zeros_like(gx)
    for (ax, ay), d in zip(problem.anchors, problem.distances):
        objective += (d - np.hypot(gx - ax, gy - ay)) ** 2
    flat = int(np.argmin(objective))
    ix, iy = divmod(flat, ys.size)
    return Position(float(xs[ix]), float(ys[iy]))


@dataclass(frozen=True)
class LocationArea:
    """Axis-aligned rectangle of candidate positions (Bounding-Box output)."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self) -> None:
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"degenerate location area {self}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def center(self) -> Position:
        return Position((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)

    def contains(self, position: Position) -> bool:
        return (
            self.x_min <= position.x <= self.x_max
            and self.y_min <= position.y <= self.y_max
        )


@dataclass(frozen=True)
class BoundingBoxResult:
    area: LocationArea
    estimate: Position
    anchors_used: int
    dropped: int


def _raw_intersection(
    anchors: Sequence[tuple[Position, float]]
) -> tuple[float, float, float, float] | None:
    x_lo = max(p.x - r for p, r in anchors)
    x_hi = min(p.x + r for p, r in anchors)
    y_lo = max(p.y - r for p, r in anchors)
    y_hi = min(p.y + r for p, r in anchors)
    if x_lo > x_hi or y_lo > y_hi:
        return None
    return x_lo, x_hi, y_lo, y_hi


def bounding_box(
    anchors: Sequence[tuple[Position, float]],
    plane: tuple[float, float] = (100.0, 100.0),
) -> BoundingBoxResult:
    """Intersect per-anchor coverage squares with the plane.

    `anchors` must be ordered strongest mean RSSI first: when the raw
    intersection is empty (possible under shadowing, where links can be
    audible beyond R), anchors are dropped from the weakest end until it is
    not. With on-plane anchors a single box always intersects the plane.
    """
    if not anchors:
        raise ValueError("bounding box requires at least one anchor")
    width, height = plane
    kept = list(anchors)
    raw = _raw_intersection(kept)
    while raw is None:
        kept.pop()
        raw = _raw_intersection(kept)
    x_lo, x_hi, y_lo, y_hi = raw
    area = LocationArea(
        x_min=max(0.0, x_lo),
        x_max=min(width, x_hi),
        y_min=max(0.0, y_lo),
        y_max=min(height, y_hi),
    )
    return BoundingBoxResult(
        area=area,
        estimate=area.center,
        anchors_used=len(kept),
        dropped=len(anchors) - len(kept),
    )
