"""Frequency-group geometry: invariant metrics, balls, lattices, periodization.

Concrete groups are Euclidean spaces with full-rank lattices and the
frequency side of the Gabor group (a line crossed with integer modulation
indices).  All fundamental domains are the half-open basis parallelepiped,
which makes every reduction deterministic and reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from . import quadrature
from .errors import RejectedInputError, ResourceLimitError
from .profiles import FrequencyProfile, PiecewiseConstantProfile

DEFAULT_MC_SAMPLES = 1_000_000
DEFAULT_MC_SEED = 20240823
_MC_BLOCK = 1 << 17

EUCLIDEAN_L2 = "euclidean_l2"
EUCLIDEAN_LINF = "euclidean_linf"
GABOR_PRODUCT = "gabor_product"


def unit_ball_volume(dim: int) -> float:
    return math.pi ** (dim / 2.0) / math.gamma(dim / 2.0 + 1.0)


@dataclass(frozen=True)
class MetricSpace:
    """Translation-invariant metric on the frequency group.

    gabor_product points are (xi, k) with k an integer modulation index;
    the distance there is |xi - eta| + |k - l|.
    """

    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in (EUCLIDEAN_L2, EUCLIDEAN_LINF, GABOR_PRODUCT):
            raise RejectedInputError(f"unknown metric kind {self.kind!r}")
        if self.kind == GABOR_PRODUCT and self.dim != 2:
            raise RejectedInputError("gabor_product points are (xi, k) pairs")
        if self.dim < 1:
            raise RejectedInputError("dimension must be positive")

    @property
    def identity(self) -> np.ndarray:
        return np.zeros(self.dim)

    def _check(self, xi) -> np.ndarray:
        pts = np.asarray(xi, dtype=float)
        if pts.shape[-1] != self.dim:
            raise RejectedInputError(
                f"point dimension {pts.shape[-1]} does not match metric dimension {self.dim}")
        return pts

    def norm(self, vec: np.ndarray) -> np.ndarray:
        v = np.atleast_2d(vec)
        if self.kind == EUCLIDEAN_L2:
            out = np.sqrt(np.sum(v * v, axis=-1))
        elif self.kind == EUCLIDEAN_LINF:
            out = np.max(np.abs(v), axis=-1)
        else:
            out = np.abs(v[..., 0]) + np.abs(v[..., 1])
        return out if np.ndim(vec) > 1 else float(out[0])

    def distance(self, xi, eta) -> float:
        a = self._check(np.atleast_1d(np.asarray(xi, dtype=float)))
        b = self._check(np.atleast_1d(np.asarray(eta, dtype=float)))
        return self.norm(a - b)

    def distance_many(self, points, eta) -> np.ndarray:
        pts = self._check(np.atleast_2d(np.asarray(points, dtype=float)))
        return self.norm(pts - np.asarray(eta, dtype=float))

    def ball_measure(self, r: float) -> float:
        """Haar measure of the open ball B(e, r)."""
        if r <= 0:
            raise RejectedInputError("ball radius must be positive")
        if self.kind == EUCLIDEAN_L2:
            return unit_ball_volume(self.dim) * r ** self.dim
        if self.kind == EUCLIDEAN_LINF:
            return (2.0 * r) ** self.dim
        # Lebesgue on the line times counting measure on the integer factor.
        kmax = math.ceil(r) - 1
        return float(sum(2.0 * (r - abs(k)) for k in range(-kmax, kmax + 1)))

    def ball_box(self, r: float) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned bounding box of B(e, r)."""
        if self.kind == GABOR_PRODUCT:
            kmax = max(math.ceil(r) - 1, 0)
            return np.array([-r, -float(kmax)]), np.array([r, float(kmax)])
        return np.full(self.dim, -r), np.full(self.dim, r)

    def doubling_ratio(self, r: float) -> float:
        return self.ball_measure(2.0 * r) / self.ball_measure(r)


def euclidean_l2(dim: int) -> MetricSpace:
    return MetricSpace(EUCLIDEAN_L2, dim)


def euclidean_linf(dim: int) -> MetricSpace:
    return MetricSpace(EUCLIDEAN_LINF, dim)


def gabor_product() -> MetricSpace:
    return MetricSpace(GABOR_PRODUCT, 2)


def distance(metric: MetricSpace, xi, eta) -> float:
    return float(metric.distance(xi, eta))


def ball_measure(metric: MetricSpace, r: float) -> float:
    return metric.ball_measure(r)


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float
    metric: MetricSpace

    def __post_init__(self):
        if self.radius <= 0:
            raise RejectedInputError("ball radius must be positive")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = self.metric.distance_many(pts, self.center) < self.radius
        return out if np.asarray(points).ndim > 1 else bool(out[0])

    def measure(self) -> float:
        return self.metric.ball_measure(self.radius)


@dataclass(frozen=True)
class Lattice:
    """Full-rank lattice basis . Z^dim with the half-open basis parallelepiped
    as fundamental domain.  For the Gabor group this is the base-line lattice;
    the annihilator sits on the k = 0 slice."""

    basis: np.ndarray
    inv_basis: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.basis, dtype=float))
        if b.shape[0] != b.shape[1]:
            raise RejectedInputError("lattice basis must be square")
        det = np.linalg.det(b)
        if abs(det) < 1e-14:
            raise RejectedInputError("lattice basis is singular")
        object.__setattr__(self, "basis", b)
        object.__setattr__(self, "inv_basis", np.linalg.inv(b))

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def covolume(self) -> float:
        return abs(float(np.linalg.det(self.basis)))

    def point(self, m) -> np.ndarray:
        return self.basis @ np.asarray(m, dtype=float)

    def reduce(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Split xi = lambda + omega with omega in the fundamental domain.

        Returns (integer coordinates of lambda, omega).
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        coords = pts @ self.inv_basis.T
        m = np.floor(coords)
        rem = (coords - m) @ self.basis.T
        return m.astype(np.int64), rem

    def fundamental_box(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned bounding box of the fundamental parallelepiped."""
        corners = self.fundamental_corners()
        return corners.min(axis=0), corners.max(axis=0)

    def fundamental_corners(self) -> np.ndarray:
        grid = np.stack(np.meshgrid(*[(0.0, 1.0)] * self.dim, indexing="ij"),
                        axis=-1).reshape(-1, self.dim)
        return grid @ self.basis.T

    def fundamental_diameter(self, metric: MetricSpace) -> float:
        corners = self.fundamental_corners()
        dmax = 0.0
        for c in corners:
            dmax = max(dmax, float(np.max(metric.distance_many(corners, c))))
        return dmax

    def sample_fundamental(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.random((n, self.dim)) @ self.basis.T

    def boundary_distance_1d(self, xi: float) -> float:
        """Distance from the reduced representative of xi to the domain boundary."""
        if self.dim != 1:
            raise RejectedInputError("boundary_distance_1d requires a 1-d lattice")
        b = abs(float(self.basis[0, 0]))
        off = float(xi) % b
        return min(off, b - off)

    def integer_box(self, lo, hi, margin: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
        """Integer-coordinate bounding box of {m : basis.m in [lo, hi]}."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        center = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        m_center = self.inv_basis @ center
        m_half = np.abs(self.inv_basis) @ half
        m_lo = np.ceil(m_center - m_half - margin).astype(np.int64)
        m_hi = np.floor(m_center + m_half + margin).astype(np.int64)
        return m_lo, m_hi

    def points_in_box(self, lo, hi, cap: int = 100_000_000) -> np.ndarray:
        """All lattice points whose integer box intersects [lo, hi].

        Over-approximates: callers apply their own exact membership test.
        """
        m_lo, m_hi = self.integer_box(lo, hi)
        counts = np.maximum(m_hi - m_lo + 1, 0)
        total = int(np.prod(counts.astype(np.float64)))
        if np.any(counts <= 0):
            return np.empty((0, self.dim))
        if total > cap:
            raise ResourceLimitError(
                f"candidate box holds {total} lattice points (cap {cap})", size=total)
        axes = [np.arange(a, b + 1) for a, b in zip(m_lo, m_hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        m = np.stack([g.ravel() for g in mesh], axis=-1).astype(float)
        return m @ self.basis.T


def integer_lattice(dim: int) -> Lattice:
    return Lattice(np.eye(dim))


# ---------------------------------------------------------------------------
# Periodization and the unfolding identity
# ---------------------------------------------------------------------------

def _contributing_shifts(profile: FrequencyProfile, lattice: Lattice,
                         region_lo: np.ndarray, region_hi: np.ndarray) -> np.ndarray:
    """Lattice points lam with supp(profile) intersecting region + lam."""
    lo = profile.support_lo - region_hi
    hi = profile.support_hi - region_lo
    return lattice.points_in_box(lo, hi)


def periodize(profile: FrequencyProfile, lattice: Lattice):
    """xi -> sum_lam profile(xi + lam), with the shift sum truncated exactly
    by the declared support box."""
    if profile.dim != lattice.dim:
        raise RejectedInputError("profile and lattice dimensions disagree")

    def evaluate(points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lam = _contributing_shifts(profile, lattice, pts.min(axis=0), pts.max(axis=0))
        out = np.zeros(pts.shape[0])
        for shift in lam:
            out += profile.evaluate(pts + shift)
        return out

    return evaluate


def _integral_over_support(profile: FrequencyProfile, level: int) -> float:
    """Composite Gauss-Legendre integral of the profile over its own pieces."""
    cells = 2 ** level
    if isinstance(profile, PiecewiseConstantProfile):
        total = 0.0
        for lo, hi, _v in zip(profile.boxes_lo, profile.boxes_hi, profile.values):
            total += quadrature.integrate_box(profile.evaluate, lo, hi, cells_per_axis=cells)
        return total
    nodes = profile.breakpoints_1d()
    total = 0.0
    for a, b in zip(nodes[:-1], nodes[1:]):
        total += quadrature.integrate_interval(lambda x: profile.evaluate(x), float(a),
                                               float(b), cells=cells)
    return total


def _clip_polygon_halfplane(poly: list[np.ndarray], normal: np.ndarray,
                            offset: float) -> list[np.ndarray]:
    """Keep the part of the polygon with normal . x <= offset."""
    out: list[np.ndarray] = []
    n = len(poly)
    for i in range(n):
        cur, nxt = poly[i], poly[(i + 1) % n]
        c_in = normal @ cur <= offset + 1e-14
        n_in = normal @ nxt <= offset + 1e-14
        if c_in:
            out.append(cur)
        if c_in != n_in:
            t = (offset - normal @ cur) / (normal @ (nxt - cur))
            out.append(cur + t * (nxt - cur))
    return out


def _polygon_area(poly: list[np.ndarray]) -> float:
    if len(poly) < 3:
        return 0.0
    xs = np.array([p[0] for p in poly])
    ys = np.array([p[1] for p in poly])
    return 0.5 * abs(float(np.dot(xs, np.roll(ys, -1)) - np.dot(ys, np.roll(xs, -1))))


def _box_parallelogram_area(box_lo, box_hi, para_origin, basis) -> float:
    """Area of an axis box intersected with origin + basis.[0,1)^2 (exact)."""
    poly = [np.array([box_lo[0], box_lo[1]]), np.array([box_hi[0], box_lo[1]]),
            np.array([box_hi[0], box_hi[1]]), np.array([box_lo[0], box_hi[1]])]
    inv = np.linalg.inv(basis)
    for row, ineq in ((inv[0], (0.0, 1.0)), (inv[1], (0.0, 1.0))):
        lo_off, hi_off = ineq
        base = row @ para_origin
        poly = _clip_polygon_halfplane(poly, row, hi_off + base)
        if not poly:
            return 0.0
        poly = _clip_polygon_halfplane(poly, -row, -(lo_off + base))
        if not poly:
            return 0.0
    return _polygon_area(poly)


def _integral_of_periodization(profile: FrequencyProfile, lattice: Lattice,
                               level: int) -> float:
    """Integral of the periodized profile over the fundamental domain."""
    omega_lo, omega_hi = lattice.fundamental_box()
    shifts = _contributing_shifts(profile, lattice, omega_lo, omega_hi)

    if lattice.dim == 1:
        per = periodize(profile, lattice)
        edges = profile.breakpoints_1d()
        cuts = (edges[None, :] - shifts[:, :1]).ravel()
        b = float(lattice.basis[0, 0])
        lo, hi = (0.0, b) if b > 0 else (b, 0.0)
        cuts = sorted({float(c) for c in cuts if lo < c < hi})
        segment_edges = [lo, *cuts, hi]
        total = 0.0
        for a, c in zip(segment_edges[:-1], segment_edges[1:]):
            total += quadrature.integrate_interval(lambda x: per(x[:, None]), a, c,
                                                   cells=2 ** level)
        return total

    if lattice.dim == 2 and isinstance(profile, PiecewiseConstantProfile):
        # Exact: clip each constant piece against every translated domain copy
        # (the domain translated by shift intersects the support exactly when
        # shift lies in the contributing window above).
        total = 0.0
        for lo, hi, v in zip(profile.boxes_lo, profile.boxes_hi, profile.values):
            for shift in shifts:
                area = _box_parallelogram_area(lo, hi, shift, lattice.basis)
                total += v * area
        return total

    # General fallback: composite rule on the parallelepiped in lattice coordinates.
    per = periodize(profile, lattice)
    jac = lattice.covolume

    def integrand(u: np.ndarray) -> np.ndarray:
        return per(u @ lattice.basis.T) * jac

    return quadrature.integrate_box(integrand, np.zeros(lattice.dim),
                                    np.ones(lattice.dim), cells_per_axis=2 ** level)


def weil_residual(profile: FrequencyProfile, lattice: Lattice, level: int = 5,
                  method: str = "exact") -> float:
    """|integral of the profile - integral of its periodization over the
    fundamental domain|, both sides by composite Gauss-Legendre.

    method="exact" splits at profile breakpoints (1-d) or clips pieces against
    translated domain copies (2-d piecewise constant), so the residual
    measures the unfolding identity itself.  method="grid" uses plain cell
    subdivision on the periodized side and converges with `level`.
    """
    if profile.dim != lattice.dim:
        raise RejectedInputError("profile and lattice dimensions disagree")
    lhs = _integral_over_support(profile, level)
    if method == "exact":
        rhs = _integral_of_periodization(profile, lattice, level)
    elif method == "grid":
        per = periodize(profile, lattice)
        jac = lattice.covolume
        rhs = quadrature.integrate_box(lambda u: per(u @ lattice.basis.T) * jac,
                                       np.zeros(lattice.dim), np.ones(lattice.dim),
                                       cells_per_axis=2 ** level)
    else:
        raise RejectedInputError(f"unknown weil_residual method {method!r}")
    return abs(lhs - rhs)


# ---------------------------------------------------------------------------
# Overlap measure of the deformed-ball neighborhood inside the domain
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OverlapEstimate:
    value: float
    stderr: float
    n_samples: int
    seed: int

    def __float__(self) -> float:
        return self.value


class _IdentityMap:
    def inverse_apply(self, points: np.ndarray) -> np.ndarray:
        return points

    def box_image(self, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return lo, hi


def _blocked_rngs(seed: int, n_samples: int) -> Iterator[tuple[int, np.random.Generator]]:
    offset = 0
    block_index = 0
    while offset < n_samples:
        size = min(_MC_BLOCK, n_samples - offset)
        yield size, np.random.default_rng(np.random.SeedSequence((seed, block_index)))
        offset += size
        block_index += 1


def overlap_measure(lattice: Lattice, metric: MetricSpace, auto=None, r: float = 0.5,
                    n_samples: int = DEFAULT_MC_SAMPLES,
                    seed: int = DEFAULT_MC_SEED) -> OverlapEstimate:
    """Monte Carlo measure of the part of the fundamental domain covered by
    lattice translates of the deformed ball.

    The sample stream is split into fixed-size blocks with per-block subseeds,
    so the estimate does not depend on how blocks are scheduled.
    """
    if r <= 0:
        raise RejectedInputError("radius must be positive")
    if auto is None:
        auto = _IdentityMap()

    if metric.kind == GABOR_PRODUCT:
        # The annihilator sits on the k = 0 slice and the dual shifts fix that
        # slice, so the measure splits over integer slices of the ball.
        base_metric = euclidean_l2(1)
        kmax = math.ceil(r) - 1
        value = 0.0
        var = 0.0
        for k in range(-kmax, kmax + 1):
            est = overlap_measure(lattice, base_metric, None, r - abs(k),
                                  n_samples=n_samples, seed=seed + k)
            value += est.value
            var += est.stderr ** 2
        return OverlapEstimate(value, math.sqrt(var), n_samples, seed)

    ball_lo, ball_hi = metric.ball_box(r)
    img_lo, img_hi = auto.box_image(ball_lo, ball_hi)
    omega_lo, omega_hi = lattice.fundamental_box()
    shifts = lattice.points_in_box(omega_lo - img_hi, omega_hi - img_lo, cap=2_000_000)
    shifts = _prune_shifts(shifts, auto, metric, r, omega_lo, omega_hi)
    if shifts.shape[0]:
        # central shifts first: coverage saturates sooner, the scan loop exits early
        order = np.argsort(metric.norm(shifts - 0.5 * (omega_lo + omega_hi)))
        shifts = shifts[order]

    hits = 0
    total = 0
    for size, rng in _blocked_rngs(seed, n_samples):
        xi = lattice.sample_fundamental(rng, size)
        covered = np.zeros(size, dtype=bool)
        for shift in shifts:
            pre = auto.inverse_apply(xi - shift)
            covered |= metric.norm(pre) < r
            if covered.all():
                break
        hits += int(covered.sum())
        total += size
    p = hits / total
    value = lattice.covolume * p
    stderr = lattice.covolume * math.sqrt(max(p * (1.0 - p), 0.0) / total)
    return OverlapEstimate(value, stderr, total, seed)


def _prune_shifts(shifts: np.ndarray, auto, metric: MetricSpace, r: float,
                  omega_lo: np.ndarray, omega_hi: np.ndarray) -> np.ndarray:
    """Drop shifts whose translated deformed ball provably misses the domain box."""
    if shifts.shape[0] == 0:
        return shifts
    center = 0.5 * (omega_lo + omega_hi)
    half = 0.5 * (omega_hi - omega_lo)
    keep = []
    for shift in shifts:
        pre_center, pre_half = _affine_preimage_box(auto, center - shift, half)
        lower = np.maximum(np.abs(pre_center) - pre_half, 0.0)
        if metric.kind == EUCLIDEAN_L2:
            bound = float(np.sqrt(np.sum(lower ** 2)))
        else:
            bound = float(np.max(lower))
        if bound < r:
            keep.append(shift)
    return np.asarray(keep) if keep else np.empty((0, shifts.shape[1]))


def _affine_preimage_box(auto, center: np.ndarray, half: np.ndarray):
    """Interval-arithmetic image of a box under the inverse map."""
    dim = center.shape[0]
    corners = np.stack(np.meshgrid(*[(-1.0, 1.0)] * dim, indexing="ij"),
                       axis=-1).reshape(-1, dim)
    pts = auto.inverse_apply(center + corners * half)
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    return 0.5 * (lo + hi), 0.5 * (hi - lo)


def overlap_measure_grid_oracle(lattice: Lattice, metric: MetricSpace, auto=None,
                                r: float = 0.5, resolution: int = 2000) -> float:
    """Deterministic midpoint-grid evaluation of the same overlap measure.

    Independent cross-check for the Monte Carlo estimator (dim <= 2).
    """
    if auto is None:
        auto = _IdentityMap()
    if lattice.dim > 2:
        raise RejectedInputError("grid oracle implemented for dim <= 2")
    steps = (np.arange(resolution) + 0.5) / resolution
    if lattice.dim == 1:
        u = steps[:, None]
    else:
        gx, gy = np.meshgrid(steps, steps, indexing="ij")
        u = np.stack([gx.ravel(), gy.ravel()], axis=-1)
    xi = u @ lattice.basis.T
    ball_lo, ball_hi = metric.ball_box(r)
    img_lo, img_hi = auto.box_image(ball_lo, ball_hi)
    omega_lo, omega_hi = lattice.fundamental_box()
    shifts = lattice.points_in_box(omega_lo - img_hi, omega_hi - img_lo, cap=2_000_000)
    covered = np.zeros(xi.shape[0], dtype=bool)
    for shift in shifts:
        covered |= metric.norm(auto.inverse_apply(xi - shift)) < r
    return lattice.covolume * float(covered.mean())
