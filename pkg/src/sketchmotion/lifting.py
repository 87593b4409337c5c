"""Lifting 2D pixel trajectories into a 3D trajectory distribution.

Per timestep: each view's pixel waypoint carries a Gaussian pixel
density; truncated samples from both densities are ray-cast over a depth
interval; cross-view sample pairs closer than a tolerance are kept and
their midpoints fitted with a Gaussian. The product over timesteps is
the trajectory distribution; everything is a pure function of the
inputs and the configured seed.
"""

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyRegionError,
    ParseError,
    SingularCovarianceError,
    ValidationError,
)
from .geometry import CameraView, pixel_grid_to_rays

logger = logging.getLogger(__name__)

PSD_TOL = -1e-12
_PACK_OFFSET = 1 << 20  # grid cell coordinates must fit in 21 signed bits


@dataclass(frozen=True)
class PixelTrajectory:
    """Equal-length 2D waypoints over one view with a shared pixel covariance."""

    view_id: str
    points: np.ndarray
    sigma: np.ndarray = field(default_factory=lambda: 2.0 * np.eye(2))

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise ValidationError("points must be (H, 2) with H >= 2", field="points")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("points must be finite", field="points")
        sig = np.asarray(self.sigma, dtype=float)
        if sig.shape != (2, 2):
            raise ValidationError("sigma must be 2x2", field="sigma")
        if np.abs(sig - sig.T).max() > 1e-12 or np.any(np.linalg.eigvalsh(sig) <= 0):
            raise ValidationError("sigma must be symmetric positive-definite", field="sigma")
        pts = np.ascontiguousarray(pts)
        pts.setflags(write=False)
        sig = np.ascontiguousarray(sig)
        sig.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "sigma", sig)

    def __eq__(self, other):
        if not isinstance(other, PixelTrajectory):
            return NotImplemented
        return (
            self.view_id == other.view_id
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.sigma, other.sigma)
        )

    def __hash__(self):
        return hash((self.view_id, self.points.tobytes(), self.sigma.tobytes()))

    @property
    def horizon(self):
        return self.points.shape[0]


@dataclass(frozen=True)
class LiftingConfig:
    """Sampling parameters for the ray-cast lifter.

    epsilon_sigma is the density cutoff expressed as a Mahalanobis radius
    (scale-free; 3.0 keeps ~98.9% of the 2D Gaussian mass). delta is the
    cross-view pairing tolerance in meters. auto_widen_delta doubles
    delta up to three times when a timestep's intersection comes up
    empty, logging each widening.
    """

    d_near: float = 0.1
    d_far: float = 3.0
    epsilon_sigma: float = 3.0
    delta: float = 0.01
    samples_per_view: int = 64
    depth_samples: int = 64
    rng_seed: int = 0
    auto_widen_delta: bool = False

    def __post_init__(self):
        if not (0 < self.d_near <= self.d_far):
            raise ValidationError("need 0 < d_near <= d_far", field="d_near/d_far")
        if not (self.epsilon_sigma > 0):
            raise ValidationError("epsilon_sigma must be positive", field="epsilon_sigma")
        if not (self.delta > 0):
            raise ValidationError("delta must be positive", field="delta")
        if self.samples_per_view < 1 or self.depth_samples < 1:
            raise ValidationError("sample counts must be >= 1", field="samples")
        if self.rng_seed < 0:
            raise ValidationError("rng_seed must be unsigned", field="rng_seed")

    def to_dict(self):
        return {
            "d_near": self.d_near,
            "d_far": self.d_far,
            "epsilon_sigma": self.epsilon_sigma,
            "delta": self.delta,
            "samples_per_view": self.samples_per_view,
            "depth_samples": self.depth_samples,
            "rng_seed": self.rng_seed,
            "auto_widen_delta": self.auto_widen_delta,
        }

    @classmethod
    def from_dict(cls, d):
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**known)


@dataclass(frozen=True)
class WaypointGaussian:
    """Gaussian over end-effector position at one timestep."""

    t: int
    mu: np.ndarray
    sigma: np.ndarray
    n_samples: int

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).reshape(-1)
        if mu.shape != (3,) or not np.all(np.isfinite(mu)):
            raise ValidationError("mu must be a finite 3-vector", field="mu")
        sig = np.asarray(self.sigma, dtype=float)
        if sig.shape != (3, 3) or np.abs(sig - sig.T).max() > 1e-9:
            raise ValidationError("sigma must be symmetric 3x3", field="sigma")
        if np.linalg.eigvalsh(sig).min() < PSD_TOL:
            raise ValidationError("sigma must be positive-semidefinite", field="sigma")
        mu = np.ascontiguousarray(mu)
        mu.setflags(write=False)
        sig = np.ascontiguousarray(sig)
        sig.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sig)

    def __eq__(self, other):
        if not isinstance(other, WaypointGaussian):
            return NotImplemented
        return (
            self.t == other.t
            and self.n_samples == other.n_samples
            and np.array_equal(self.mu, other.mu)
            and np.array_equal(self.sigma, other.sigma)
        )

    def __hash__(self):
        return hash((self.t, self.n_samples, self.mu.tobytes(), self.sigma.tobytes()))


@dataclass(frozen=True)
class TrajectoryDistribution:
    """Horizon-indexed product of waypoint Gaussians."""

    waypoints: tuple

    def __post_init__(self):
        wps = tuple(self.waypoints)
        if not wps:
            raise ValidationError("distribution needs at least one waypoint", field="waypoints")
        for i, wp in enumerate(wps):
            if wp.t != i + 1:
                raise ValidationError(
                    f"timesteps must be contiguous 1..H, got t={wp.t} at index {i}",
                    field="waypoints",
                )
        object.__setattr__(self, "waypoints", wps)

    @property
    def horizon(self):
        return len(self.waypoints)


def resample_equal_length(polyline, H: int) -> np.ndarray:
    """Resample a polyline to exactly H points, uniform in arc length.

    Endpoints are preserved exactly.
    """
    pts = np.asarray(polyline, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise ValidationError("polyline must be (N, 2) with N >= 2", field="polyline")
    if H < 2:
        raise ValidationError("H must be >= 2", field="H")
    seg = np.diff(pts, axis=0)
    seglen = np.linalg.norm(seg, axis=1)
    total = float(seglen.sum())
    if total <= 0:
        raise ValidationError("polyline has zero length", field="polyline")
    cum = np.concatenate(([0.0], np.cumsum(seglen)))
    targets = np.linspace(0.0, total, H)
    idx = np.clip(np.searchsorted(cum, targets, side="right") - 1, 0, len(seglen) - 1)
    denom = np.where(seglen[idx] > 0, seglen[idx], 1.0)
    frac = np.where(seglen[idx] > 0, (targets - cum[idx]) / denom, 0.0)
    out = pts[idx] + frac[:, None] * seg[idx]
    out[0] = pts[0]
    out[-1] = pts[-1]
    return out


def pixel_density_at(traj: PixelTrajectory, t: int):
    """The image-space Gaussian at timestep t: (mean pixel, 2x2 covariance)."""
    if not (1 <= t <= traj.horizon):
        raise IndexError(f"timestep {t} outside 1..{traj.horizon}")
    return traj.points[t - 1].copy(), traj.sigma.copy()


def gaussian2d_pdf(mean, cov, xy) -> float:
    """Density of N(mean, cov) at xy."""
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    diff = np.asarray(xy, dtype=float) - mean
    det = float(np.linalg.det(cov))
    if det <= 0:
        raise SingularCovarianceError("2D covariance is singular")
    maha = float(diff @ np.linalg.solve(cov, diff))
    return float(np.exp(-0.5 * maha) / (2.0 * np.pi * np.sqrt(det)))


def sample_truncated_gaussian_2d(mean, cov, radius, n, rng) -> np.ndarray:
    """Draw n samples of N(mean, cov) conditioned on Mahalanobis radius <= radius.

    Exact inverse-CDF sampling in the whitened plane (radial law
    r^2 ~ truncated chi^2_2), so the degenerate radius -> 0 limit needs no
    rejection loop and collapses onto the mean.
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    L = np.linalg.cholesky(cov)
    u = rng.random(n)
    theta = rng.random(n) * (2.0 * np.pi)
    mass = -np.expm1(-0.5 * radius * radius)  # P(r <= radius) under chi_2
    r = np.sqrt(-2.0 * np.log1p(-u * mass))
    z = np.empty((n, 2))
    z[:, 0] = r * np.cos(theta)
    z[:, 1] = r * np.sin(theta)
    return mean + z @ L.T


def cast_density_region(view: CameraView, density, config: LiftingConfig, rng) -> np.ndarray:
    """Sample the 3D region consistent with a pixel density in one view.

    Returns samples_per_view * depth_samples points; each lies on the ray
    of a pixel within epsilon_sigma of the density mean, at a depth drawn
    uniformly from [d_near, d_far].
    """
    mean, cov = density
    pixels = sample_truncated_gaussian_2d(mean, cov, config.epsilon_sigma, config.samples_per_view, rng)
    depths = rng.uniform(config.d_near, config.d_far, size=(config.samples_per_view, config.depth_samples))
    origin, dirs = pixel_grid_to_rays(view, pixels)
    points = origin[None, None, :] + dirs[:, None, :] * depths[:, :, None]
    return points.reshape(-1, 3)


def _pack_cells(cells: np.ndarray) -> np.ndarray:
    if np.any(np.abs(cells) >= _PACK_OFFSET):
        raise ValidationError(
            "delta too small relative to coordinate extent for the spatial grid",
            field="delta",
        )
    shifted = cells + _PACK_OFFSET
    return (shifted[:, 0] << 42) | (shifted[:, 1] << 21) | shifted[:, 2]


def intersect_regions(samples_1, samples_2, views=None, delta: float = 0.01) -> np.ndarray:
    """Midpoints of all cross pairs within `delta` meters of each other.

    The pairing is brute force over the cross product, accelerated by a
    uniform grid at cell size delta (a pair within delta always falls in
    adjacent cells). `views` names the sources for interface symmetry;
    the tolerance test itself is Euclidean in 3D. Result order is fixed
    by input order, so downstream moment fits are reproducible.
    """
    s1 = np.asarray(samples_1, dtype=float).reshape(-1, 3)
    s2 = np.asarray(samples_2, dtype=float).reshape(-1, 3)
    if s1.shape[0] == 0 or s2.shape[0] == 0:
        raise ValidationError("both sample sets must be nonempty", field="samples")
    cells2 = np.floor(s2 / delta).astype(np.int64)
    key2 = _pack_cells(cells2)
    order = np.argsort(key2, kind="stable")
    sorted_keys = key2[order]
    cells1 = np.floor(s1 / delta).astype(np.int64)
    delta2 = delta * delta
    chunks = []
    n1 = s1.shape[0]
    for du in (-1, 0, 1):
        for dv in (-1, 0, 1):
            for dw in (-1, 0, 1):
                target = _pack_cells(cells1 + np.array([du, dv, dw], dtype=np.int64))
                lo = np.searchsorted(sorted_keys, target, side="left")
                hi = np.searchsorted(sorted_keys, target, side="right")
                counts = hi - lo
                total = int(counts.sum())
                if total == 0:
                    continue
                ai = np.repeat(np.arange(n1), counts)
                offsets = np.cumsum(counts) - counts
                pos = np.arange(total) - np.repeat(offsets, counts) + np.repeat(lo, counts)
                bj = order[pos]
                d2 = np.einsum("ij,ij->i", s1[ai] - s2[bj], s1[ai] - s2[bj])
                keep = d2 <= delta2
                if np.any(keep):
                    chunks.append(0.5 * (s1[ai[keep]] + s2[bj[keep]]))
    if not chunks:
        return np.empty((0, 3))
    return np.vstack(chunks)


def fit_waypoint_gaussian(samples, t: int) -> WaypointGaussian:
    """Mean and population covariance (divide by n) of a 3D sample set."""
    x = np.asarray(samples, dtype=float).reshape(-1, 3)
    if x.shape[0] == 0:
        raise EmptyRegionError(f"no samples to fit at t={t}", timestep=t)
    mu = x.mean(axis=0)
    centered = x - mu
    sigma = (centered.T @ centered) / x.shape[0]
    sigma = 0.5 * (sigma + sigma.T)
    return WaypointGaussian(t=t, mu=mu, sigma=sigma, n_samples=x.shape[0])


def _rng_for_timestep(seed: int, t: int, view_index: int):
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(t, view_index)))


def lift_trajectory_pair(xi_1: PixelTrajectory, xi_2: PixelTrajectory, views, config: LiftingConfig) -> TrajectoryDistribution:
    """Lift a pair of equal-length pixel trajectories into 3D.

    Per-timestep RNG streams are derived from (rng_seed, t, view), never
    from execution order, so a parallel implementation of this loop
    would be bit-identical. Empty intersections raise unless
    auto_widen_delta is set, in which case delta doubles (at most three
    times, logged) before giving up.
    """
    view1, view2 = views
    if xi_1.horizon != xi_2.horizon:
        raise ValidationError(
            f"trajectory horizons differ: {xi_1.horizon} vs {xi_2.horizon}", field="points"
        )
    if xi_1.view_id != view1.id or xi_2.view_id != view2.id:
        raise ValidationError(
            f"trajectory view ids ({xi_1.view_id!r}, {xi_2.view_id!r}) do not match "
            f"views ({view1.id!r}, {view2.id!r})",
            field="view_id",
        )
    waypoints = []
    for t in range(1, xi_1.horizon + 1):
        rng1 = _rng_for_timestep(config.rng_seed, t, 0)
        rng2 = _rng_for_timestep(config.rng_seed, t, 1)
        region1 = cast_density_region(view1, pixel_density_at(xi_1, t), config, rng1)
        region2 = cast_density_region(view2, pixel_density_at(xi_2, t), config, rng2)
        delta = config.delta
        mids = intersect_regions(region1, region2, (view1, view2), delta)
        if mids.shape[0] == 0 and config.auto_widen_delta:
            for _ in range(3):
                delta *= 2.0
                logger.warning("empty intersection at t=%d, widening delta to %g m", t, delta)
                mids = intersect_regions(region1, region2, (view1, view2), delta)
                if mids.shape[0] > 0:
                    break
        if mids.shape[0] == 0:
            raise EmptyRegionError(
                f"cross-view intersection empty at t={t} (delta={delta:g} m)", timestep=t
            )
        waypoints.append(fit_waypoint_gaussian(mids, t))
    return TrajectoryDistribution(waypoints=tuple(waypoints))


def mean_trajectory(dist: TrajectoryDistribution) -> np.ndarray:
    """The (H, 3) array of waypoint means, in timestep order."""
    return np.array([wp.mu for wp in dist.waypoints])


def sample_trajectory(dist: TrajectoryDistribution, rng) -> np.ndarray:
    """Draw one (H, 3) trajectory, independently per timestep.

    Uses the symmetric eigendecomposition square root, so zero covariance
    reproduces the mean bit-exactly.
    """
    out = np.empty((dist.horizon, 3))
    for i, wp in enumerate(dist.waypoints):
        w, U = np.linalg.eigh(wp.sigma)
        w = np.clip(w, 0.0, None)
        root = U * np.sqrt(w)
        out[i] = wp.mu + root @ rng.standard_normal(3)
    return out


def waypoint_log_density(wp: WaypointGaussian, x) -> float:
    """Log N(x | mu_t, Sigma_t); requires strictly PD covariance."""
    diff = np.asarray(x, dtype=float) - wp.mu
    try:
        L = np.linalg.cholesky(wp.sigma)
    except np.linalg.LinAlgError as e:
        raise SingularCovarianceError(f"covariance at t={wp.t} is singular") from e
    half = np.linalg.solve(L, diff)
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    return float(-0.5 * (3.0 * np.log(2.0 * np.pi) + logdet + half @ half))


def log_density(dist: TrajectoryDistribution, traj) -> float:
    """Log density of a full trajectory under the product factorization."""
    x = np.asarray(traj, dtype=float)
    if x.shape != (dist.horizon, 3):
        raise ValidationError(
            f"trajectory must be ({dist.horizon}, 3), got {x.shape}", field="traj"
        )
    return float(sum(waypoint_log_density(wp, x[i]) for i, wp in enumerate(dist.waypoints)))


def distribution_to_dict(dist: TrajectoryDistribution) -> dict:
    return {
        "horizon": dist.horizon,
        "waypoints": [
            {
                "t": wp.t,
                "mu": [float(v) for v in wp.mu],
                "sigma": [float(v) for v in wp.sigma.reshape(-1)],
                "n_samples": wp.n_samples,
            }
            for wp in dist.waypoints
        ],
    }


def distribution_from_dict(d) -> TrajectoryDistribution:
    try:
        wps = tuple(
            WaypointGaussian(
                t=int(w["t"]),
                mu=np.asarray(w["mu"], dtype=float),
                sigma=np.asarray(w["sigma"], dtype=float).reshape(3, 3),
                n_samples=int(w["n_samples"]),
            )
            for w in d["waypoints"]
        )
    except KeyError as e:
        raise ParseError(f"distribution missing field {e.args[0]!r}") from e
    dist = TrajectoryDistribution(waypoints=wps)
    if "horizon" in d and int(d["horizon"]) != dist.horizon:
        raise ParseError("distribution horizon does not match waypoint count")
    return dist


def dump_distribution(dist: TrajectoryDistribution) -> bytes:
    return json.dumps(distribution_to_dict(dist), indent=2).encode("utf-8")


def parse_distribution(data) -> TrajectoryDistribution:
    if isinstance(data, (bytes, str)):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as e:
            raise ParseError(f"distribution JSON malformed: {e.msg}", offset=e.pos) from e
    return distribution_from_dict(data)


def pixel_trajectory_to_dict(traj: PixelTrajectory) -> dict:
    return {
        "view_id": traj.view_id,
        "sigma": [float(v) for v in traj.sigma.reshape(-1)],
        "points": [[float(u), float(v)] for u, v in traj.points],
    }


def parse_pixel_trajectory(data) -> PixelTrajectory:
    if isinstance(data, (bytes, str)):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as e:
            raise ParseError(f"pixel trajectory JSON malformed: {e.msg}", offset=e.pos) from e
    try:
        return PixelTrajectory(
            view_id=str(data["view_id"]),
            points=np.asarray(data["points"], dtype=float),
            sigma=np.asarray(data["sigma"], dtype=float).reshape(2, 2),
        )
    except KeyError as e:
        raise ParseError(f"pixel trajectory missing field {e.args[0]!r}") from e


def dump_pixel_trajectory(traj: PixelTrajectory) -> bytes:
    return json.dumps(pixel_trajectory_to_dict(traj), indent=2).encode("utf-8")
