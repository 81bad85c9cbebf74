"""Level-set graphs, the inverse-profile distance field, maximal functions,
the good/bad partition, heat-flow comparison and the excess-decay fit.

Level sets of an intermediate value ``s`` are extracted column by column
over the base lattice (all axes but the last).  A column is valid when the
search window contains exactly one crossing; otherwise it is masked, never
filled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grid import Grid, ScalarField, Trajectory
from .operators import ball_mask, gradient_values
from .solver import CLAMP

__all__ = [
    "GraphExtractionError",
    "LevelSetGraph",
    "distance_function",
    "distance_gradient_max",
    "extract_graph",
    "GraphRelationDefects",
    "graph_derivative_relations",
    "parabolic_maximal",
    "GoodBadPartition",
    "partition_good_bad",
    "heat_compare",
    "ExcessDecayReport",
    "excess_decay_ratio",
]


class GraphExtractionError(ValueError):
    """No usable graph: every column invalid, or validity below threshold."""


# ---------------------------------------------------------------------------
# Inverse-profile distance field
# ---------------------------------------------------------------------------


def distance_function(field: ScalarField) -> ScalarField:
    """``z = eps * artanh(u)`` (clamped): vertical position within the layer.

    With non-positive discrepancy, ``|grad z| <= 1``; the deviation above 1
    measures positive discrepancy excursions.
    """
    u = np.clip(field.values, -CLAMP, CLAMP)
    return field.with_values(field.epsilon * np.arctanh(u))


def distance_gradient_max(field: ScalarField, band: float = 0.999) -> float:
    """Max of the centered-difference ``|grad z|`` over ``{|u| <= band}``.

    Finite differences keep the saturated plateaus (where the clamp kinks z)
    from polluting the transition band.
    """
    z = distance_function(field).values
    grid = field.grid
    h2 = 2.0 * grid.spacing
    gsq = np.zeros(grid.shape)
    for ax in range(grid.dim):
        gsq += ((np.roll(z, -1, axis=ax) - np.roll(z, 1, axis=ax)) / h2) ** 2
    mask = np.abs(field.values) <= band
    if not np.any(mask):
        return 0.0
    return float(np.sqrt(np.max(gsq[mask])))


# ---------------------------------------------------------------------------
# Graph extraction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LevelSetGraph:
    """Heights ``h(x_base, t)`` of one level set over the base lattice."""

    level: float
    times: np.ndarray
    heights: np.ndarray  # (n_times, *base_shape)
    valid: np.ndarray  # bool, same shape
    base_extent: float
    base_spacing: float

    @property
    def validity_fraction(self) -> float:
        return float(np.mean(self.valid))

    @property
    def base_dim(self) -> int:
        return self.heights.ndim - 1


def _lagrange_roots(stencil: np.ndarray, targets: np.ndarray,
                    lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Solve cubic-interpolated crossings, vectorized over columns.

    ``stencil`` holds 4 node values per column (interpolation nodes at local
    coordinates 0..3), ``targets`` the level, and ``[lo, hi]`` the bracket in
    local coordinates.  Bisection localizes the root, Newton polishes it.
    """

    def cubic(z: np.ndarray) -> np.ndarray:
        z0, z1, z2, z3 = z - 0.0, z - 1.0, z - 2.0, z - 3.0
        b0 = z1 * z2 * z3 / -6.0
        b1 = z0 * z2 * z3 / 2.0
        b2 = z0 * z1 * z3 / -2.0
        b3 = z0 * z1 * z2 / 6.0
        return (stencil[:, 0] * b0 + stencil[:, 1] * b1
                + stencil[:, 2] * b2 + stencil[:, 3] * b3)

    def cubic_d1(z: np.ndarray) -> np.ndarray:
        z0, z1, z2, z3 = z - 0.0, z - 1.0, z - 2.0, z - 3.0
        b0 = (z1 * z2 + z1 * z3 + z2 * z3) / -6.0
        b1 = (z0 * z2 + z0 * z3 + z2 * z3) / 2.0
        b2 = (z0 * z1 + z0 * z3 + z1 * z3) / -2.0
        b3 = (z0 * z1 + z0 * z2 + z1 * z2) / 6.0
        return (stencil[:, 0] * b0 + stencil[:, 1] * b1
                + stencil[:, 2] * b2 + stencil[:, 3] * b3)

    a, b = lo.astype(float).copy(), hi.astype(float).copy()
    fa = cubic(a) - targets
    for _ in range(52):
        mid = 0.5 * (a + b)
        fm = cubic(mid) - targets
        go_left = (fa * fm) <= 0.0
        b = np.where(go_left, mid, b)
        a = np.where(go_left, a, mid)
        fa = np.where(go_left, fa, fm)
    root = 0.5 * (a + b)
    for _ in range(3):
        f = cubic(root) - targets
        d = cubic_d1(root)
        safe = np.abs(d) > 1e-300
        update = np.where(safe, f / np.where(safe, d, 1.0), 0.0)
        root = np.clip(root - update, lo, hi)
    return root


def extract_graph(traj: ScalarField | Trajectory, level: float,
                  window: float | None = None) -> LevelSetGraph:
    """Per-column single-crossing heights of ``{u = level}``.

    The search window ``|x_vertical| <= window`` (default a quarter box)
    enforces the single-layer hypothesis geometrically.  Columns with zero
    or multiple crossings are marked invalid; an all-invalid extraction is
    an error.  Crossings are refined on the column's cubic interpolant to
    ``|u(h) - level| <= 1e-12``.
    """
    if isinstance(traj, ScalarField):
        frames: Sequence[ScalarField] = [traj]
        times = np.array([traj.time])
        grid = traj.grid
    else:
        frames = traj.frames
        times = traj.times
        grid = traj.grid
    if window is None:
        window = 0.25 * grid.extent

    axis = grid.axis()
    in_win = np.abs(axis) <= window + 1e-12
    w0 = int(np.argmax(in_win))
    w1 = w0 + int(np.sum(in_win))  # window is a contiguous coordinate range
    m = w1 - w0
    if m < 4:
        raise GraphExtractionError("search window too narrow for cubic interpolation")

    base_shape = grid.shape[:-1] if grid.dim > 1 else (1,)
    n_cols = int(np.prod(base_shape))
    heights = np.zeros((len(frames),) + base_shape)
    valid = np.zeros((len(frames),) + base_shape, dtype=bool)

    for fi, f in enumerate(frames):
        u = f.values.reshape(n_cols, grid.points) if grid.dim > 1 else f.values.reshape(1, -1)
        w = u[:, w0:w1] - level
        node_zero = w == 0.0
        sign_change = (w[:, :-1] * w[:, 1:]) < 0.0
        count = node_zero.sum(axis=1) + sign_change.sum(axis=1)
        ok = count == 1

        h_col = np.zeros(n_cols)
        # Exact node hits.
        hit = ok & node_zero.any(axis=1)
        if np.any(hit):
            idx = np.argmax(node_zero[hit], axis=1)
            h_col[hit] = axis[w0 + idx]
        # Interval crossings.
        cross = ok & ~node_zero.any(axis=1)
        if np.any(cross):
            j = np.argmax(sign_change[cross], axis=1)  # local index of left node
            q = np.clip(j - 1, 0, m - 4)  # stencil start, clamped at window edges
            rows = np.nonzero(cross)[0]
            stencil = np.empty((len(rows), 4))
            for off in range(4):
                stencil[:, off] = w[rows, q + off] + level
            lo = (j - q).astype(float)
            hi = lo + 1.0
            root = _lagrange_roots(stencil, np.full(len(rows), level), lo, hi)
            h_col[cross] = axis[w0 + q] + root * grid.spacing
        heights[fi] = h_col.reshape(base_shape)
        valid[fi] = ok.reshape(base_shape)

    if not np.any(valid):
        raise GraphExtractionError(
            f"no column has a single crossing of level {level} inside the window"
        )
    return LevelSetGraph(
        level=level,
        times=times,
        heights=heights,
        valid=valid,
        base_extent=grid.extent,
        base_spacing=grid.spacing,
    )


def _interp_on_columns(values: np.ndarray, grid: Grid, heights: np.ndarray) -> np.ndarray:
    """Cubic interpolation of a lattice field along each vertical column.

    ``heights`` has the base shape; the result samples ``values`` at
    (column, heights[column]).
    """
    n_cols = int(np.prod(heights.shape))
    v = values.reshape(n_cols, grid.points) if grid.dim > 1 else values.reshape(1, -1)
    axis = grid.axis()
    h = heights.reshape(n_cols)
    pos = (h - axis[0]) / grid.spacing
    j = np.clip(np.floor(pos).astype(int), 1, grid.points - 3)
    q = j - 1
    z = pos - q
    rows = np.arange(n_cols)
    stencil = np.stack([v[rows, q + off] for off in range(4)], axis=1)
    z0, z1, z2, z3 = z - 0.0, z - 1.0, z - 2.0, z - 3.0
    b0 = z1 * z2 * z3 / -6.0
    b1 = z0 * z2 * z3 / 2.0
    b2 = z0 * z1 * z3 / -2.0
    b3 = z0 * z1 * z2 / 6.0
    out = stencil[:, 0] * b0 + stencil[:, 1] * b1 + stencil[:, 2] * b2 + stencil[:, 3] * b3
    return out.reshape(heights.shape)


@dataclass(frozen=True)
class GraphRelationDefects:
    """Max deviations of the three field/graph derivative relations."""

    vertical: float  # du/dx_v = (dh/ds)^-1
    spatial: float  # du/dx_i = -(dh/ds)^-1 dh/dx_i
    time: float  # du/dt = -(dh/dt)(dh/ds)^-1

    @property
    def maximum(self) -> float:
        return max(self.vertical, self.spatial, self.time)


def graph_derivative_relations(
    traj: ScalarField | Trajectory,
    level: float,
    delta_s: float = 1e-3,
    window: float | None = None,
) -> GraphRelationDefects:
    """Two-sided check of the graph/field derivative relations.

    ``dh/ds`` comes from graphs extracted at ``level +- delta_s`` (a genuine
    second route, independent of the field's vertical derivative);
    ``dh/dx_i`` and ``dh/dt`` by centered differences on the base lattice
    and sample times.  Returns the max absolute defect of each relation
    over commonly valid points.
    """
    single = isinstance(traj, ScalarField)
    frames = [traj] if single else list(traj.frames)
    grid = frames[0].grid

    g_mid = extract_graph(traj, level, window)
    g_lo = extract_graph(traj, level - delta_s, window)
    g_hi = extract_graph(traj, level + delta_s, window)
    common = g_mid.valid & g_lo.valid & g_hi.valid
    if not np.any(common):
        raise GraphExtractionError("no commonly valid columns across the level band")

    dh_ds = (g_hi.heights - g_lo.heights) / (2.0 * delta_s)
    inv_dh_ds = 1.0 / dh_ds

    vertical_defect = 0.0
    spatial_defect = 0.0
    time_defect = 0.0
    n_base = grid.dim - 1

    for fi, f in enumerate(frames):
        mask = common[fi]
        if not np.any(mask):
            continue
        grads = gradient_values(grid, f.values)
        h = g_mid.heights[fi]
        du_dv = _interp_on_columns(grads[-1], grid, h)
        vertical_defect = max(
            vertical_defect, float(np.max(np.abs(du_dv - inv_dh_ds[fi])[mask]))
        )
        for ax in range(n_base):
            du_dx = _interp_on_columns(grads[ax], grid, h)
            dh_dx = (np.roll(h, -1, axis=ax) - np.roll(h, 1, axis=ax)) / (2.0 * grid.spacing)
            ax_mask = mask & np.roll(mask, -1, axis=ax) & np.roll(mask, 1, axis=ax)
            if np.any(ax_mask):
                defect = np.abs(du_dx + inv_dh_ds[fi] * dh_dx)
                spatial_defect = max(spatial_defect, float(np.max(defect[ax_mask])))

    if not single and len(frames) >= 3:
        dts = traj.dt_sample
        for fi in range(1, len(frames) - 1):
            mask = common[fi] & common[fi - 1] & common[fi + 1]
            if not np.any(mask):
                continue
            f = frames[fi]
            du_dt_field = (frames[fi + 1].values - frames[fi - 1].values) / (2.0 * dts)
            h = g_mid.heights[fi]
            du_dt = _interp_on_columns(du_dt_field, grid, h)
            dh_dt = (g_mid.heights[fi + 1] - g_mid.heights[fi - 1]) / (2.0 * dts)
            defect = np.abs(du_dt + dh_dt * inv_dh_ds[fi])
            time_defect = max(time_defect, float(np.max(defect[mask])))

    return GraphRelationDefects(vertical=vertical_defect, spatial=spatial_defect, time=time_defect)


# ---------------------------------------------------------------------------
# Parabolic maximal function and the good/bad partition
# ---------------------------------------------------------------------------


def _window_bounds(times: np.ndarray, t: float, r: float) -> tuple[int, int]:
    lo, hi = t - r * r, t + r * r
    slack = 1e-12 * max(1.0, abs(hi))
    idx = np.nonzero((times >= lo - slack) & (times <= hi + slack))[0]
    return int(idx[0]), int(idx[-1])


def _window_measure(times: np.ndarray, r: float) -> float:
    """Time measure assigned to a window holding a single sample."""
    if len(times) > 1:
        return min(2.0 * r * r, float(times[1] - times[0]))
    return 2.0 * r * r


def _trapezoid_time(series: np.ndarray, times: np.ndarray, a: int, b: int, r: float) -> float:
    if a == b:
        return float(series[a]) * _window_measure(times, r)
    dt = times[1] - times[0]
    total = float(np.sum(series[a : b + 1]))
    return dt * (total - 0.5 * (series[a] + series[b]))


def parabolic_maximal(
    f: np.ndarray,
    times: np.ndarray,
    extent: float,
    point_space: Sequence[float],
    point_time: float,
    radii: Sequence[float],
) -> float:
    """Sup over the given radii of ``r^(-m-2)`` times the mass of ``f`` over
    the space-time cylinder at the query point (m spatial axes; no volume
    factor in the normalization).

    ``f`` is laid out (time, *spatial) over a centered periodic lattice.
    Time windows reaching past the sampled range are clipped.
    """
    spatial_shape = f.shape[1:]
    m = len(spatial_shape)
    radii = list(radii)
    if not radii:
        raise ValueError("need at least one radius")
    if any(r <= 0 or r > 0.5 * extent for r in radii):
        raise ValueError(f"radii must lie in (0, {0.5 * extent}]; got {radii}")
    spacing = extent / spatial_shape[0]
    axes = [-0.5 * extent + spacing * np.arange(nn) for nn in spatial_shape]
    cell = spacing**m

    best = 0.0
    for r in radii:
        d2 = np.zeros(spatial_shape)
        for ax in range(m):
            shape = [1] * m
            shape[ax] = spatial_shape[ax]
            delta = axes[ax].reshape(shape) - point_space[ax]
            delta = (delta + 0.5 * extent) % extent - 0.5 * extent
            d2 = d2 + delta**2
        mask = d2 <= r * r
        per_frame = np.array([float(np.sum(np.where(mask, fr, 0.0))) * cell for fr in f])
        a, b = _window_bounds(times, point_time, r)
        mass = _trapezoid_time(per_frame, times, a, b, r)
        best = max(best, mass / r ** (m + 2))
    return best


def _maximal_field(g: np.ndarray, times: np.ndarray, grid: Grid, radii: Sequence[float],
                   power: int) -> np.ndarray:
    """Dyadic maximal function of g(time, *space) at every lattice point.

    Masked ball sums are periodic convolutions (computed exactly by FFT);
    time windows are trapezoid sums via cumulative arrays.
    """
    nt = g.shape[0]
    out = np.zeros_like(g)
    dt = times[1] - times[0] if nt > 1 else 1.0
    coords = grid.coords()
    for r in radii:
        d2 = np.zeros(grid.shape)
        for x in coords:
            d2 = d2 + grid.minimal_image(x) ** 2
        kernel = (d2 <= r * r).astype(float)
        khat = np.fft.fftn(kernel)
        conv = np.empty_like(g)
        for j in range(nt):
            conv[j] = np.fft.ifftn(np.fft.fftn(g[j]) * khat).real * grid.cell_volume
        cs = np.cumsum(conv, axis=0)
        zeros = np.zeros_like(conv[0])
        for i in range(nt):
            a, b = _window_bounds(times, times[i], r)
            total = cs[b] - (cs[a - 1] if a > 0 else zeros)
            if a == b:
                mass = conv[a] * _window_measure(times, r)
            else:
                mass = dt * (total - 0.5 * (conv[a] + conv[b]))
            np.maximum(out[i], mass / r**power, out=out[i])
    return out


def dyadic_radii(extent: float, spacing: float, r_max: float | None = None) -> list[float]:
    """Radii ``r_max * 2^-k`` down to ``2 * spacing``."""
    r = r_max if r_max is not None else 0.25 * extent
    out = []
    while r >= 2.0 * spacing:
        out.append(r)
        r *= 0.5
    if not out:
        raise ValueError("box too coarse for any dyadic radius >= 2 spacing")
    return out


@dataclass(frozen=True)
class GoodBadPartition:
    """Threshold split of the layer region by the tilt maximal function."""

    threshold: float
    band: float
    good: np.ndarray  # bool (time, *space)
    bad: np.ndarray
    maximal: np.ndarray
    weak_l1_ratio: float


def partition_good_bad(
    traj: Trajectory,
    threshold: float,
    band: float,
    direction: Sequence[float] | None = None,
    radii: Sequence[float] | None = None,
) -> GoodBadPartition:
    """Good/bad split of ``{|u| < 1 - band}`` by the parabolic maximal
    function of the tilt integrand, plus the measured weak-L1 constant
    ``(bad-set Dirichlet mass) * threshold / (total tilt mass)``.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    from .diagnostics import _tilt_integrand  # shared integrand and floor

    grid = traj.grid
    e = direction if direction is not None else (0.0,) * (grid.dim - 1) + (1.0,)
    if radii is None:
        radii = dyadic_radii(grid.extent, grid.spacing)
    times = traj.times
    tilt = np.stack([_tilt_integrand(f, e) for f in traj.frames])
    n = grid.interface_dim
    maximal = _maximal_field(tilt, times, grid, radii, power=n + 2)

    u = np.stack([f.values for f in traj.frames])
    layer = np.abs(u) < 1.0 - band
    good = layer & (maximal < threshold)
    bad = layer & (maximal >= threshold)

    eps = traj.epsilon
    dirichlet = np.stack(
        [eps * np.sum(gradient_values(grid, f.values) ** 2, axis=0) for f in traj.frames]
    )
    w = np.full(len(times), traj.dt_sample if len(times) > 1 else 1.0)
    if len(times) > 1:
        w[0] = w[-1] = 0.5 * traj.dt_sample
    vol = grid.cell_volume
    bad_mass = float(sum(wi * np.sum(d[m]) * vol for wi, d, m in zip(w, dirichlet, bad)))
    tilt_mass = float(sum(wi * np.sum(ti) * vol for wi, ti in zip(w, tilt)))
    ratio = bad_mass * threshold / tilt_mass if tilt_mass > 0 else 0.0
    return GoodBadPartition(
        threshold=threshold, band=band, good=good, bad=bad, maximal=maximal,
        weak_l1_ratio=ratio,
    )


# ---------------------------------------------------------------------------
# Heat-flow comparison and excess decay
# ---------------------------------------------------------------------------


def heat_compare(
    graph: LevelSetGraph,
    reference_initial: np.ndarray | None = None,
    validity_threshold: float = 0.95,
) -> float:
    """Relative space-time L2 distance between the extracted graph and the
    heat flow of a reference initial profile.

    The reference evolves by exact Fourier-mode decay on the periodic base;
    both sides are made mean-free.  Defaults the reference to the graph's
    first frame.
    """
    if graph.validity_fraction < validity_threshold:
        raise GraphExtractionError(
            f"graph valid on {graph.validity_fraction:.1%} of base points "
            f"< required {validity_threshold:.0%}"
        )
    h = np.where(graph.valid, graph.heights, 0.0)
    h0 = reference_initial if reference_initial is not None else h[0]
    h0 = np.asarray(h0, dtype=float)

    h = h - np.mean(h)
    h0 = h0 - np.mean(h0)

    base_axes = tuple(range(h0.ndim))
    n_pts = h0.shape[0]
    k1 = 2.0 * np.pi * np.fft.fftfreq(n_pts, d=graph.base_spacing)
    k2 = np.zeros(h0.shape)
    for ax in range(h0.ndim):
        shape = [1] * h0.ndim
        shape[ax] = n_pts
        k2 = k2 + k1.reshape(shape) ** 2
    h0_hat = np.fft.fftn(h0)

    num = 0.0
    den = 0.0
    t0 = graph.times[0]
    for j, t in enumerate(graph.times):
        ref = np.fft.ifftn(h0_hat * np.exp(-k2 * (t - t0))).real
        diff = (h[j] - ref)[graph.valid[j]]
        num += float(np.sum(diff**2))
        den += float(np.sum(ref[graph.valid[j]] ** 2))
    if den == 0.0:
        return math.sqrt(num)
    return math.sqrt(num / den)


@dataclass(frozen=True)
class ExcessDecayReport:
    """Best-fit plane and the contraction ratio of the height excess."""

    theta: float
    scale: float
    normal: tuple[float, ...]
    offset: float
    ratio: float
    height_excess_unit: float  # scale^(-n-4) * height mass over the unit cylinder
    layer_repulsion_value: float  # height_excess_unit / (eps/scale)^2
    normal_deviation: float
    tilt_constant: float  # normal_deviation / sqrt(height_excess_unit)

    def passes(self, k1: float) -> bool | None:
        """Contraction verdict, None when the layer-repulsion floor bites."""
        if self.layer_repulsion_value < k1:
            return None
        return self.ratio <= 0.5 * self.theta

    def as_dict(self) -> dict:
        return {
            "theta": self.theta,
            "scale": self.scale,
            "fitted_normal": list(self.normal),
            "fitted_offset": self.offset,
            "ratio": self.ratio,
            "height_excess_unit": self.height_excess_unit,
            "layer_repulsion_value": self.layer_repulsion_value,
            "normal_deviation": self.normal_deviation,
            "tilt_constant": self.tilt_constant,
        }


def excess_decay_ratio(
    traj: Trajectory,
    theta: float,
    scale: float,
    center_space: Sequence[float] | None = None,
    center_time: float | None = None,
) -> ExcessDecayReport:
    """Fit the plane minimizing the height excess over the shrunk cylinder
    and report the contraction ratio against the flat-frame excess at unit
    scale.

    The fit is weighted linear least squares of the vertical coordinate on
    the base coordinates with weight ``eps |grad u|^2`` over ``P_theta``;
    the ratio is ``theta^(-n-4) H_fit(P_theta) / H_flat(P_1)`` with both
    masses raw (the common scale normalization cancels).
    """
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    grid = traj.grid
    n = grid.interface_dim
    c = tuple(center_space) if center_space is not None else (0.0,) * grid.dim
    t0 = center_time if center_time is not None else float(np.median(traj.times))

    disp = np.zeros((grid.dim,) + grid.shape)
    for ax, x in enumerate(grid.coords()):
        disp[ax] = grid.minimal_image(x - c[ax])
    xv = disp[-1]
    base = disp[:-1]

    inner = ball_mask(grid, c, theta * scale)
    outer = ball_mask(grid, c, scale)
    # The fit runs over a product cylinder (base ball x vertical slab): a
    # round window would couple the base coordinate to the layer thickness
    # through its tilted boundary and bias the slope at order (eps/r)^2.
    # The slab always spans several layer widths so the profile is not cut.
    base_r2 = np.sum(base**2, axis=0)
    slab = max(theta * scale, 6.0 * traj.epsilon)
    fit_mask = (base_r2 <= (theta * scale) ** 2) & (np.abs(xv) <= slab)

    eps = traj.epsilon
    times = traj.times
    dts = traj.dt_sample if len(times) > 1 else 1.0

    def frames_in(r: float) -> list[tuple[int, float]]:
        lo, hi = t0 - r * r, t0 + r * r
        slack = 1e-12
        idx = [i for i, t in enumerate(times) if lo - slack <= t <= hi + slack]
        if len(idx) < 2:
            raise ValueError("trajectory does not cover the cylinder time window")
        w = {i: dts for i in idx}
        w[idx[0]] = 0.5 * dts
        w[idx[-1]] = 0.5 * dts
        return [(i, w[i]) for i in idx]

    # Weighted least squares over the shrunk cylinder.
    p = grid.dim  # base coords + constant
    A = np.zeros((p, p))
    b = np.zeros(p)
    weights_cache: dict[int, np.ndarray] = {}

    def weight(i: int) -> np.ndarray:
        if i not in weights_cache:
            g = gradient_values(grid, traj[i].values)
            weights_cache[i] = eps * np.sum(g * g, axis=0)
        return weights_cache[i]

    for i, tw in frames_in(theta * scale):
        w = np.where(fit_mask, weight(i), 0.0) * tw
        feats = [np.broadcast_to(base[ax], grid.shape) for ax in range(n)] + [np.ones(grid.shape)]
        for a_i in range(p):
            b[a_i] += float(np.sum(w * feats[a_i] * xv))
            for b_i in range(a_i, p):
                A[a_i, b_i] += float(np.sum(w * feats[a_i] * feats[b_i]))
    A = A + np.triu(A, 1).T
    if np.linalg.cond(A) > 1e14:
        raise ValueError("degenerate excess-decay fit: no interface mass in the cylinder")
    coef = np.linalg.solve(A, b)
    slope, intercept = coef[:-1], coef[-1]

    norm = math.sqrt(1.0 + float(np.sum(slope**2)))
    normal = tuple(float(v) for v in np.append(-slope, 1.0) / norm)
    offset = float(intercept / norm)

    height_fit = (np.tensordot(np.asarray(normal), disp, axes=(0, 0)) - offset) ** 2
    height_flat = xv**2

    num = 0.0
    for i, tw in frames_in(theta * scale):
        num += tw * float(np.sum(np.where(inner, height_fit * weight(i), 0.0)) * grid.cell_volume)
    den = 0.0
    for i, tw in frames_in(scale):
        den += tw * float(np.sum(np.where(outer, height_flat * weight(i), 0.0)) * grid.cell_volume)

    h_unit = den / scale ** (n + 4)
    eps_hat = eps / scale
    deviation = float(np.linalg.norm(np.asarray(normal) - np.eye(grid.dim)[-1]))
    return ExcessDecayReport(
        theta=theta,
        scale=scale,
        normal=normal,
        offset=offset,
        ratio=theta ** (-n - 4) * num / den if den > 0 else 0.0,
        height_excess_unit=h_unit,
        layer_repulsion_value=h_unit / eps_hat**2 if eps_hat > 0 else math.inf,
        normal_deviation=deviation,
        tilt_constant=deviation / math.sqrt(h_unit) if h_unit > 0 else 0.0,
    )
