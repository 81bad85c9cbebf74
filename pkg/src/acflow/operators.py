"""Fourier-spectral differential operators and masked quadrature.

Derivatives are exact (to round-off) for band-limited data on the periodic
grid.  Quadrature is the midpoint rule in space (a sharp cell-center
indicator for balls, first-order consistent) and the trapezoid rule over the
sampled frames inside a cylinder's time window.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .grid import Grid, ParabolicCylinder, ScalarField, Trajectory

__all__ = [
    "gradient",
    "gradient_values",
    "laplacian",
    "laplacian_values",
    "ball_mask",
    "integrate",
    "integrate_values",
]


def gradient_values(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Spectral partial derivatives, stacked along a leading axis."""
    vhat = np.fft.fftn(values)
    ks = grid.wavenumbers(zero_nyquist=True)
    out = np.empty((grid.dim,) + grid.shape)
    for ax, k in enumerate(ks):
        out[ax] = np.fft.ifftn(1j * k * vhat).real
    return out


def gradient(field: ScalarField) -> tuple[ScalarField, ...]:
    g = gradient_values(field.grid, field.values)
    return tuple(field.with_values(g[ax]) for ax in range(field.grid.dim))


def laplacian_values(grid: Grid, values: np.ndarray) -> np.ndarray:
    vhat = np.fft.fftn(values)
    k2 = sum(k * k for k in grid.wavenumbers(zero_nyquist=False))
    return np.fft.ifftn(-k2 * vhat).real


def laplacian(field: ScalarField) -> ScalarField:
    return field.with_values(laplacian_values(field.grid, field.values))


def ball_mask(grid: Grid, center: Sequence[float], radius: float) -> np.ndarray:
    """Cell-center indicator of ``|x - center| <= radius`` (periodic metric)."""
    d2 = np.zeros(grid.shape)
    for ax, x in enumerate(grid.coords()):
        d2 = d2 + grid.minimal_image(x - center[ax]) ** 2
    return d2 <= radius**2


def _box_sum(grid: Grid, values: np.ndarray, mask: np.ndarray | None) -> float:
    if mask is None:
        return float(np.sum(values) * grid.cell_volume)
    return float(np.sum(values[mask]) * grid.cell_volume)


def _trapezoid_weights(times: np.ndarray) -> np.ndarray:
    """Trapezoid weights for uniformly sampled times (single frame -> 1)."""
    n = len(times)
    if n == 1:
        return np.array([1.0])
    dt = times[1] - times[0]
    w = np.full(n, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def integrate_values(
    grid: Grid,
    slices: Sequence[tuple[float, np.ndarray]],
    region: ParabolicCylinder | None = None,
) -> float:
    """Integrate sampled densities over a cylinder or the whole box.

    ``slices`` is a sequence of ``(time, values)`` pairs at uniform spacing.
    A single slice gives the plain spatial integral (no time measure).  With
    a region, space is restricted to the ball and time to the frames inside
    ``|t - t0| <= r^2``; a window so thin that it holds a single sample gets
    the midpoint measure ``min(2 r^2, sampling interval)``.
    """
    n_given = len(slices)
    dt_given = slices[1][0] - slices[0][0] if n_given > 1 else None
    if region is not None:
        region.validate_against(grid)
        mask = ball_mask(grid, region.center_space, region.radius)
        lo, hi = region.time_window
        slack = 1e-12 * max(1.0, abs(hi))
        slices = [(t, v) for (t, v) in slices if lo - slack <= t <= hi + slack]
        if not slices:
            raise ValueError(f"no frames inside time window [{lo}, {hi}]")
    else:
        mask = None

    spatial = np.array([_box_sum(grid, v, mask) for (_, v) in slices])
    if len(slices) == 1:
        if n_given > 1 and region is not None:
            return float(spatial[0]) * min(2.0 * region.radius**2, dt_given)
        return float(spatial[0])
    times = np.array([t for (t, _) in slices])
    return float(np.sum(spatial * _trapezoid_weights(times)))


def integrate(
    density: ScalarField | Trajectory,
    region: ParabolicCylinder | None = None,
) -> float:
    """Quadrature of a density field (spatial) or trajectory (space-time).

    Whole-box spatial quadrature is exact for trigonometric polynomials;
    masked ball quadrature is first-order in the spacing.
    """
    if isinstance(density, ScalarField):
        slices = [(density.time, density.values)]
        return integrate_values(density.grid, slices, region)
    slices = [(f.time, f.values) for f in density.frames]
    return integrate_values(density.grid, slices, region)
