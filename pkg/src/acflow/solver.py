"""Time integration of the reaction-diffusion flow and initial-data builders.

The flow is ``du/dt = lap(u) - W'(u)/eps^2``.  Three schemes are provided:

``semi-implicit-spectral``
    Backward-Euler diffusion, explicit reaction:
    ``(I - dt*lap) u_new = u - dt*W'(u)/eps^2``, solved exactly in Fourier
    space.  First order; any spectrally stationary state is an exact fixed
    point.  Stable for ``dt <= 0.5*eps^2``.

``semi-implicit-cnab2``
    Crank-Nicolson on the shifted linear part ``lap - kappa/eps^2`` plus
    Adams-Bashforth 2 on the remaining nonlinearity (kappa = 1 centers the
    explicit Jacobian range).  Second order, same fixed-point property, used
    wherever the verification harness needs the time-discretization error
    well below the identity being checked.  Stable for ``dt <= eps^2/3``.

``explicit-rk2``
    Heun's method, retained as an independent cross-check oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import DOUBLE_WELL, Grid, PotentialSpec, ScalarField, Trajectory
from .operators import laplacian_values

__all__ = [
    "SCHEMES",
    "SolverConfig",
    "SolverConfigError",
    "InterfaceDataError",
    "validate_config",
    "ac_residual",
    "ac_residual_values",
    "step",
    "evolve",
    "prepare_interface",
]

SCHEME_SEMI_IMPLICIT = "semi-implicit-spectral"
SCHEME_CNAB2 = "semi-implicit-cnab2"
SCHEME_RK2 = "explicit-rk2"
SCHEMES = (SCHEME_SEMI_IMPLICIT, SCHEME_CNAB2, SCHEME_RK2)

# Stabilization shift for the cnab2 scheme: the explicit Jacobian W''(u) - kappa
# then spans [-3, 3] on [-1, 1], giving the Adams-Bashforth part the stability
# bound dt <= eps^2 / 3.
CNAB2_SHIFT = 1.0

CLAMP = 1.0 - 1e-12


class SolverConfigError(ValueError):
    """A solver configuration violates its scheme's step-size constraint."""


class InterfaceDataError(ValueError):
    """Signed-distance input is not 1-Lipschitz in the transition band."""


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    t_end: float
    scheme: str = SCHEME_SEMI_IMPLICIT
    sample_every: int = 1

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise SolverConfigError(f"unknown scheme {self.scheme!r}, expected one of {SCHEMES}")
        if not self.dt > 0:
            raise SolverConfigError(f"dt must be positive, got {self.dt}")
        if self.t_end < 0:
            raise SolverConfigError(f"t_end must be >= 0, got {self.t_end}")
        if self.sample_every < 1:
            raise SolverConfigError(f"sample_every must be >= 1, got {self.sample_every}")


def dt_limit(scheme: str, grid: Grid, epsilon: float, potential: PotentialSpec = DOUBLE_WELL) -> float:
    e2 = epsilon**2
    if scheme == SCHEME_SEMI_IMPLICIT:
        return 0.5 * e2
    if scheme == SCHEME_CNAB2:
        return e2 / 3.0
    if scheme == SCHEME_RK2:
        return 0.2 * min(grid.spacing**2, e2 / potential.max_curvature)
    raise SolverConfigError(f"unknown scheme {scheme!r}")


def validate_config(config: SolverConfig, field: ScalarField) -> None:
    limit = dt_limit(config.scheme, field.grid, field.epsilon, field.potential)
    if config.dt > limit * (1 + 1e-12):
        raise SolverConfigError(
            f"dt={config.dt:g} exceeds the {config.scheme} limit {limit:g} "
            f"(epsilon={field.epsilon:g}, spacing={field.grid.spacing:g})"
        )


def ac_residual_values(field: ScalarField) -> np.ndarray:
    """Right-hand side ``lap(u) - W'(u)/eps^2``; equals du/dt on solutions."""
    lap = laplacian_values(field.grid, field.values)
    return lap - field.potential.derivative(field.values) / field.epsilon**2


def ac_residual(field: ScalarField) -> ScalarField:
    return field.with_values(ac_residual_values(field))


class _Stepper:
    """Scheme state (Fourier symbols, previous reaction term) for one run."""

    def __init__(self, field: ScalarField, config: SolverConfig):
        validate_config(config, field)
        self.config = config
        self.grid = field.grid
        self.eps2 = field.epsilon**2
        self.potential = field.potential
        k2 = sum(k * k for k in self.grid.wavenumbers(zero_nyquist=False))
        dt = config.dt
        if config.scheme == SCHEME_SEMI_IMPLICIT:
            self._solve = 1.0 / (1.0 + dt * k2)
        elif config.scheme == SCHEME_CNAB2:
            sym = -k2 - CNAB2_SHIFT / self.eps2
            self._num = 1.0 + 0.5 * dt * sym
            self._den = 1.0 / (1.0 - 0.5 * dt * sym)
        self._prev_reaction: np.ndarray | None = None

    def _reaction(self, u: np.ndarray) -> np.ndarray:
        return self.potential.derivative(u) / self.eps2

    def _shifted_reaction(self, u: np.ndarray) -> np.ndarray:
        return (self.potential.derivative(u) - CNAB2_SHIFT * u) / self.eps2

    def advance(self, field: ScalarField) -> ScalarField:
        dt = self.config.dt
        u = field.values
        scheme = self.config.scheme
        if scheme == SCHEME_SEMI_IMPLICIT:
            rhs = np.fft.fftn(u - dt * self._reaction(u))
            new = np.fft.ifftn(rhs * self._solve).real
        elif scheme == SCHEME_CNAB2:
            n_k = self._shifted_reaction(u)
            n_prev = self._prev_reaction if self._prev_reaction is not None else n_k
            rhs = self._num * np.fft.fftn(u) - dt * np.fft.fftn(1.5 * n_k - 0.5 * n_prev)
            new = np.fft.ifftn(rhs * self._den).real
            self._prev_reaction = n_k
        else:  # explicit-rk2 (Heun)
            f = field
            k1 = ac_residual_values(f)
            mid = f.with_values(u + dt * k1)
            k2 = ac_residual_values(mid)
            new = u + 0.5 * dt * (k1 + k2)
        return field.with_values(new, time=field.time + dt)


def step(field: ScalarField, config: SolverConfig) -> ScalarField:
    """Advance one time step (cnab2 degrades to its one-step starter here)."""
    return _Stepper(field, config).advance(field)


def evolve(field: ScalarField, config: SolverConfig) -> Trajectory:
    """Run to ``t_end``, sampling every ``sample_every`` steps.

    ``t_end`` must be a whole number of steps and the step count a multiple
    of ``sample_every`` so the trajectory is uniformly sampled.
    """
    if config.t_end == 0:
        return Trajectory(frames=(field,), dt_sample=config.dt * config.sample_every)
    n_steps = round(config.t_end / config.dt)
    if n_steps < 1 or abs(n_steps * config.dt - config.t_end) > 1e-9 * config.t_end:
        raise SolverConfigError(
            f"t_end={config.t_end:g} is not a whole number of steps of dt={config.dt:g}"
        )
    if n_steps % config.sample_every != 0:
        raise SolverConfigError(
            f"step count {n_steps} is not a multiple of sample_every={config.sample_every}"
        )
    stepper = _Stepper(field, config)
    frames = [field]
    current = field
    for i in range(n_steps):
        current = stepper.advance(current)
        if (i + 1) % config.sample_every == 0:
            frames.append(current)
    return Trajectory(frames=tuple(frames), dt_sample=config.dt * config.sample_every)


def prepare_interface(
    signed_distance: Callable[..., np.ndarray],
    grid: Grid,
    epsilon: float,
    time: float = 0.0,
    potential: PotentialSpec = DOUBLE_WELL,
) -> ScalarField:
    """Well-prepared data ``u0 = tanh(d/eps)`` from a signed-distance function.

    ``signed_distance`` is called with broadcastable coordinate arrays.  Its
    gradient is probed by small central differences inside the transition
    band; exceeding unit slope there would break the non-positivity of the
    discrepancy, so it is an error.  The profile is clamped at +-(1 - 1e-12)
    to keep the inverse-profile diagnostic finite.
    """
    d = grid.sample(signed_distance)
    if not np.all(np.isfinite(d)):
        raise InterfaceDataError("signed distance evaluated to non-finite values")

    band_halfwidth = 5.0 * epsilon * math.atanh(1.0 - 1e-6)
    band = np.abs(d) <= min(band_halfwidth, 0.5 * grid.extent)
    if np.any(band):
        delta = 1e-4 * grid.extent
        coords = grid.dense_coords()
        grad_sq = np.zeros(grid.shape)
        for ax in range(grid.dim):
            shifted_plus = list(coords)
            shifted_minus = list(coords)
            shifted_plus[ax] = coords[ax] + delta
            shifted_minus[ax] = coords[ax] - delta
            g = (signed_distance(*shifted_plus) - signed_distance(*shifted_minus)) / (2 * delta)
            grad_sq += np.broadcast_to(g, grid.shape) ** 2
        worst = float(np.sqrt(np.max(grad_sq[band])))
        if worst > 1.0 + 1e-6:
            raise InterfaceDataError(
                f"|grad d| = {worst:.8f} > 1 + 1e-6 in the transition band; "
                "input is not a signed distance there"
            )

    u0 = np.clip(np.tanh(d / epsilon), -CLAMP, CLAMP)
    return ScalarField(grid=grid, values=u0, epsilon=epsilon, time=time, potential=potential)
