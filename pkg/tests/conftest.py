import numpy as np
import pytest

from acflow import Grid, ScalarField, prepare_interface
from acflow.initial_data import circle_distance, plane_pair_distance


@pytest.fixture(scope="session")
def grid_1d():
    # box size keeps the companion fold 12.8 eps away at eps = 0.05
    return Grid(dim=1, extent=2.56, points=1024)


@pytest.fixture(scope="session")
def grid_2d():
    return Grid(dim=2, extent=1.2, points=256)


def standing_wave(grid: Grid, epsilon: float) -> ScalarField:
    """Flat layer pair: studied interface through 0, companion on the seam."""
    return prepare_interface(plane_pair_distance(grid.extent), grid, epsilon)


def circle_field(grid: Grid, epsilon: float, radius: float) -> ScalarField:
    return prepare_interface(circle_distance(radius), grid, epsilon)


@pytest.fixture(scope="session")
def wave_1d(grid_1d):
    return standing_wave(grid_1d, epsilon=0.05)


@pytest.fixture(scope="session")
def circle_traj_short(grid_2d):
    """Short shrinking-circle run shared by the identity tests."""
    from acflow import SolverConfig, evolve

    f = circle_field(grid_2d, 0.02, 0.35)
    dt = 0.0625 * 0.02**2
    cfg = SolverConfig(dt=dt, t_end=400 * dt, scheme="semi-implicit-cnab2", sample_every=4)
    return evolve(f, cfg)


@pytest.fixture(scope="session")
def perturbed_traj_small():
    """Gently perturbed flat layer, a two-mode graph over the base axis."""
    from acflow import Grid, SolverConfig, evolve, prepare_interface
    from acflow.initial_data import graph_pair_distance, sine_mode

    g = Grid(dim=2, extent=1.28, points=256)
    eps = 0.02
    mode = sine_mode(0.01, 2, 1.28)
    dist = graph_pair_distance(1.28, [mode])
    field = prepare_interface(dist, g, eps)
    dt = 5e-5
    cfg = SolverConfig(dt=dt, t_end=100 * dt, scheme="semi-implicit-cnab2", sample_every=20)
    return evolve(field, cfg)


@pytest.fixture(scope="session")
def wave_2d(grid_2d):
    return standing_wave(grid_2d, epsilon=0.02)


def zero_crossing_radius(field: ScalarField) -> float:
    """Largest zero crossing of the central row, linearly interpolated.

    Independent radius oracle for circular interfaces: no level-set
    machinery, just bracketing on the lattice along the x-axis through the
    center.
    """
    grid = field.grid
    n_mid = grid.points // 2
    if grid.dim == 2:
        row = field.values[:, n_mid]
    elif grid.dim == 3:
        row = field.values[:, n_mid, n_mid]
    else:
        row = field.values
    x = grid.axis()
    radii = []
    for i in range(grid.points - 1):
        a, b = row[i], row[i + 1]
        if a == 0.0:
            radii.append(abs(x[i]))
        elif a * b < 0:
            radii.append(abs(x[i] - a * (x[i + 1] - x[i]) / (b - a)))
    if not radii:
        raise AssertionError("no zero crossing found")
    return max(radii)
