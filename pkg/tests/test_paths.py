import numpy as np
import pytest
from hypothesis import given, strategies as st

from geophase.errors import ValidationError
from geophase.evolution import TimeGrid, evolve
from geophase.paths import (SIGMA_X, SIGMA_Y, SIGMA_Z, axis_generator, block_loop, block_rotation, embed_two_level,
                            precession, random_block_path)


def test_axis_generator_normalizes():
    assert np.allclose(axis_generator([0, 0, 5]), SIGMA_Z / 2)
    assert np.allclose(axis_generator([1, 1, 0]), (SIGMA_X + SIGMA_Y) / (2 * np.sqrt(2)))


@pytest.mark.parametrize("axis", [[0, 0, 0], [1, 0]])
def test_axis_generator_rejects(axis):
    with pytest.raises(ValidationError):
        axis_generator(axis)


def test_embed_rejects_equal_levels():
    with pytest.raises(ValidationError):
        embed_two_level(SIGMA_X, 3, 1, 1)


def test_block_rotation_acts_inside_block():
    u = evolve(block_rotation([1, 0, 0], np.pi, dim=4, n=1, m=3), TimeGrid.uniform(1.0, 1))[-1]
    assert np.allclose(u[[0, 2]][:, [0, 2]], np.eye(2))
    assert abs(abs(u[3, 1]) - 1) < 1e-14


@pytest.mark.parametrize("theta", [np.pi / 6, np.pi / 3, np.pi / 2, 2.0])
@pytest.mark.parametrize("ramp", [False, True])
def test_precession_closes(theta, ramp):
    u = evolve(precession(theta, dim=3, n=0, m=2, ramp=ramp), TimeGrid.uniform(1.0, 2000))[-1]
    assert abs(abs(u[0, 0]) - 1) < 1e-6


@given(st.floats(0.0, 0.999), st.floats(0.1, 6.2), st.booleans())
def test_block_loop_visibility(eta, omega, ramp):
    u = evolve(block_loop(eta, omega, dim=3, n=2, m=0, ramp=ramp), TimeGrid.uniform(1.0, 400))[-1]
    assert abs(abs(u[2, 2]) - eta) < 1e-5
    assert abs(u[1, 1] - 1) < 1e-12


def test_block_loop_rejects_bad_visibility():
    with pytest.raises(ValidationError):
        block_loop(1.5, 1.0)


def test_random_block_path_is_su2_in_block(rng):
    path = random_block_path(rng, 4, 0, 2)
    u = evolve(path, TimeGrid.uniform(1.0, 3))[-1]
    sub = u[np.ix_([0, 2], [0, 2])]
    assert abs(np.linalg.det(sub) - 1) < 1e-12
    assert np.allclose(u[np.ix_([1, 3], [1, 3])], np.eye(2))
