import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmx.grid import (
    A_CO,
    J_MATRICES,
    BoundaryTrace,
    FieldState,
    GridError,
    GridSpec,
    discrete_curl,
    discrete_div,
    discrete_partial,
    maxwell_operator,
)

OPEN = ("open", "open", "open")


def open_box(n=6, extent=1.0):
    return GridSpec.box(n, extent, boundary=OPEN)


def test_gridspec_validation():
    with pytest.raises(GridError):
        GridSpec((4, 4, 4), (0.1, 0.0, 0.1))
    with pytest.raises(GridError):
        GridSpec((4, 4, 4), (0.1, 0.1, 0.1), boundary=("pec_bottom_open_top", "periodic", "periodic"))
    with pytest.raises(GridError):
        GridSpec((64, 64, 64), (0.1,) * 3, cell_cap=1000)
    g = GridSpec.box(8)
    assert g.shape == (8, 8, 9)
    assert g.has_pec


def test_field_state_shape_checked():
    g = GridSpec.box(4)
    with pytest.raises(Exception):
        FieldState(g, 0.0, np.zeros((6, 4, 4, 4)))
    with pytest.raises(Exception):
        BoundaryTrace(g, 0.0, np.zeros((3, 5, 4)))


def test_constant_has_zero_derivative():
    g = open_box()
    f = np.full(g.shape, 3.7)
    for a in (1, 2, 3):
        assert np.max(np.abs(discrete_partial(f, a, g))) < 1e-12


def test_quadratic_exact_everywhere():
    # central and one-sided stencils are exact on per-axis quadratics
    g = GridSpec((7, 5, 6), (0.3, 0.2, 0.15), origin=(-1.0, 0.5, 2.0), boundary=OPEN)
    x1, x2, x3 = g.mesh()
    f = x1**2 - 3 * x1 * x2 + 2 * x3**2 * x1 + x2**2
    assert np.allclose(discrete_partial(f, 1, g), 2 * x1 - 3 * x2 + 2 * x3**2, atol=1e-11)
    assert np.allclose(discrete_partial(f, 2, g), -3 * x1 + 2 * x2, atol=1e-11)
    assert np.allclose(discrete_partial(f, 3, g), 4 * x3 * x1, atol=1e-11)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=10, max_size=10), st.integers(3, 8))
def test_quadratic_exactness_property(c, n):
    g = GridSpec((n, n + 1, n + 2), (0.7 / n, 1.1 / n, 0.9 / n), boundary=OPEN)
    x, y, z = g.mesh()
    f = c[0] + c[1] * x + c[2] * y + c[3] * z + c[4] * x * x + c[5] * y * y + c[6] * z * z + c[7] * x * y + c[8] * y * z + c[9] * x * z
    exact = [c[1] + 2 * c[4] * x + c[7] * y + c[9] * z, c[2] + 2 * c[5] * y + c[7] * x + c[8] * z,
             c[3] + 2 * c[6] * z + c[8] * y + c[9] * x]
    for a in (1, 2, 3):
        assert np.allclose(discrete_partial(f, a, g), exact[a - 1], atol=1e-9)


def test_periodic_sine_second_order():
    errs = []
    for n in (16, 32, 64):
        g = GridSpec.box((n, 4, 4), 1.0, boundary=("periodic",) * 3)
        x1 = g.mesh()[0]
        d = discrete_partial(np.sin(2 * np.pi * x1), 1, g)
        errs.append(np.max(np.abs(d - 2 * np.pi * np.cos(2 * np.pi * x1))))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.9)


def test_axis_errors():
    g = GridSpec((2, 8, 8), (0.1,) * 3, boundary=OPEN)
    with pytest.raises(GridError):
        discrete_partial(np.zeros(g.shape), 1, g)
    with pytest.raises(GridError):
        discrete_partial(np.zeros(g.shape), 4, g)


def test_curl_examples():
    g = open_box()
    x1, x2, x3 = g.mesh()
    z = np.zeros(g.shape)
    curl = discrete_curl(np.stack([z, z, x1]), g)
    assert np.allclose(curl[0], 0) and np.allclose(curl[1], -1) and np.allclose(curl[2], 0)
    assert np.allclose(discrete_div(np.stack([x1, x2, x3]), g), 3.0)
    grad = np.stack([x2 * x3, x1 * x3, x1 * x2])
    assert np.max(np.abs(discrete_curl(grad, g))) < 1e-12


def test_curl_matches_j_matrices():
    rng = np.random.default_rng(3)
    g = GridSpec.box(5)
    v = rng.standard_normal((3,) + g.shape)
    d = [discrete_partial(v, j, g) for j in (1, 2, 3)]
    via_j = sum(np.einsum("ab,b...->a...", J_MATRICES[j], d[j]) for j in range(3))
    assert np.allclose(discrete_curl(v, g), via_j, atol=1e-12)
    u = rng.standard_normal((6,) + g.shape)
    du = [discrete_partial(u, j, g) for j in (1, 2, 3)]
    via_a = sum(np.einsum("ab,b...->a...", A_CO[j], du[j]) for j in range(3))
    assert np.allclose(maxwell_operator(u, g), via_a, atol=1e-12)


def test_div_curl_vanishes():
    # the one-dimensional stencils act on different axes and commute, so the
    # O(h^2) bound holds in the strongest form: roundoff
    for n in (12, 24, 48):
        g = GridSpec.box(n, boundary=("periodic", "periodic", "open"))
        x1, x2, x3 = g.mesh()
        v = np.stack([np.sin(2 * np.pi * x2) * x3**3, np.cos(2 * np.pi * x1) * np.exp(x3), np.sin(2 * np.pi * (x1 + x2)) * x3])
        curl = discrete_curl(v, g)
        assert np.max(np.abs(discrete_div(curl, g))) <= 1e-12 * n * np.max(np.abs(curl))
