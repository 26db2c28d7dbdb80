import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smanakov.errors import InvalidParams
from smanakov.field import Grid1D, SpinorField, l2_norm, pauli_dot
from smanakov.propagator import (
    BandedPropagator,
    LinearOperatorParams,
    SpectralPropagator,
    apply,
    build_propagator,
)

from conftest import random_values, smooth_values

chis = st.tuples(*[st.floats(-4, 4)] * 3)


def cayley_oracle(h, gamma, chi, xi, c=0.5):
    """Dense 2x2 Cayley matrix of the Fourier symbol, built independently."""
    M = 1j * (h * c * xi**2 * np.eye(2) + math.sqrt(gamma * h) * xi * pauli_dot(chi))
    return np.linalg.solve(np.eye(2) + M / 2, np.eye(2) - M / 2)


@given(chis, st.floats(1e-4, 1.0), st.floats(0, 10))
@settings(max_examples=30, deadline=None)
def test_mode_matrices_match_dense_cayley(chi, h, gamma):
    g = Grid1D(5.0, 32)
    prop = SpectralPropagator(LinearOperatorParams(h, gamma, chi), g)
    U = prop.mode_matrices()
    for k in (0, 1, 7, 16, 31):
        np.testing.assert_allclose(U[k], cayley_oracle(h, gamma, chi, g.wavenumbers[k]), atol=1e-12)
    np.testing.assert_allclose(np.abs(np.linalg.det(U)), 1.0, atol=1e-12)


def test_deterministic_mode_is_scalar_cayley():
    g = Grid1D(3.0, 16)
    h = 0.1
    U = SpectralPropagator(LinearOperatorParams(h, 0.0, (0.3, -1, 2)), g).mode_matrices()
    xi2 = g.wavenumbers**2
    scalar = (1 - 0.25j * h * xi2) / (1 + 0.25j * h * xi2)
    np.testing.assert_allclose(U, scalar[:, None, None] * np.eye(2), atol=1e-15)
    np.testing.assert_allclose(U[0], np.eye(2), atol=1e-15)


def test_pure_mode_input(grid256):
    k = 9
    xi = grid256.wavenumbers[k]
    v = np.array([0.6, 0.8j])
    X = SpinorField(grid256, v[:, None] * np.exp(1j * xi * grid256.x))
    prop = build_propagator(LinearOperatorParams(0.05, 2.0, (0.5, 1.0, -0.3)), grid256)
    Y = apply(prop, X)
    expected = (prop.mode_matrices()[k] @ v)[:, None] * np.exp(1j * xi * grid256.x)
    np.testing.assert_allclose(Y.values, expected, atol=1e-12)


def test_zero_field(grid256, fd_grid):
    for g in (grid256, fd_grid):
        prop = build_propagator(LinearOperatorParams(0.1, 1.0, (1, 2, 3)), g)
        assert np.all(apply(prop, SpinorField.zeros(g)).values == 0)


def test_spectral_propagators_commute(grid256):
    rng = np.random.default_rng(0)
    X = random_values(rng, grid256)
    params = LinearOperatorParams(0.02, 1.0, (0.4, -0.7, 1.1))
    p1 = SpectralPropagator(params, grid256)
    p2 = SpectralPropagator(params, grid256)
    np.testing.assert_allclose(p1.apply_values(p2.apply_values(X)), p2.apply_values(p1.apply_values(X)),
                               atol=1e-12)


def test_solve_inverts_implicit_part(grid256):
    rng = np.random.default_rng(1)
    X = random_values(rng, grid256)
    prop = SpectralPropagator(LinearOperatorParams(0.3, 2.0, (1, 0, -1)), grid256)
    # U + I = 2 (I + H/2)^-1
    np.testing.assert_allclose(prop.apply_values(X) + X, 2 * prop.solve_values(X), atol=1e-12)


def test_banded_operator_is_i_times_hermitian(fd_grid):
    g = Grid1D(2.0, 12, "dirichlet")
    prop = BandedPropagator(LinearOperatorParams(0.2, 1.5, (0.3, -1.0, 0.7)), g,
                            potential=np.linspace(0, 1, g.size))
    H = prop.dense_h()
    np.testing.assert_allclose(H, -H.conj().T, atol=1e-14)
    rng = np.random.default_rng(3)
    X = random_values(rng, g)
    n = 2 * g.size
    x_flat = X.T.reshape(-1)
    dense = np.linalg.solve(np.eye(n) + H / 2, (np.eye(n) - H / 2) @ x_flat)
    np.testing.assert_allclose(prop.apply_values(X).T.reshape(-1), dense, atol=1e-13)


@given(chis, st.floats(1e-4, 0.5), st.floats(0, 9), st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_isometry_both_backends(chi, h, gamma, seed):
    rng = np.random.default_rng(seed)
    for g, tol in ((Grid1D(20 * math.pi, 256), 1e-12), (Grid1D(20.0, 512, "dirichlet"), 1e-10)):
        X = SpinorField(g, random_values(rng, g))
        Y = apply(build_propagator(LinearOperatorParams(h, gamma, chi), g), X)
        assert abs(l2_norm(Y) - l2_norm(X)) <= tol * l2_norm(X)


def test_fd_approaches_spectral():
    # a smooth pulse: the two backends agree to second order in dx
    params = LinearOperatorParams(0.05, 1.0, (0.5, -0.3, 0.8))
    errs = []
    for m in (512, 1024, 2048):
        gs = Grid1D(20.0, m)
        gf = Grid1D(20.0, m, "dirichlet")
        ys = SpectralPropagator(params, gs).apply_values(smooth_values(gs))
        yf = BandedPropagator(params, gf).apply_values(smooth_values(gf))
        errs.append(np.max(np.abs(ys[:, 1:] - yf)))
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.15)
    assert errs[1] / errs[2] == pytest.approx(4, rel=0.15)


def test_backend_mismatch(grid256, fd_grid):
    params = LinearOperatorParams(0.1, 1.0, (0, 0, 0))
    with pytest.raises(InvalidParams):
        SpectralPropagator(params, fd_grid)
    with pytest.raises(InvalidParams):
        BandedPropagator(params, grid256)
    with pytest.raises(InvalidParams):
        LinearOperatorParams(0.0, 1.0, (0, 0, 0))
    with pytest.raises(InvalidParams):
        LinearOperatorParams(0.1, -1.0, (0, 0, 0))
