"""One-step random linear propagator ``U = (I + H/2)^-1 (I - H/2)``.

``H = -i h c d_xx + sqrt(gamma h) (chi . sigma) d_x`` for one time step of
size ``h`` with scaled Wiener increments ``chi``. ``H`` is ``i`` times a
Hermitian operator in both spatial backends, so the Cayley step is an exact
discrete isometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .errors import InvalidParams, SingularSystem
from .field import Grid1D, SpinorField, pauli_dot


@dataclass(frozen=True)
class LinearOperatorParams:
    step: float
    gamma: float
    chi: tuple
    dispersion: float = 0.5

    def __post_init__(self):
        if not self.step > 0:
            raise InvalidParams(f"step must be positive, got {self.step}")
        if not self.gamma >= 0:
            raise InvalidParams(f"gamma must be nonnegative, got {self.gamma}")
        object.__setattr__(self, "chi", tuple(float(c) for c in self.chi))

    @property
    def noise_scale(self) -> float:
        return math.sqrt(self.gamma * self.step)


def _apply_pauli(chi, a, b):
    """``(chi . sigma) @ (a, b)`` for component arrays ``a, b``."""
    c1, c2, c3 = chi
    return c3 * a + (c1 - 1j * c2) * b, (c1 + 1j * c2) * a - c3 * b


class SpectralPropagator:
    """Per-mode 2x2 Cayley matrices on a periodic grid.

    Every per-mode matrix has the form ``u0 I + u1 (chi . sigma)``, so only
    the two scalar coefficient arrays are stored. The inverse ``(I + H/2)^-1``
    is kept in the same form for the implicit schemes.
    """

    def __init__(self, params: LinearOperatorParams, grid: Grid1D):
        if not grid.spectral:
            raise InvalidParams("spectral propagator needs a periodic grid")
        self.params = params
        self.grid = grid
        xi = grid.wavenumbers
        # Fourier symbol of H is i (a I + b P) with P = chi . sigma
        a = params.step * params.dispersion * grid.wavenumbers_squared
        b = params.noise_scale * xi
        s2 = sum(c * c for c in params.chi)
        self._alpha = 1.0 + 0.5j * a
        b2s2 = (0.25 * s2) * b**2
        self._den = self._alpha**2 + b2s2
        self._b = b
        self._u0 = (1.0 + 0.25 * a**2 - b2s2) / self._den
        self._u1 = -1j * b / self._den
        self._v = None

    def _mul(self, c0, c1, hat):
        pa, pb = _apply_pauli(self.params.chi, hat[0], hat[1])
        return np.stack([c0 * hat[0] + c1 * pa, c0 * hat[1] + c1 * pb])

    def apply_hat(self, hat):
        """Apply ``U`` to Fourier coefficients of shape ``(2, M)``."""
        return self._mul(self._u0, self._u1, hat)

    def solve_hat(self, hat):
        """Apply ``(I + H/2)^-1`` to Fourier coefficients."""
        if self._v is None:
            self._v = (self._alpha / self._den, -0.5j * self._b / self._den)
        return self._mul(*self._v, hat)

    def apply_values(self, values):
        return np.fft.ifft(self.apply_hat(np.fft.fft(values)))

    def solve_values(self, values):
        return np.fft.ifft(self.solve_hat(np.fft.fft(values)))

    def apply(self, X: SpinorField) -> SpinorField:
        return SpinorField(X.grid, self.apply_values(X.values))

    def mode_matrices(self) -> np.ndarray:
        """Dense per-mode matrices ``U(xi)``, shape ``(M, 2, 2)``."""
        P = pauli_dot(self.params.chi)
        return self._u0[:, None, None] * np.eye(2) + self._u1[:, None, None] * P


# interleaved unknown ordering (node j, component c) -> 2j + c gives a
# block-tridiagonal matrix with three sub- and super-diagonals
_KL = _KU = 3


class BandedPropagator:
    """Central-difference Cayley step on the interior nodes of a Dirichlet grid.

    ``potential`` (real, one value per node) adds ``-i h diag(potential)`` to
    ``H``; the relaxation scheme uses it to fold its nonlinear term into the
    linear solve.
    """

    def __init__(self, params: LinearOperatorParams, grid: Grid1D, potential=None):
        if grid.spectral:
            raise InvalidParams("banded propagator needs a Dirichlet grid")
        self.params = params
        self.grid = grid
        m = grid.size
        dx = grid.dx
        h, c = params.step, params.dispersion
        P = pauli_dot(params.chi)
        lap = -1j * h * c / dx**2
        drift = params.noise_scale / (2 * dx) * P
        self._diag = -2.0 * lap * np.ones(m, dtype=complex)
        if potential is not None:
            self._diag = self._diag - 1j * h * np.asarray(potential, dtype=float)
        # off-diagonal 2x2 blocks: coupling of node j to j+1 and j-1
        self._upper = lap * np.eye(2) + drift
        self._lower = lap * np.eye(2) - drift
        self._factor()

    def _band(self, sign):
        """Band storage of ``I + sign * H/2`` in LAPACK gbtrf layout."""
        m = self.grid.size
        n = 2 * m
        ab = np.zeros((2 * _KL + _KU + 1, n), dtype=complex)
        mid = _KL + _KU  # entry (i, j) is stored at ab[mid + i - j, j]
        ab[mid] = 1.0 + 0.5 * sign * np.repeat(self._diag, 2)
        for r in range(2):
            for cc in range(2):
                # upper block: row 2j+r, col 2(j+1)+cc, offset 2+cc-r
                d = 2 + cc - r
                cols = 2 * np.arange(1, m) + cc
                ab[mid - d, cols] = 0.5 * sign * self._upper[r, cc]
                # lower block: row 2(j+1)+r, col 2j+cc, offset cc-r-2
                d = cc - r - 2
                cols = 2 * np.arange(0, m - 1) + cc
                ab[mid - d, cols] = 0.5 * sign * self._lower[r, cc]
        return ab

    def _factor(self):
        ab = self._band(+1.0)
        lu, piv, info = lapack.zgbtrf(ab, _KL, _KU)
        if info != 0:
            raise SingularSystem(f"banded LU failed (info={info})")
        self._lu, self._piv = lu, piv

    def apply_h(self, values):
        """``H X`` (including any folded potential) with zero ghost nodes."""
        up = np.zeros_like(values)
        down = np.zeros_like(values)
        up[:, :-1] = values[:, 1:]
        down[:, 1:] = values[:, :-1]
        out = self._diag * values
        out = out + self._upper @ up + self._lower @ down
        return out

    def rhs(self, values):
        """``(I - H/2) X``."""
        return values - 0.5 * self.apply_h(values)

    def solve_values(self, rhs):
        """Solve ``(I + H/2) Y = rhs``."""
        b = np.ascontiguousarray(rhs.T).reshape(-1)
        y, info = lapack.zgbtrs(self._lu, _KL, _KU, b, self._piv)
        if info != 0:
            raise SingularSystem(f"banded solve failed (info={info})")
        return y.reshape(-1, 2).T

    def apply_values(self, values):
        return self.solve_values(self.rhs(values))

    def apply(self, X: SpinorField) -> SpinorField:
        return SpinorField(X.grid, self.apply_values(X.values))

    def dense_h(self) -> np.ndarray:
        """Assembled ``H`` as a dense ``(2m, 2m)`` matrix in interleaved order."""
        n = 2 * self.grid.size
        eye = np.eye(n, dtype=complex)
        cols = [self.apply_h(eye[:, k].reshape(-1, 2).T).T.reshape(-1) for k in range(n)]
        return np.stack(cols, axis=1)


def build_propagator(params: LinearOperatorParams, grid: Grid1D, potential=None):
    if grid.spectral:
        if potential is not None:
            raise InvalidParams("a folded potential is only supported on the banded backend")
        return SpectralPropagator(params, grid)
    return BandedPropagator(params, grid, potential)


def apply(prop, X: SpinorField) -> SpinorField:
    return prop.apply(X)
