"""Grids, two-component fields, observables and the nonlinearity.

A field is a pair ``(X1, X2)`` of complex functions sampled on a uniform
1-D grid over ``[-a, a]``. Periodic grids use the pseudospectral backend
(FFT differentiation); Dirichlet grids use second-order finite differences
and store interior nodes only, the boundary values being implicit zeros.

All integrals use the rectangle rule ``dx * sum(...)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidParams, ZeroMass

PERIODIC = "periodic"
DIRICHLET = "dirichlet"

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on ``[-half_width, half_width]`` with spacing ``2a/M``.

    ``boundary="periodic"`` selects the spectral backend and requires
    ``num_points`` to be a power of two; ``"dirichlet"`` selects central
    finite differences on the ``M - 1`` interior nodes.
    """

    half_width: float
    num_points: int
    boundary: str = PERIODIC

    def __post_init__(self):
        if not self.half_width > 0:
            raise InvalidParams(f"half_width must be positive, got {self.half_width}")
        if self.num_points < 4:
            raise InvalidParams(f"num_points must be >= 4, got {self.num_points}")
        if self.boundary not in (PERIODIC, DIRICHLET):
            raise InvalidParams(f"unknown boundary {self.boundary!r}")
        if self.boundary == PERIODIC and self.num_points & (self.num_points - 1):
            raise InvalidParams(
                f"spectral grids need a power-of-two size, got {self.num_points}"
            )

    @classmethod
    def from_spacing(cls, half_width, dx, boundary=DIRICHLET):
        m = round(2 * half_width / dx)
        if not math.isclose(m * dx, 2 * half_width, rel_tol=1e-9):
            raise InvalidParams(f"dx={dx} does not divide the interval [-{half_width}, {half_width}]")
        return cls(half_width, m, boundary)

    @property
    def spectral(self) -> bool:
        return self.boundary == PERIODIC

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / self.num_points

    @property
    def size(self) -> int:
        """Number of stored nodes per component."""
        return self.num_points if self.spectral else self.num_points - 1

    @cached_property
    def x(self) -> np.ndarray:
        j = np.arange(self.num_points) if self.spectral else np.arange(1, self.num_points)
        return -self.half_width + j * self.dx

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Fourier modes ``pi k / a`` in FFT order, Nyquist included."""
        if not self.spectral:
            raise InvalidParams("wavenumbers are only defined on periodic grids")
        return 2.0 * np.pi * np.fft.fftfreq(self.num_points, d=self.dx)

    @cached_property
    def wavenumbers_squared(self) -> np.ndarray:
        return self.wavenumbers**2

    def derivative(self, values: np.ndarray) -> np.ndarray:
        """First derivative along the last axis with the backend's rule."""
        if self.spectral:
            return np.fft.ifft(1j * self.wavenumbers * np.fft.fft(values))
        padded = np.zeros(values.shape[:-1] + (values.shape[-1] + 2,), dtype=values.dtype)
        padded[..., 1:-1] = values
        return (padded[..., 2:] - padded[..., :-2]) / (2.0 * self.dx)


@dataclass(frozen=True, eq=False)
class SpinorField:
    """Two-component complex field; ``values`` has shape ``(2, grid.size)``."""

    grid: Grid1D
    values: np.ndarray
    blown_up: bool = False

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        if values.shape != (2, self.grid.size):
            raise InvalidParams(
                f"expected values of shape (2, {self.grid.size}), got {values.shape}"
            )
        if not self.blown_up and not np.all(np.isfinite(values)):
            raise InvalidParams("non-finite field values on a field not flagged as blown up")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros((2, grid.size), dtype=complex))

    def __mul__(self, c):
        return SpinorField(self.grid, c * self.values, self.blown_up)

    __rmul__ = __mul__

    def __add__(self, other):
        return SpinorField(self.grid, self.values + other.values)

    def __sub__(self, other):
        return SpinorField(self.grid, self.values - other.values)

    @property
    def density(self) -> np.ndarray:
        """Pointwise ``|X1|^2 + |X2|^2``."""
        return _density(self.values)


def _density(values):
    return (values.real**2 + values.imag**2).sum(axis=-2)


# -- norms and observables ---------------------------------------------------

def l2_norm(X: SpinorField) -> float:
    return math.sqrt(X.grid.dx * float(_density(X.values).sum()))


def h1_norm(X: SpinorField) -> float:
    return h1_norm_values(X.values, X.grid)


def h1_norm_values(values, grid) -> float:
    """H1 norm of a raw ``(2, n)`` array; used on hot paths."""
    dv = grid.derivative(values)
    return math.sqrt(grid.dx * float(_density(values).sum() + _density(dv).sum()))


def h1_norm_hat(hat, grid) -> float:
    """H1 norm from unnormalised FFT coefficients (Parseval), spectral grids only."""
    weight = 1.0 + grid.wavenumbers_squared
    total = float((weight * _density(hat)).sum())
    return math.sqrt(grid.dx * total / grid.num_points)


def hamiltonian(X: SpinorField) -> float:
    dx = X.grid.dx
    kinetic = 0.5 * dx * float(_density(X.grid.derivative(X.values)).sum())
    potential = 0.25 * dx * float((X.density**2).sum())
    return kinetic - potential


def mass_center(X: SpinorField) -> float:
    rho = X.density
    mass = rho.sum()
    if mass == 0:
        raise ZeroMass("mass center of a zero field")
    return float((X.grid.x * rho).sum() / mass)


def pulse_width(X: SpinorField) -> float:
    rho = X.density
    mass = rho.sum()
    if mass == 0:
        raise ZeroMass("pulse width of a zero field")
    center = (X.grid.x * rho).sum() / mass
    return float((((X.grid.x - center) ** 2) * rho).sum() / mass)


OBSERVABLES = {
    "l2": l2_norm,
    "h1": h1_norm,
    "hamiltonian": hamiltonian,
    "mass_center": mass_center,
    "pulse_width": pulse_width,
}


def pauli_dot(chi) -> np.ndarray:
    """``chi1*sigma1 + chi2*sigma2 + chi3*sigma3`` as a 2x2 complex array."""
    chi = np.asarray(chi, dtype=float)
    return np.tensordot(chi, PAULI, axes=1)


# -- nonlinearity ------------------------------------------------------------

def _bump_edge(t):
    return np.exp(-1.0 / t) if t > 0 else 0.0


def cutoff_bump(s: float) -> float:
    """Smooth cutoff: 1 on ``[0, 1]``, 0 on ``[2, inf)``, C-infinity between."""
    if s <= 1.0:
        return 1.0
    if s >= 2.0:
        return 0.0
    up, down = _bump_edge(2.0 - s), _bump_edge(s - 1.0)
    return float(up / (up + down))


@dataclass(frozen=True)
class NonlinearitySpec:
    """Power-law nonlinearity ``coupling * theta_R * (|X|^2)^exponent * X``.

    ``cutoff`` is the radius ``R`` of the optional H1 truncation; ``coupling=0``
    switches the nonlinear term off entirely.
    """

    exponent: float = 1.0
    cutoff: float | None = None
    coupling: float = 1.0

    def __post_init__(self):
        if not self.exponent > 0:
            raise InvalidParams(f"exponent must be positive, got {self.exponent}")
        if self.cutoff is not None and not self.cutoff > 0:
            raise InvalidParams(f"cutoff radius must be positive, got {self.cutoff}")


def potential_values(values, grid, spec: NonlinearitySpec) -> np.ndarray:
    """Real multiplier ``V`` such that the nonlinearity equals ``V * X``."""
    rho = _density(values)
    pot = rho if spec.exponent == 1 else rho**spec.exponent
    scale = spec.coupling
    if spec.cutoff is not None:
        scale = scale * cutoff_bump(h1_norm_values(values, grid) ** 2 / spec.cutoff)
    if scale != 1:
        pot = scale * pot
    return pot


def nonlinearity(X: SpinorField, spec: NonlinearitySpec = NonlinearitySpec()) -> SpinorField:
    return SpinorField(X.grid, potential_values(X.values, X.grid, spec) * X.values)


# -- initial values ----------------------------------------------------------

SOLITON_DEFAULTS = dict(eta=1.0, kappa=0.0, alpha=0.0, tau=0.0, theta=math.pi / 4, phi1=0.0, phi2=0.0)

# Sum of two co-centred solitons used in the blowup studies.
SOLITON_SUM_DEFAULT = (
    dict(eta=5.0, kappa=0.0, alpha=0.0, tau=0.0, theta=math.pi / 4, phi1=0.0, phi2=0.0),
    dict(eta=1.0, kappa=math.pi / 3, alpha=0.0, tau=0.0, theta=math.pi / 4, phi1=3.0, phi2=0.0),
)

# Coefficient sets for the soliton comparison runs; unspecified entries are 0.
SOLITON_SETS = {
    1: dict(eta=1.0, theta=math.pi / 3, phi1=math.pi / 4, phi2=math.pi / 2, kappa=2.0),
    2: dict(eta=1.2, theta=math.pi / 2, phi1=-math.pi / 4, phi2=math.pi / 4, kappa=3.0),
    3: dict(eta=1.5, theta=-math.pi / 2, phi1=4 * math.pi / 5, phi2=-math.pi / 2, kappa=4.0),
}


def soliton_values(x, eta=1.0, kappa=0.0, alpha=0.0, tau=0.0, theta=math.pi / 4, phi1=0.0, phi2=0.0):
    """Bright soliton ``eta sech(eta (x - tau)) exp(-i kappa (x - tau) + i alpha)`` times a unit spinor."""
    if not eta > 0:
        raise InvalidParams(f"eta must be positive, got {eta}")
    xs = x - tau
    envelope = eta / np.cosh(eta * xs) * np.exp(-1j * kappa * xs + 1j * alpha)
    return np.stack(
        [
            math.cos(theta / 2) * np.exp(1j * phi1) * envelope,
            math.sin(theta / 2) * np.exp(1j * phi2) * envelope,
        ]
    )


def exact_soliton(grid: Grid1D, t: float, **params) -> SpinorField:
    """The deterministic soliton at time ``t`` (dispersion coefficient 1/2)."""
    p = {**SOLITON_DEFAULTS, **params}
    eta, kappa = p["eta"], p["kappa"]
    tau_t = p["tau"] - kappa * t
    alpha_t = p["alpha"] + 0.5 * (eta**2 + kappa**2) * t
    xs = grid.x - tau_t
    return SpinorField(grid, soliton_values(xs, eta, kappa, alpha_t, 0.0, p["theta"], p["phi1"], p["phi2"]))


INITIAL_KINDS = ("soliton", "soliton_sum", "gaussian", "modified")
_ALIASES = {"IV1": "soliton", "IV2": "soliton_sum", "IV3": "gaussian", "IV4": "modified"}


def initial_condition(kind: str, params: dict | None, grid: Grid1D) -> SpinorField:
    """Sample one of the closed-form initial values on ``grid``.

    ``soliton`` takes ``eta, kappa, alpha, tau, theta, phi1, phi2`` (missing
    keys default to the standard soliton, or to coefficient set ``set`` if
    given); ``soliton_sum`` takes an optional ``solitons`` list of such dicts.
    ``gaussian`` and ``modified`` take no parameters.
    """
    kind = _ALIASES.get(kind, kind)
    params = dict(params or {})
    x = grid.x
    if kind == "soliton":
        base = dict(SOLITON_DEFAULTS)
        if "set" in params:
            base.update(SOLITON_SETS[int(params.pop("set"))])
        base.update(params)
        values = soliton_values(x, **base)
    elif kind == "soliton_sum":
        parts = params.get("solitons", SOLITON_SUM_DEFAULT)
        values = np.zeros((2, x.size), dtype=complex)
        for p in parts:
            values = values + soliton_values(x, **{**SOLITON_DEFAULTS, **p})
    elif kind == "gaussian":
        values = np.stack([3 * np.exp(-10 * x**2), 2 * np.exp(-5 * x**2)]).astype(complex)
    elif kind == "modified":
        values = soliton_values(x, **SOLITON_DEFAULTS)
        values[0] += np.cos(x) * np.exp(-(x**2))
    else:
        raise InvalidParams(f"unknown initial condition {kind!r}")
    return SpinorField(grid, values)
