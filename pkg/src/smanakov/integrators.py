"""Time-stepping schemes for the stochastic Manakov system.

Four one-step maps share the Cayley propagator and the nonlinearity:

``LT``
    Lie-Trotter splitting. The nonlinear flow ``i dY + |Y|^(2s) Y dt = 0``
    keeps ``|Y|`` fixed pointwise, so it is the exact phase rotation
    ``exp(i h |X|^(2s)) X``; the linear propagator is applied afterwards.
``EXP``
    Exponential integrator ``U (X + i h F(X))``.
``CN``
    Crank-Nicolson, solved by Picard iteration that reuses the factored
    linear system.
``RELAX``
    Relaxation scheme with the staggered potential
    ``Phi_next = 2 |X|^(2s) - Phi_prev``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import Blowup, InvalidParams, ManakovError, NoConvergence
from .field import (
    OBSERVABLES,
    Grid1D,
    NonlinearitySpec,
    SpinorField,
    h1_norm_hat,
    h1_norm_values,
    potential_values,
)
from .noise import WienerPath, scaled_normals
from .propagator import LinearOperatorParams, build_propagator

SCHEMES = ("LT", "EXP", "CN", "RELAX")


@dataclass(frozen=True)
class Problem:
    """Equation parameters: grid, noise intensity, dispersion, nonlinearity."""

    grid: Grid1D
    gamma: float = 1.0
    dispersion: float = 0.5
    nonlinearity: NonlinearitySpec = NonlinearitySpec()

    def __post_init__(self):
        if not self.gamma >= 0:
            raise InvalidParams(f"gamma must be nonnegative, got {self.gamma}")

    def propagator(self, chi, h, potential=None):
        params = LinearOperatorParams(h, self.gamma, chi, self.dispersion)
        return build_propagator(params, self.grid, potential)

    def potential(self, values):
        return potential_values(values, self.grid, self.nonlinearity)


@dataclass(frozen=True)
class SchemeConfig:
    scheme: str = "LT"
    tol: float = 1e-12
    max_iter: int = 100
    blowup_threshold: float = 500.0

    def __post_init__(self):
        scheme = self.scheme.upper()
        if scheme not in SCHEMES:
            raise InvalidParams(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        object.__setattr__(self, "scheme", scheme)
        if not self.tol > 0:
            raise InvalidParams("tol must be positive")
        if self.max_iter < 1:
            raise InvalidParams("max_iter must be >= 1")
        if not self.blowup_threshold > 0:
            raise InvalidParams("blowup_threshold must be positive")


def _l2(values, dx):
    return math.sqrt(dx * float((values.real**2 + values.imag**2).sum()))


# -- array-level steps -------------------------------------------------------

def nonlinear_phase(values, h, problem):
    """Exact flow of the nonlinear substep over time ``h``."""
    return np.exp(1j * h * problem.potential(values)) * values


# Array-level steps return ``(values, hat)`` where ``hat`` holds the Fourier
# coefficients of the result on spectral grids (None otherwise) so the
# blowup guard can skip a transform.

def _linear(prop, values):
    if prop.grid.spectral:
        hat = prop.apply_hat(np.fft.fft(values))
        return np.fft.ifft(hat), hat
    return prop.apply_values(values), None


def _lt(values, chi, h, problem):
    return _linear(problem.propagator(chi, h), nonlinear_phase(values, h, problem))


def _exp(values, chi, h, problem):
    y = values + 1j * h * problem.potential(values) * values
    return _linear(problem.propagator(chi, h), y)


def _picard(first, update, dx, tol, max_iter):
    """Iterate ``Z <- update(Z)`` from ``first`` until the L2 change is <= tol.

    ``update`` returns ``(Z_new, hat)``; the result is ``(Z, hat, iterations)``.
    """
    z = first
    change = math.inf
    for k in range(1, max_iter + 1):
        new, hat = update(z)
        change = _l2(new - z, dx)
        z = new
        if change <= tol:
            return z, hat, k
    raise NoConvergence(max_iter, change)


def _cn(values, chi, h, problem, tol, max_iter):
    prop = problem.propagator(chi, h)
    pot_x = problem.potential(values)
    dx = problem.grid.dx

    def source(z):
        return 1j * h * 0.25 * (pot_x + problem.potential(z)) * (values + z)

    if problem.grid.spectral:
        base = prop.apply_hat(np.fft.fft(values))
        start = np.fft.ifft(base)

        def update(z):
            hat = base + prop.solve_hat(np.fft.fft(source(z)))
            return np.fft.ifft(hat), hat
    else:
        rhs = prop.rhs(values)
        start = prop.solve_values(rhs)

        def update(z):
            return prop.solve_values(rhs + source(z)), None

    return _picard(start, update, dx, tol, max_iter)


def relax_potential_update(values, phi_prev, problem):
    """``Phi_next = 2 |X|^(2s) - Phi_prev`` (with the problem's coupling)."""
    return 2.0 * problem.potential(values) - phi_prev


def _relax(values, phi_prev, chi, h, problem, tol, max_iter):
    phi = relax_potential_update(values, phi_prev, problem)
    if not problem.grid.spectral:
        prop = problem.propagator(chi, h, potential=phi)
        return prop.apply_values(values), None, phi, 1
    prop = problem.propagator(chi, h)
    base = prop.apply_hat(np.fft.fft(values))

    def update(z):
        hat = base + prop.solve_hat(np.fft.fft(0.5j * h * phi * (values + z)))
        return np.fft.ifft(hat), hat

    z, hat, iters = _picard(np.fft.ifft(base), update, problem.grid.dx, tol, max_iter)
    return z, hat, phi, iters


def _guard(values, grid, threshold, hat=None):
    if threshold is None or threshold == math.inf:
        return
    h1 = h1_norm_hat(hat, grid) if hat is not None else h1_norm_values(values, grid)
    if not h1 <= threshold:  # also catches NaN
        raise Blowup(h1, threshold)


# -- public one-step maps ----------------------------------------------------

def lt_step(X: SpinorField, chi, h: float, problem: Problem, blowup_threshold=None) -> SpinorField:
    y, hat = _lt(X.values, chi, h, problem)
    _guard(y, X.grid, blowup_threshold, hat)
    return SpinorField(X.grid, y)


def exp_step(X: SpinorField, chi, h: float, problem: Problem, blowup_threshold=None) -> SpinorField:
    y, hat = _exp(X.values, chi, h, problem)
    _guard(y, X.grid, blowup_threshold, hat)
    return SpinorField(X.grid, y)


def cn_step(X: SpinorField, chi, h: float, problem: Problem, tol=1e-12, max_iter=100,
            blowup_threshold=None) -> SpinorField:
    y, hat, _ = _cn(X.values, chi, h, problem, tol, max_iter)
    _guard(y, X.grid, blowup_threshold, hat)
    return SpinorField(X.grid, y)


def relax_step(X: SpinorField, phi_prev, chi, h: float, problem: Problem, tol=1e-12,
               max_iter=100, blowup_threshold=None):
    """One relaxation step; returns ``(X_next, Phi_next)``."""
    y, hat, phi, _ = _relax(X.values, np.asarray(phi_prev, dtype=float), chi, h, problem, tol, max_iter)
    _guard(y, X.grid, blowup_threshold, hat)
    return SpinorField(X.grid, y), phi


class Stepper:
    """Mutable integration state for one trajectory under one scheme.

    Holds the raw field array (and the relaxation potential) so long runs
    avoid re-wrapping every step. ``advance`` raises ``Blowup`` or
    ``NoConvergence``; after an error the stepper should be discarded.
    """

    def __init__(self, X0: SpinorField, problem: Problem, scheme: SchemeConfig = SchemeConfig()):
        self.problem = problem
        self.scheme = scheme
        self.values = np.array(X0.values)
        self.phi = problem.potential(self.values) if scheme.scheme == "RELAX" else None
        self.steps = 0
        self.iterations = 0
        self.last_attempt = None

    @property
    def field(self) -> SpinorField:
        return SpinorField(self.problem.grid, self.values)

    def advance(self, chi, h):
        s = self.scheme
        phi = self.phi
        k = 0
        if s.scheme == "LT":
            y, hat = _lt(self.values, chi, h, self.problem)
        elif s.scheme == "EXP":
            y, hat = _exp(self.values, chi, h, self.problem)
        elif s.scheme == "CN":
            y, hat, k = _cn(self.values, chi, h, self.problem, s.tol, s.max_iter)
        else:
            y, hat, phi, k = _relax(self.values, self.phi, chi, h, self.problem, s.tol, s.max_iter)
        self.last_attempt = y
        _guard(y, self.problem.grid, s.blowup_threshold, hat)
        self.values, self.phi = y, phi
        self.iterations += k
        self.steps += 1
        return y


@dataclass
class TrajectoryRecord:
    """Saved states, per-step observables and failure information for one run."""

    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    observables: dict = field(default_factory=dict)
    blown_up: bool = False
    blowup_step: int | None = None
    failure: str | None = None
    steps_completed: int = 0
    wall_time: float = 0.0
    observable_times: list = field(default_factory=list)


def run_trajectory(X0: SpinorField, path: WienerPath, N: int, scheme: SchemeConfig,
                   problem: Problem, save_every: int | None = None,
                   observables=()) -> TrajectoryRecord:
    """Iterate one scheme over ``N`` steps driven by ``path``.

    States are saved at step 0, every ``save_every`` steps and at the final
    step. ``observables`` names entries of ``OBSERVABLES`` evaluated after every
    step. A blowup or a failed nonlinear solve ends the run and is reported in
    the record rather than raised; the observables of the step that crossed
    the threshold are kept, its state is not.
    """
    for name in observables:
        if name not in OBSERVABLES:
            raise InvalidParams(f"unknown observable {name!r}")
    record = TrajectoryRecord(observables={name: [] for name in observables})

    def observe(field_, t):
        record.observable_times.append(t)
        for name in observables:
            record.observables[name].append(OBSERVABLES[name](field_))

    record.times.append(0.0)
    record.states.append(X0)
    observe(X0, 0.0)
    if N == 0:
        return _finish(record)

    chis = scaled_normals(path, N)
    h = path.horizon / N
    stepper = Stepper(X0, problem, scheme)
    elapsed = 0.0
    for n in range(1, N + 1):
        start = time.perf_counter()
        try:
            y = stepper.advance(chis[n - 1], h)
        except Blowup:
            elapsed += time.perf_counter() - start
            record.blown_up = True
            record.blowup_step = n
            record.failure = "blowup"
            if observables:
                with np.errstate(all="ignore"):
                    observe(SpinorField(problem.grid, stepper.last_attempt, blown_up=True), n * h)
            break
        except ManakovError as exc:
            elapsed += time.perf_counter() - start
            record.failure = type(exc).__name__
            break
        elapsed += time.perf_counter() - start
        record.steps_completed = n
        current = None
        if observables:
            current = SpinorField(problem.grid, y)
            observe(current, n * h)
        if n == N or (save_every and n % save_every == 0):
            record.times.append(n * h)
            record.states.append(current if current is not None else SpinorField(problem.grid, y))
    record.wall_time = elapsed
    return _finish(record)


def _finish(record):
    record.observables = {k: np.asarray(v) for k, v in record.observables.items()}
    record.observable_times = np.asarray(record.observable_times)
    return record

