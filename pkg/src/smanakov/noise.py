"""Reproducible three-component Brownian increments with exact coarsening.

Every sample path is keyed by ``(seed, sample_index)``. Step ``n`` of the
finest level draws one Philox-4x64 block (four 64-bit words) at counter
``n``; the words become four uniforms and, through Box-Muller, four standard
normals of which the first three are used. Any step can therefore be
regenerated on its own, independent of how samples are spread over workers.

Coarser increments are obtained by summing children. When the refinement
ratio is a power of two the sum is done by repeated pairwise halving, so
coarsening through an intermediate level gives bit-identical results to
coarsening directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IncompatibleResolution, InvalidParams

_WORD_SCALE = 2.0**-53


def _philox(seed, sample_index):
    key = [int(seed) & 0xFFFFFFFFFFFFFFFF, int(sample_index) & 0xFFFFFFFFFFFFFFFF]
    return np.random.Philox(key=key)


def standard_normals(seed, sample_index, num_steps, start=0):
    """Standard normal triples for steps ``start .. start+num_steps-1``."""
    gen = _philox(seed, sample_index)
    if start:
        gen.advance(start)
    words = gen.random_raw(4 * num_steps).reshape(num_steps, 4)
    # 53-bit uniforms; u1 lies in (0, 1] so the log is finite
    u = (words >> np.uint64(11)).astype(np.float64) * _WORD_SCALE
    u1 = u[:, 0::2] + _WORD_SCALE
    u2 = u[:, 1::2]
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    z = np.empty((num_steps, 4))
    z[:, 0::2] = radius * np.cos(angle)
    z[:, 1::2] = radius * np.sin(angle)
    return z[:, :3]


@dataclass(frozen=True, eq=False)
class WienerPath:
    """Finest-level Wiener increments ``W((n+1)h) - W(nh)`` of shape ``(N_ref, 3)``."""

    increments: np.ndarray
    horizon: float
    seed: int
    sample_index: int

    @property
    def num_steps(self) -> int:
        return self.increments.shape[0]

    @property
    def step(self) -> float:
        return self.horizon / self.num_steps

    def endpoint(self) -> np.ndarray:
        return increments_at(self, 1)[0]


def sample_path(seed: int, sample_index: int, T: float, N_ref: int) -> WienerPath:
    if N_ref < 1:
        raise InvalidParams(f"N_ref must be >= 1, got {N_ref}")
    if not T > 0:
        raise InvalidParams(f"T must be positive, got {T}")
    z = standard_normals(seed, sample_index, N_ref)
    inc = np.sqrt(T / N_ref) * z
    inc.flags.writeable = False
    return WienerPath(inc, float(T), int(seed), int(sample_index))


def increments_at(path: WienerPath, N: int) -> np.ndarray:
    """Increments over ``N`` equal steps, summed exactly from the finest level."""
    n_ref = path.num_steps
    if N < 1 or n_ref % N:
        raise IncompatibleResolution(f"N={N} does not divide N_ref={n_ref}")
    ratio = n_ref // N
    inc = path.increments
    if ratio == 1:
        return inc
    if ratio & (ratio - 1) == 0:
        while inc.shape[0] > N:
            inc = inc[0::2] + inc[1::2]
        return inc
    # non-dyadic ratio: plain left-to-right sums within each block
    blocks = inc.reshape(N, ratio, 3)
    out = blocks[:, 0].copy()
    for j in range(1, ratio):
        out += blocks[:, j]
    return out


def scaled_normals(path: WienerPath, N: int) -> np.ndarray:
    """``chi = increment / sqrt(h)`` for ``N`` steps; what the integrators consume."""
    return increments_at(path, N) / np.sqrt(path.horizon / N)


def dump_increments(path: WienerPath, file) -> None:
    """Write finest increments as little-endian float64, row-major ``[step][component]``."""
    data = np.ascontiguousarray(path.increments, dtype="<f8").tobytes()
    if hasattr(file, "write"):
        file.write(data)
    else:
        with open(file, "wb") as fh:
            fh.write(data)


def load_increments(file, T: float, seed: int = 0, sample_index: int = 0) -> WienerPath:
    if hasattr(file, "read"):
        data = file.read()
    else:
        with open(file, "rb") as fh:
            data = fh.read()
    inc = np.frombuffer(data, dtype="<f8").astype(np.float64).reshape(-1, 3)
    inc.flags.writeable = False
    return WienerPath(inc, float(T), seed, sample_index)
