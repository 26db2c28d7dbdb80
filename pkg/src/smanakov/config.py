"""Run configuration: a flat document of dotted keys, plus named presets.

The on-disk format is a TOML subset with one ``section.key = value`` per
line, e.g.::

    experiment = "strong"
    problem.gamma = 1.0
    time.N = [64, 128, 256]
    time.N_ref = 8192

``emit_config`` writes the same format back, so ``parse_config(emit_config(c))``
reproduces ``c``.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import DivisibilityError, InvalidParams, ValidationError
from .field import DIRICHLET, INITIAL_KINDS, PERIODIC, Grid1D, NonlinearitySpec
from .integrators import SCHEMES, Problem, SchemeConfig

EXPERIMENTS = ("strong", "probability", "as", "drift", "cost", "soliton", "blowup", "single-trajectory")
BACKENDS = {"spectral": PERIODIC, "fd": DIRICHLET}

# experiments comparing coarse runs against a fine reference
_SWEEPS = ("strong", "probability", "as", "cost")


@dataclass
class ProblemSection:
    gamma: float = 1.0
    sigma: float = 1.0
    dispersion: float = 0.5
    half_width: float = 20 * math.pi
    num_points: int = 256
    backend: str = "spectral"
    boundary: str = PERIODIC
    cutoff: float | None = None
    coupling: float = 1.0


@dataclass
class TimeSection:
    T: float = 1.0
    N: list = field(default_factory=list)
    N_ref: int = 0


@dataclass
class SamplingSection:
    samples: int = 1
    seed: int = 0
    workers: int = 1


@dataclass
class SolverSection:
    schemes: list = field(default_factory=lambda: ["LT"])
    tol: float = 1e-12
    max_iter: int = 100
    blowup_threshold: float = 500.0


@dataclass
class InitialSection:
    kind: str = "soliton"
    params: dict = field(default_factory=dict)


@dataclass
class StatsSection:
    deltas: list = field(default_factory=lambda: [0.4, 0.45, 0.5, 0.55, 0.6])
    constants: list = field(default_factory=lambda: [1.0, 10**0.5, 10.0])


@dataclass
class SweepSection:
    """Parameter lists for the soliton and blowup studies."""

    gammas: list = field(default_factory=lambda: [0.0, 1.0])
    sigmas: list = field(default_factory=lambda: [1.0])
    sets: list = field(default_factory=lambda: [1, 2, 3])


@dataclass
class RunConfig:
    experiment: str = "single-trajectory"
    problem: ProblemSection = field(default_factory=ProblemSection)
    time: TimeSection = field(default_factory=TimeSection)
    sampling: SamplingSection = field(default_factory=SamplingSection)
    solver: SolverSection = field(default_factory=SolverSection)
    initial: InitialSection = field(default_factory=InitialSection)
    stats: StatsSection = field(default_factory=StatsSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    scale: int = 1
    preset: str = ""

    # -- derived objects ----------------------------------------------------

    def grid(self) -> Grid1D:
        p = self.problem
        return Grid1D(p.half_width, p.num_points, p.boundary)

    def build_problem(self, gamma=None, sigma=None) -> Problem:
        p = self.problem
        spec = NonlinearitySpec(p.sigma if sigma is None else sigma, p.cutoff, p.coupling)
        return Problem(self.grid(), p.gamma if gamma is None else gamma, p.dispersion, spec)

    def scheme_config(self, scheme: str) -> SchemeConfig:
        s = self.solver
        return SchemeConfig(scheme, s.tol, s.max_iter, s.blowup_threshold)

    @property
    def path_steps(self) -> int:
        """Finest number of noise increments a sample needs."""
        if self.time.N_ref:
            return self.time.N_ref
        return max(self.time.N) if self.time.N else 1


_SECTIONS = {
    "problem": ProblemSection,
    "time": TimeSection,
    "sampling": SamplingSection,
    "solver": SolverSection,
    "initial": InitialSection,
    "stats": StatsSection,
    "sweep": SweepSection,
}
_TOP_LEVEL = ("experiment", "scale", "preset")
_REQUIRED = ("experiment", "time.T")


def _coerce(key, value, default):
    """Coerce a parsed value to the type of the field default."""
    try:
        if isinstance(default, bool):
            return bool(value)
        if isinstance(default, int) and not isinstance(default, bool):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, str):
            if not isinstance(value, str):
                raise ValueError
            return value
    except (TypeError, ValueError):
        raise ValidationError(key, f"bad value {value!r}") from None
    return value


def config_from_mapping(data: dict) -> RunConfig:
    """Build and validate a ``RunConfig`` from a (possibly nested) mapping."""
    flat = _flatten(data)
    for key in _REQUIRED:
        if key not in flat:
            raise ValidationError(key, "missing required key")
    cfg = RunConfig()
    dx = None
    for key, value in flat.items():
        if key == "code_version":  # informational, written into manifests
            continue
        if key in _TOP_LEVEL:
            setattr(cfg, key, _coerce(key, value, getattr(cfg, key)))
            continue
        section, _, name = key.partition(".")
        if section not in _SECTIONS or not name:
            raise ValidationError(key, "unknown key")
        target = getattr(cfg, section)
        if section == "initial" and name != "kind":
            target.params[name] = value
            continue
        if section == "problem" and name == "dx":
            dx = float(value)
            continue
        names = {f.name for f in dataclasses.fields(target)}
        if name not in names:
            raise ValidationError(key, "unknown key")
        current = getattr(target, name)
        if current is None:
            value = None if value in ("", "none", None) else float(value)
        elif isinstance(current, list):
            if not isinstance(value, list):
                value = [value]
        else:
            value = _coerce(key, value, current)
        setattr(target, name, value)
    backend = cfg.problem.backend
    if backend not in BACKENDS:
        raise ValidationError("problem.backend", f"expected one of {tuple(BACKENDS)}")
    if "problem.boundary" in flat and flat["problem.boundary"] != BACKENDS[backend]:
        raise ValidationError("problem.boundary", f"does not match backend {backend!r}")
    cfg.problem.boundary = BACKENDS[backend]
    if dx is not None:
        try:
            grid = Grid1D.from_spacing(cfg.problem.half_width, dx, cfg.problem.boundary)
        except InvalidParams as exc:
            raise ValidationError("problem.dx", str(exc)) from None
        cfg.problem.num_points = grid.num_points
    validate(cfg)
    return cfg


def _flatten(data):
    """Accept nested sections (as TOML parses them) or dotted keys."""
    out = {}
    for key, value in data.items():
        if isinstance(value, dict) and key in _SECTIONS:
            for sub, v in value.items():
                out[f"{key}.{sub}"] = v
        else:
            out[key] = value
    return out


def validate(cfg: RunConfig) -> None:
    if cfg.experiment not in EXPERIMENTS:
        raise ValidationError("experiment", f"expected one of {EXPERIMENTS}")
    p = cfg.problem
    if p.backend not in BACKENDS:
        raise ValidationError("problem.backend", f"expected one of {tuple(BACKENDS)}")
    if BACKENDS[p.backend] != p.boundary:
        raise ValidationError("problem.boundary", f"does not match backend {p.backend!r}")
    try:
        cfg.grid()
    except InvalidParams as exc:
        raise ValidationError("problem.num_points", str(exc)) from None
    if p.gamma < 0:
        raise ValidationError("problem.gamma", "must be nonnegative")
    if p.sigma <= 0:
        raise ValidationError("problem.sigma", "must be positive")
    if p.cutoff is not None and p.cutoff <= 0:
        raise ValidationError("problem.cutoff", "must be positive")
    t = cfg.time
    if not t.T > 0:
        raise ValidationError("time.T", "must be positive")
    t.N = [_coerce("time.N", n, 0) for n in t.N]
    if any(n < 0 for n in t.N):
        raise ValidationError("time.N", "step counts must be nonnegative")
    if cfg.experiment in _SWEEPS:
        if not t.N or not t.N_ref:
            raise ValidationError("time.N_ref" if t.N else "time.N", "required for this experiment")
        if any(n < 1 for n in t.N):
            raise ValidationError("time.N", "step counts must be positive")
    elif not t.N:
        raise ValidationError("time.N", "required")
    if cfg.experiment in ("drift", "soliton", "single-trajectory") and len(t.N) != 1:
        raise ValidationError("time.N", "expects exactly one value")
    if t.N_ref:
        bad = [n for n in t.N if n and t.N_ref % n]
        if bad:
            raise DivisibilityError("time.N", f"{bad} do not divide N_ref={t.N_ref}")
    s = cfg.sampling
    if s.samples < 1:
        raise ValidationError("sampling.samples", "must be >= 1")
    if s.workers < 1:
        raise ValidationError("sampling.workers", "must be >= 1")
    if not 0 <= s.seed < 2**64:
        raise ValidationError("sampling.seed", "must be an unsigned 64-bit integer")
    sv = cfg.solver
    sv.schemes = [str(x).upper() for x in sv.schemes]
    for x in sv.schemes:
        if x not in SCHEMES:
            raise ValidationError("solver.schemes", f"unknown scheme {x!r}")
    if not sv.schemes:
        raise ValidationError("solver.schemes", "at least one scheme required")
    if sv.tol <= 0 or sv.max_iter < 1 or sv.blowup_threshold <= 0:
        raise ValidationError("solver", "tol, max_iter and blowup_threshold must be positive")
    if cfg.initial.kind not in INITIAL_KINDS + ("IV1", "IV2", "IV3", "IV4"):
        raise ValidationError("initial.kind", f"expected one of {INITIAL_KINDS}")
    if cfg.scale < 1:
        raise ValidationError("scale", "must be >= 1")


def parse_config(text: str) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError("<document>", str(exc)) from None
    return config_from_mapping(data)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _literal(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_literal(v) for v in value) + "]"
    if isinstance(value, dict):
        return "{" + ", ".join(f"{k} = {_literal(v)}" for k, v in value.items()) + "}"
    raise TypeError(f"cannot emit {value!r}")


def config_items(cfg: RunConfig):
    """Flat ``(dotted_key, value)`` pairs in a stable order; ``None`` values omitted."""
    yield "experiment", cfg.experiment
    for section in _SECTIONS:
        obj = getattr(cfg, section)
        for f in dataclasses.fields(obj):
            value = getattr(obj, f.name)
            if section == "initial" and f.name == "params":
                for k in sorted(value):
                    yield f"initial.{k}", value[k]
                continue
            if value is not None:
                yield f"{section}.{f.name}", value
    yield "scale", cfg.scale
    if cfg.preset:
        yield "preset", cfg.preset


def emit_config(cfg: RunConfig) -> str:
    return "".join(f"{k} = {_literal(v)}\n" for k, v in config_items(cfg))


# -- presets -----------------------------------------------------------------

_DESK = {
    "problem.gamma": 1.0,
    "problem.half_width": 20 * math.pi,
    "problem.num_points": 256,
    "problem.backend": "spectral",
    "time.T": 1.0,
    "solver.schemes": ["LT", "EXP", "CN", "RELAX"],
}

_FD50 = {"problem.half_width": 50.0, "problem.backend": "fd", "problem.boundary": DIRICHLET}

PRESETS = {
    # paper-scale parameter blocks
    "strong-fig1": {
        "experiment": "strong", **_FD50, "problem.gamma": 1.0, "problem.dx": 0.05,
        "time.T": 1.0, "time.N": [2**k for k in range(10, 17)], "time.N_ref": 2**18,
        "sampling.samples": 300, "solver.schemes": ["LT", "EXP", "CN", "RELAX"],
    },
    "prob-fig2": {
        "experiment": "probability", "problem.gamma": 9.0, "problem.half_width": 50.0,
        "problem.num_points": 2**10, "problem.backend": "spectral",
        "time.T": 0.5, "time.N": [2**k for k in range(12, 21, 2)], "time.N_ref": 2**24,
        "sampling.samples": 36, "solver.schemes": ["LT"],
        "stats.deltas": [0.4, 0.5, 0.6], "stats.constants": [1.0, 10**0.5, 10.0],
    },
    "prob-ctilde": {
        "experiment": "probability", **_FD50, "problem.gamma": 1.0, "problem.dx": 0.05,
        "time.T": 1.0, "time.N": [2**k for k in range(10, 17)], "time.N_ref": 2**18,
        "sampling.samples": 300, "solver.schemes": ["LT", "EXP", "CN", "RELAX"],
        "stats.deltas": [0.3, 0.4, 0.5],
    },
    "as-table1": {
        "experiment": "as", **_FD50, "problem.gamma": 1.0, "problem.dx": 0.2,
        "time.T": 1.0, "time.N": [2**k for k in range(8, 17)], "time.N_ref": 2**18,
        "sampling.samples": 300, "solver.schemes": ["LT", "EXP", "CN", "RELAX"],
    },
    "drift-fig5": {
        "experiment": "drift", **_FD50, "problem.gamma": 1.0, "problem.dx": 0.2,
        "time.T": 2.0, "time.N": [2**14], "sampling.samples": 100,
        "solver.schemes": ["LT", "EXP", "CN", "RELAX"],
    },
    "cost-fig6": {
        "experiment": "cost", **_FD50, "problem.gamma": 2.0, "problem.dx": 0.25,
        "time.T": 1.0, "time.N": [2**k for k in range(8, 15)], "time.N_ref": 2**16,
        "sampling.samples": 100, "solver.schemes": ["LT", "EXP", "CN", "RELAX"],
    },
    "soliton-fig7": {
        "experiment": "soliton", "problem.half_width": 20 * math.pi, "problem.num_points": 2**14,
        "problem.backend": "spectral", "time.T": 10.0, "time.N": [2**10],
        "sweep.gammas": [0.0, 1.0, 0.05], "sweep.sets": [1, 2, 3],
    },
    "blowup-cubic": {
        "experiment": "blowup", "problem.half_width": 20 * math.pi, "problem.num_points": 2**13,
        "problem.backend": "spectral", "time.T": 40.0, "time.N": [2**15],
        "sweep.gammas": [0.0, 1.0], "sweep.sigmas": [1.0], "sampling.samples": 48,
        "initial.kind": "soliton",
    },
    "blowup-sigma-20pi": {
        "experiment": "blowup", "problem.half_width": 20 * math.pi, "problem.num_points": 2**16,
        "problem.backend": "spectral", "time.T": 0.01, "time.N": [2**16, 2**17],
        "sweep.gammas": [0.0, 1.0], "sweep.sigmas": [2.0, 3.0, 4.0], "initial.kind": "soliton_sum",
    },
    "blowup-sigma-40pi": {
        "experiment": "blowup", "problem.half_width": 40 * math.pi, "problem.num_points": 2**17,
        "problem.backend": "spectral", "time.T": 0.01, "time.N": [2**16, 2**17],
        "sweep.gammas": [0.0, 1.0], "sweep.sigmas": [2.0, 3.0, 4.0], "initial.kind": "soliton_sum",
    },
    "blowup-batch": {
        "experiment": "blowup", "problem.half_width": 20 * math.pi, "problem.num_points": 2**17,
        "problem.backend": "spectral", "time.T": 0.01, "time.N": [2**17], "sampling.samples": 48,
        "sweep.gammas": [1.0], "initial.kind": "soliton_sum",
        "sweep.sigmas": [1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 2.9, 3.0, 3.5, 4.0],
    },
    # desk-scale analogues
    "strong-desk": {
        "experiment": "strong", **_DESK, "time.N": [2**k for k in range(6, 11)],
        "time.N_ref": 2**13, "sampling.samples": 50,
    },
    "as-desk": {
        "experiment": "as", **_DESK, "time.N": [2**k for k in range(5, 11)],
        "time.N_ref": 2**13, "sampling.samples": 50,
    },
    "drift-desk": {"experiment": "drift", **_DESK, "time.N": [2**12], "sampling.samples": 20},
    # coarsest step chosen so sqrt(gamma h) * xi_max matches the paper-scale run
    "prob-desk": {
        "experiment": "probability", "problem.gamma": 9.0, "problem.half_width": 50.0,
        "problem.num_points": 2**8, "problem.backend": "spectral",
        "time.T": 0.5, "time.N": [2**8, 2**10, 2**12], "time.N_ref": 2**15,
        "sampling.samples": 36, "solver.schemes": ["LT"],
        "stats.deltas": [0.4, 0.5, 0.6], "stats.constants": [1.0, 10**0.5, 10.0],
    },
    "cost-desk": {
        "experiment": "cost", **_DESK, "problem.gamma": 2.0,
        "time.N": [2**k for k in range(6, 11)], "time.N_ref": 2**12, "sampling.samples": 10,
    },
    "soliton-desk": {
        "experiment": "soliton", "problem.half_width": 20 * math.pi, "problem.num_points": 2**12,
        "problem.backend": "spectral", "time.T": 10.0, "time.N": [2**10],
        "sweep.gammas": [0.0, 1.0, 0.05], "sweep.sets": [1, 2, 3],
    },
    "blowup-desk": {
        "experiment": "blowup", "problem.half_width": 20 * math.pi, "problem.num_points": 2**14,
        "problem.backend": "spectral", "time.T": 0.01, "time.N": [2**14],
        "sweep.gammas": [0.0, 1.0], "sweep.sigmas": [2.0, 3.0, 4.0], "initial.kind": "soliton_sum",
    },
    "single": {
        "experiment": "single-trajectory", **_DESK, "time.N": [2**10], "solver.schemes": ["LT"],
    },
}


def preset(name: str) -> RunConfig:
    if name not in PRESETS:
        raise ValidationError("preset", f"unknown preset {name!r}; known: {sorted(PRESETS)}")
    data = {"time.T": 1.0, **PRESETS[name], "preset": name}
    return config_from_mapping(data)


def apply_scale(cfg: RunConfig, factor: int) -> RunConfig:
    """Desk-scale a configuration: divide sample count, ``N_ref`` and every ``N``.

    Step counts keep their ratios; ``factor`` must divide each of them.
    """
    if factor == 1:
        return cfg
    if factor < 1:
        raise ValidationError("scale", "must be >= 1")
    cfg = dataclasses.replace(cfg)
    cfg.time = dataclasses.replace(cfg.time, N=list(cfg.time.N))
    cfg.sampling = dataclasses.replace(cfg.sampling)
    for n in cfg.time.N + ([cfg.time.N_ref] if cfg.time.N_ref else []):
        if n % factor:
            raise DivisibilityError("scale", f"{factor} does not divide step count {n}")
    cfg.time.N = [n // factor for n in cfg.time.N]
    if cfg.time.N_ref:
        cfg.time.N_ref //= factor
    cfg.sampling.samples = max(1, math.ceil(cfg.sampling.samples / factor))
    cfg.scale = cfg.scale * factor
    validate(cfg)
    return cfg
