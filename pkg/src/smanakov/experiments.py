"""Monte Carlo drivers for the convergence, conservation, cost, soliton and blowup studies.

Every sample is computed from ``(config, sample_index)`` alone, so results do
not depend on how samples are spread over worker processes. Aggregation
always folds samples in index order.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .errors import Blowup, DegenerateVariance, InvalidParams, ManakovError
from .field import h1_norm_values, initial_condition, l2_norm
from .integrators import Stepper, run_trajectory
from .noise import sample_path, scaled_normals
from .stats import fit_loglog, paired_t_test


@dataclass
class ExperimentReport:
    """Tables (lists of flat row dicts) and a small summary, ready for CSV output.

    ``volatile`` names tables whose contents depend on the machine (timings).
    """

    name: str
    tables: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    volatile: tuple = ()


def map_samples(fn, args, workers=1):
    """``[fn(a) for a in args]``, optionally in a process pool, in input order."""
    args = list(args)
    if workers <= 1 or len(args) <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=min(workers, len(args))) as pool:
        return list(pool.map(fn, args))


def _initial(cfg: RunConfig):
    return initial_condition(cfg.initial.kind, cfg.initial.params, cfg.grid())


# -- error sweep against a fine reference --------------------------------------

@dataclass
class SweepResult:
    """Per-sample errors of every (scheme, N) pair against a fine LT reference.

    ``max_err[scheme]`` and ``final_err[scheme]`` have shape ``(samples, len(Ns))``
    and hold the max-in-time and terminal H1 errors; failed runs are NaN.
    ``wall[scheme]`` holds stepping time in seconds. ``ref_failed[s]`` marks
    samples whose reference run blew up; their rows are all NaN.
    """

    Ns: list
    N_ref: int
    T: float
    schemes: list
    max_err: dict
    final_err: dict
    wall: dict
    ref_failed: np.ndarray

    @property
    def h(self) -> np.ndarray:
        return self.T / np.asarray(self.Ns, dtype=float)


def _sweep_sample(job):
    cfg, s = job
    T, Ns, N_ref = cfg.time.T, list(cfg.time.N), cfg.time.N_ref
    problem = cfg.build_problem()
    grid = problem.grid
    X0 = _initial(cfg)
    path = sample_path(cfg.sampling.seed, s, T, N_ref)
    ref = Stepper(X0, problem, cfg.scheme_config("LT"))
    ref_chi = scaled_normals(path, N_ref)
    h_ref = T / N_ref

    runs = []  # (scheme index, N index, ratio, stepper, chis, h)
    for a, name in enumerate(cfg.solver.schemes):
        for b, N in enumerate(Ns):
            stepper = Stepper(X0, problem, cfg.scheme_config(name))
            runs.append([a, b, N_ref // N, stepper, scaled_normals(path, N), T / N])
    shape = (len(cfg.solver.schemes), len(Ns))
    max_err = np.zeros(shape)
    final_err = np.full(shape, np.nan)
    wall = np.zeros(shape)
    alive = np.ones(shape, dtype=bool)

    for n in range(1, N_ref + 1):
        try:
            ref.advance(ref_chi[n - 1], h_ref)
        except ManakovError:
            nan = np.full(shape, np.nan)
            return nan, nan, nan, True
        for a, b, ratio, stepper, chis, h in runs:
            if n % ratio or not alive[a, b]:
                continue
            start = time.perf_counter()
            try:
                stepper.advance(chis[n // ratio - 1], h)
            except ManakovError:
                wall[a, b] += time.perf_counter() - start
                alive[a, b] = False
                max_err[a, b] = np.nan
                continue
            wall[a, b] += time.perf_counter() - start
            err = h1_norm_values(stepper.values - ref.values, grid)
            if err > max_err[a, b]:
                max_err[a, b] = err
            if n == N_ref:
                final_err[a, b] = err
    return max_err, final_err, wall, False


def error_sweep(cfg: RunConfig, workers=None) -> SweepResult:
    """Run every configured scheme at every ``N`` on common paths, in lockstep with the reference."""
    workers = cfg.sampling.workers if workers is None else workers
    jobs = [(cfg, s) for s in range(cfg.sampling.samples)]
    out = map_samples(_sweep_sample, jobs, workers)
    schemes = list(cfg.solver.schemes)

    def gather(k):
        return {name: np.array([o[k][a] for o in out]) for a, name in enumerate(schemes)}

    return SweepResult(
        Ns=list(cfg.time.N),
        N_ref=cfg.time.N_ref,
        T=cfg.time.T,
        schemes=schemes,
        max_err=gather(0),
        final_err=gather(1),
        wall=gather(2),
        ref_failed=np.array([o[3] for o in out], dtype=bool),
    )


def _restrict(sweep: SweepResult, Ns) -> SweepResult:
    """View of ``sweep`` limited to the step counts ``Ns``."""
    if Ns is None or list(Ns) == sweep.Ns:
        return sweep
    idx = [sweep.Ns.index(N) for N in Ns]
    pick = lambda d: {k: v[:, idx] for k, v in d.items()}  # noqa: E731
    return SweepResult(list(Ns), sweep.N_ref, sweep.T, sweep.schemes,
                       pick(sweep.max_err), pick(sweep.final_err), pick(sweep.wall), sweep.ref_failed)


# -- strong order ------------------------------------------------------------

@dataclass
class ConvergenceTable:
    scheme: str
    Ns: list
    h: np.ndarray
    errors: np.ndarray  # (samples, len(Ns)) max-in-time H1 errors
    mean_sq_err: np.ndarray
    excluded: np.ndarray  # failed samples per N
    slope: float
    intercept: float
    N_ref: int
    gamma: float
    sigma: float


def strong_convergence(cfg: RunConfig, sweep: SweepResult | None = None) -> dict:
    """Mean-square max-in-time H1 errors per scheme and their log-log slope in ``h``."""
    sweep = _restrict(sweep, cfg.time.N) if sweep is not None else error_sweep(cfg)
    tables = {}
    for name in sweep.schemes:
        e = sweep.max_err[name]
        ok = np.isfinite(e)
        with np.errstate(invalid="ignore"):
            msq = np.array([np.mean(e[ok[:, j], j] ** 2) if ok[:, j].any() else np.nan
                            for j in range(e.shape[1])])
        slope, intercept = fit_loglog(sweep.h, msq)
        tables[name] = ConvergenceTable(name, sweep.Ns, sweep.h, e, msq, (~ok).sum(axis=0),
                                        slope, intercept, sweep.N_ref,
                                        cfg.problem.gamma, cfg.problem.sigma)
    return tables


# -- order in probability -------------------------------------------------------

@dataclass
class ProbabilityEstimate:
    """``P[d, c, j]``: share of samples with ``e >= C_c h_j^delta_d``.

    ``C[d, j, k]`` is the constant that exactly ``k`` of the ``S`` valid samples
    exceed, i.e. ``C(delta, h, P = k/S)``; ``C_tilde`` is ``C`` divided by
    ``max_h C(delta, h, 0)``.
    """

    scheme: str
    deltas: list
    constants: list
    Ns: list
    h: np.ndarray
    P: np.ndarray
    levels: np.ndarray
    C: np.ndarray
    C_tilde: np.ndarray
    excluded: int


def probability_convergence(cfg: RunConfig, sweep: SweepResult | None = None) -> dict:
    sweep = _restrict(sweep, cfg.time.N) if sweep is not None else error_sweep(cfg)
    deltas = list(cfg.stats.deltas)
    consts = list(cfg.stats.constants)
    out = {}
    for name in sweep.schemes:
        e = sweep.max_err[name]
        valid = np.isfinite(e).all(axis=1)
        e = e[valid]
        S = e.shape[0]
        if S == 0:
            raise InvalidParams(f"no valid samples for scheme {name}")
        h = sweep.h
        P = np.empty((len(deltas), len(consts), len(h)))
        C = np.empty((len(deltas), len(h), S))
        for d, delta in enumerate(deltas):
            ratio = e / h**delta
            for c, const in enumerate(consts):
                P[d, c] = (ratio >= const).mean(axis=0)
            C[d] = -np.sort(-ratio, axis=0).T
        top = C[:, :, 0].max(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            C_tilde = C / top[:, None, None]
        out[name] = ProbabilityEstimate(name, deltas, consts, sweep.Ns, h, P,
                                        np.arange(S) / S, C, C_tilde, int((~valid).sum()))
    return out


# -- almost-sure order ------------------------------------------------------------

def as_constants(errors, h, delta):
    """Per-sample ``K = max_h e/h^delta`` and ``e_delta = max_h |K h^delta - e|``."""
    errors = np.atleast_2d(np.asarray(errors, dtype=float))
    hd = np.asarray(h, dtype=float) ** delta
    ratio = errors / hd
    K = ratio.max(axis=1)
    # K h^d - e written as h^d (K - e/h^d): exactly zero where the maximum is attained
    e_delta = (hd * (K[:, None] - ratio)).max(axis=1)
    return K, e_delta


@dataclass
class ASOrderEstimate:
    scheme: str
    deltas: list
    K: np.ndarray  # (len(deltas), samples)
    e_delta: np.ndarray  # (len(deltas), samples)
    mean: np.ndarray
    median: np.ndarray
    std: np.ndarray
    t_stat: dict  # delta -> t of e_delta - e_0.5
    p_value: dict
    excluded: int


def as_order(name, errors, h, deltas, excluded=0) -> ASOrderEstimate:
    deltas = list(deltas)
    K = np.empty((len(deltas), errors.shape[0]))
    ed = np.empty_like(K)
    for d, delta in enumerate(deltas):
        K[d], ed[d] = as_constants(errors, h, delta)
    t_stat, p_value = {}, {}
    if 0.5 in deltas and errors.shape[0] >= 2:
        base = ed[deltas.index(0.5)]
        for d, delta in enumerate(deltas):
            if delta == 0.5:
                continue
            try:
                t_stat[delta], p_value[delta] = paired_t_test(ed[d] - base, one_sided=True)
            except DegenerateVariance:
                t_stat[delta], p_value[delta] = math.nan, math.nan
    return ASOrderEstimate(name, deltas, K, ed, ed.mean(axis=1), np.median(ed, axis=1),
                           ed.std(axis=1, ddof=1) if ed.shape[1] > 1 else np.zeros(len(deltas)),
                           t_stat, p_value, excluded)


def as_convergence(cfg: RunConfig, sweep: SweepResult | None = None) -> dict:
    sweep = _restrict(sweep, cfg.time.N) if sweep is not None else error_sweep(cfg)
    out = {}
    for name in sweep.schemes:
        e = sweep.max_err[name]
        valid = np.isfinite(e).all(axis=1)
        out[name] = as_order(name, e[valid], sweep.h, cfg.stats.deltas, int((~valid).sum()))
    return out


# -- L2 drift ---------------------------------------------------------------------

def _drift_sample(job):
    cfg, s = job
    problem = cfg.build_problem()
    X0 = _initial(cfg)
    N = cfg.time.N[0]
    path = sample_path(cfg.sampling.seed, s, cfg.time.T, max(N, 1))
    out = {}
    for name in cfg.solver.schemes:
        rec = run_trajectory(X0, path, N, cfg.scheme_config(name), problem, observables=("l2",))
        l2 = rec.observables["l2"]
        drift = float(np.max(np.abs(l2 - l2[0]))) if rec.failure is None else math.nan
        out[name] = (drift, rec.failure)
    return out


def l2_drift(cfg: RunConfig, workers=None) -> dict:
    """Per scheme, the per-sample ``max_n | ||X^n|| - ||X^0|| |`` (NaN if the run failed)."""
    workers = cfg.sampling.workers if workers is None else workers
    out = map_samples(_drift_sample, [(cfg, s) for s in range(cfg.sampling.samples)], workers)
    return {name: np.array([o[name][0] for o in out]) for name in cfg.solver.schemes}


# -- cost ---------------------------------------------------------------------------

def cost_benchmark(cfg: RunConfig, sweep: SweepResult | None = None) -> dict:
    """Per scheme: ``(Ns, mean wall time per run, terminal mean-square H1 error)``."""
    sweep = _restrict(sweep, cfg.time.N) if sweep is not None else error_sweep(cfg)
    out = {}
    for name in sweep.schemes:
        fin = sweep.final_err[name]
        wall = sweep.wall[name][~sweep.ref_failed]
        with np.errstate(invalid="ignore"):
            msq = np.array([np.nanmean(fin[:, j] ** 2) if np.isfinite(fin[:, j]).any() else np.nan
                            for j in range(fin.shape[1])])
        out[name] = (list(sweep.Ns), wall.mean(axis=0), msq)
    return out


# -- soliton observables ------------------------------------------------------------

SOLITON_OBSERVABLES = ("l2", "h1", "hamiltonian", "mass_center", "pulse_width")


@dataclass
class SolitonRun:
    gamma: float
    coefficient_set: int
    times: np.ndarray
    series: dict
    mass_center_slope: float
    failure: str | None


def _soliton_case(job):
    cfg, gamma, k = job
    problem = cfg.build_problem(gamma=gamma)
    X0 = initial_condition("soliton", {"set": k}, problem.grid)
    N = cfg.time.N[0]
    path = sample_path(cfg.sampling.seed, 0, cfg.time.T, N)
    rec = run_trajectory(X0, path, N, cfg.scheme_config(cfg.solver.schemes[0]), problem,
                         observables=SOLITON_OBSERVABLES)
    t = rec.observable_times
    tc = rec.observables["mass_center"]
    slope = float(np.polyfit(t, tc, 1)[0]) if len(t) > 1 else math.nan
    return SolitonRun(gamma, k, t, rec.observables, slope, rec.failure)


def soliton_study(cfg: RunConfig, workers=None) -> list:
    """Observable series for every (gamma, coefficient set); all cases share one noise path."""
    workers = cfg.sampling.workers if workers is None else workers
    jobs = [(cfg, float(g), int(k)) for g in cfg.sweep.gammas for k in cfg.sweep.sets]
    return map_samples(_soliton_case, jobs, workers)


# -- blowup ---------------------------------------------------------------------------

@dataclass
class BlowupRecord:
    gamma: float
    sigma: float
    N: int
    sample: int
    scheme: str
    crossed: bool
    crossing_time: float  # NaN if the threshold was not crossed
    steps_completed: int
    max_h1: float  # largest H1 norm among accepted steps
    failure: str | None


def _blowup_case(job):
    cfg, gamma, sigma, N, s, name = job
    problem = cfg.build_problem(gamma=gamma, sigma=sigma)
    X0 = _initial(cfg)
    path = sample_path(cfg.sampling.seed, s, cfg.time.T, cfg.path_steps)
    stepper = Stepper(X0, problem, cfg.scheme_config(name))
    chis = scaled_normals(path, N)
    h = cfg.time.T / N
    max_h1 = h1_norm_values(X0.values, problem.grid)
    crossed, when, failure = False, math.nan, None
    for n in range(1, N + 1):
        try:
            y = stepper.advance(chis[n - 1], h)
        except Blowup:
            crossed, when, failure = True, n * h, "blowup"
            break
        except ManakovError as exc:
            failure = type(exc).__name__
            break
        max_h1 = max(max_h1, h1_norm_values(y, problem.grid))
    return BlowupRecord(gamma, sigma, N, s, name, crossed, when, stepper.steps, max_h1, failure)


def blowup_sweep(cfg: RunConfig, workers=None) -> list:
    """First passage of the H1 norm above the blowup threshold per (gamma, sigma, N, sample, scheme).

    Deterministic cases (``gamma == 0``) use sample 0 only.
    """
    workers = cfg.sampling.workers if workers is None else workers
    jobs = []
    for g in cfg.sweep.gammas:
        for sig in cfg.sweep.sigmas:
            for N in cfg.time.N:
                samples = 1 if g == 0 else cfg.sampling.samples
                for s in range(samples):
                    for name in cfg.solver.schemes:
                        jobs.append((cfg, float(g), float(sig), int(N), s, name))
    return map_samples(_blowup_case, jobs, workers)


# -- single trajectory ----------------------------------------------------------------

def single_trajectory(cfg: RunConfig) -> dict:
    """Observable series of sample 0 for every configured scheme."""
    problem = cfg.build_problem()
    X0 = _initial(cfg)
    N = cfg.time.N[0]
    names = SOLITON_OBSERVABLES if l2_norm(X0) > 0 else ("l2", "h1", "hamiltonian")
    path = sample_path(cfg.sampling.seed, 0, cfg.time.T, max(N, 1))
    return {
        name: run_trajectory(X0, path, N, cfg.scheme_config(name), problem, observables=names)
        for name in cfg.solver.schemes
    }


# -- report assembly --------------------------------------------------------------------

def _f(x):
    return float(x)


def _sweep_rows(sweep: SweepResult):
    rows = []
    for name in sweep.schemes:
        for s in range(sweep.ref_failed.size):
            for j, N in enumerate(sweep.Ns):
                rows.append({"scheme": name, "sample": s, "N": N, "h": _f(sweep.h[j]),
                             "max_h1_err": _f(sweep.max_err[name][s, j]),
                             "final_h1_err": _f(sweep.final_err[name][s, j])})
    return rows


def _strong_tables(tables):
    rows, slopes = [], []
    for name, tab in tables.items():
        for j, N in enumerate(tab.Ns):
            rows.append({"scheme": name, "N": N, "h": _f(tab.h[j]),
                         "mean_sq_err": _f(tab.mean_sq_err[j]), "slope": tab.slope,
                         "excluded": int(tab.excluded[j])})
        slopes.append({"scheme": name, "slope": tab.slope, "intercept": tab.intercept})
    return rows, slopes


def run_experiment(cfg: RunConfig, workers=None) -> ExperimentReport:
    """Dispatch on ``cfg.experiment`` and flatten the result into tables."""
    kind = cfg.experiment
    rep = ExperimentReport(kind)
    if kind in ("strong", "probability", "as", "cost"):
        sweep = error_sweep(cfg, workers)
        rep.tables["samples"] = _sweep_rows(sweep)
        rep.summary["excluded_reference"] = int(sweep.ref_failed.sum())
    if kind == "strong":
        tables = strong_convergence(cfg, sweep)
        rep.tables["errors"], rep.tables["slopes"] = _strong_tables(tables)
    elif kind == "probability":
        prob = probability_convergence(cfg, sweep)
        rows, crows = [], []
        for name, est in prob.items():
            for d, delta in enumerate(est.deltas):
                for c, const in enumerate(est.constants):
                    for j, N in enumerate(est.Ns):
                        rows.append({"scheme": name, "delta": delta, "C": const, "N": N,
                                     "h": _f(est.h[j]), "P": _f(est.P[d, c, j])})
                for j, N in enumerate(est.Ns):
                    for k, level in enumerate(est.levels):
                        crows.append({"scheme": name, "delta": delta, "N": N, "h": _f(est.h[j]),
                                      "P": _f(level), "C": _f(est.C[d, j, k]),
                                      "C_tilde": _f(est.C_tilde[d, j, k])})
        rep.tables["probability"] = rows
        rep.tables["constants"] = crows
    elif kind == "as":
        est_all = as_convergence(cfg, sweep)
        rows, krows = [], []
        for name, est in est_all.items():
            for d, delta in enumerate(est.deltas):
                rows.append({"scheme": name, "delta": delta, "mean": _f(est.mean[d]),
                             "median": _f(est.median[d]), "std": _f(est.std[d]),
                             "t": est.t_stat.get(delta, math.nan),
                             "p_value": est.p_value.get(delta, math.nan),
                             "excluded": est.excluded})
                for s in range(est.K.shape[1]):
                    krows.append({"scheme": name, "delta": delta, "sample": s,
                                  "K": _f(est.K[d, s]), "e_delta": _f(est.e_delta[d, s])})
        rep.tables["as_summary"] = rows
        rep.tables["as_samples"] = krows
    elif kind == "cost":
        cost = cost_benchmark(cfg, sweep)
        rep.tables["errors"] = [
            {"scheme": name, "N": N, "h": cfg.time.T / N, "mean_sq_final_err": _f(msq[j])}
            for name, (Ns, _, msq) in cost.items() for j, N in enumerate(Ns)
        ]
        rep.tables["timings"] = [
            {"scheme": name, "N": N, "mean_wall_time": _f(wall[j])}
            for name, (Ns, wall, _) in cost.items() for j, N in enumerate(Ns)
        ]
        rep.volatile = ("timings",)
    elif kind == "drift":
        drift = l2_drift(cfg, workers)
        rows = []
        for name, d in drift.items():
            for s, v in enumerate(d):
                rows.append({"scheme": name, "sample": s, "max_drift": _f(v),
                             "log10_max_drift": _f(np.log10(v)) if v > 0 else -math.inf})
        rep.tables["drift"] = rows
        rep.summary.update({f"max_drift.{k}": _f(np.nanmax(v)) for k, v in drift.items()})
    elif kind == "soliton":
        runs = soliton_study(cfg, workers)
        rows, srows = [], []
        for r in runs:
            for i, t in enumerate(r.times):
                row = {"gamma": r.gamma, "set": r.coefficient_set, "t": _f(t)}
                row.update({k: _f(v[i]) for k, v in r.series.items()})
                rows.append(row)
            srows.append({"gamma": r.gamma, "set": r.coefficient_set,
                          "mass_center_slope": r.mass_center_slope,
                          "failure": r.failure or ""})
        rep.tables["observables"] = rows
        rep.tables["soliton_summary"] = srows
    elif kind == "blowup":
        recs = blowup_sweep(cfg, workers)
        rep.tables["blowup"] = [
            {"scheme": r.scheme, "gamma": r.gamma, "sigma": r.sigma, "N": r.N, "sample": r.sample,
             "crossed": int(r.crossed), "crossing_time": r.crossing_time,
             "steps_completed": r.steps_completed, "max_h1": r.max_h1, "failure": r.failure or ""}
            for r in recs
        ]
        groups = {}
        for r in recs:
            groups.setdefault((r.scheme, r.gamma, r.sigma, r.N), []).append(r)
        rep.tables["blowup_summary"] = [
            {"scheme": k[0], "gamma": k[1], "sigma": k[2], "N": k[3], "samples": len(v),
             "blowup_fraction": sum(r.crossed for r in v) / len(v),
             "median_crossing_time": _f(np.median([r.crossing_time for r in v if r.crossed]))
             if any(r.crossed for r in v) else math.nan}
            for k, v in groups.items()
        ]
    elif kind == "single-trajectory":
        recs = single_trajectory(cfg)
        rows = []
        for name, rec in recs.items():
            for i, t in enumerate(rec.observable_times):
                row = {"scheme": name, "step": i, "t": _f(t)}
                row.update({k: _f(v[i]) for k, v in rec.observables.items()})
                rows.append(row)
        rep.tables["observables"] = rows
        rep.summary.update({f"failure.{k}": r.failure or "" for k, r in recs.items()})
    return rep
