"""Configuration-driven experiment runner.

A config is one JSON object::

    {"experiment": "clt",
     "family": {"kind": "trig-standard"},
     "schedule": {"kind": "constant", "L": 1e6},
     "eta": 0.75, "alpha": 1.0,
     "observables": ["cos2pix"],
     "ensemble": {"samples": 100000, "time": 2000},
     "params": {...}, "seed": 0, "threads": 1, "output": "out"}

``run`` writes ``results.csv`` and ``manifest.json`` into the output
directory and returns an exit status (0 all rows pass, 1 a failing row or a
numeric failure, 2 a usage error).
"""
from __future__ import annotations

import json
import math
import time
import traceback
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import ensembles as ens
from . import observables as obs
from .curves import (excision_bound_shape, full_crossing_split, iterate_crossing_split, seed_curve,
                     tangent_distortion, curve_equidistribution_error)
from .family import (CoefficientSchedule, Composition, ContractError, DomainError, NumericError,
                     ResolutionError, cocycle_norm_growth, linear_test, trig_standard,
                     validate_hypotheses)
from .foliation import (Square, StatisticsError, proliferated_mass, survival_tail, tail_shape,
                        track_sigma)
from .results import (ResultTable, calibrated_envelope, loglog_slope, ls_envelope)
from .streams import uniform_points

MANIFEST_SCHEMA = 1
KINDS = ("hypotheses", "lyapunov", "curve-equidistribution", "crossing-split", "stopping-times",
         "sigma-tail", "proliferation", "singular-limit", "finite-time-doc", "birkhoff", "clt",
         "square-mixing")
N_OBSERVABLES = {"finite-time-doc": 2, "birkhoff": 1, "clt": 1, "square-mixing": 1,
                 "curve-equidistribution": 1}


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists one diagnostic per field."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class ExperimentConfig:
    experiment: str
    family: dict = field(default_factory=lambda: {"kind": "trig-standard"})
    schedule: dict = field(default_factory=lambda: {"kind": "constant", "L": 1e4})
    eta: float = 0.75
    alpha: float = 1.0
    observables: list = field(default_factory=list)
    ensemble: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    output: str = "out"
    seed: int = 0
    threads: int = 1

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError(["config must be a JSON object"])
        known = set(cls.__dataclass_fields__)
        problems = [f"{k}: unknown field" for k in d if k not in known]
        if "experiment" not in d:
            problems.append("experiment: required")
        if problems:
            raise ConfigError(problems)
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def validate(self):
        p = []
        if self.experiment not in KINDS:
            p.append(f"experiment: {self.experiment!r} is not one of {', '.join(KINDS)}")
        try:
            eta = float(self.eta)
            if not (0.5 < eta < 1.0):
                p.append("eta: eta must lie in (1/2, 1)")
        except (TypeError, ValueError):
            p.append("eta: must be a number")
        try:
            a = float(self.alpha)
            if not (0.0 < a <= 1.0):
                p.append("alpha: alpha must lie in (0, 1]")
        except (TypeError, ValueError):
            p.append("alpha: must be a number")
        fk = self.family.get("kind") if isinstance(self.family, dict) else None
        if fk not in ("trig-standard", "linear-test"):
            p.append("family.kind: must be 'trig-standard' or 'linear-test'")
        sk = self.schedule.get("kind") if isinstance(self.schedule, dict) else None
        if sk == "constant":
            if not _positive(self.schedule.get("L")):
                p.append("schedule.L: positive number required")
        elif sk == "polynomial":
            if not _positive(self.schedule.get("p")):
                p.append("schedule.p: positive number required")
            if not _positive(self.schedule.get("L0")):
                p.append("schedule.L0: positive number required")
        elif sk == "explicit":
            v = self.schedule.get("values")
            if not v or not all(_positive(x) for x in v):
                p.append("schedule.values: non-empty list of positive numbers required")
        else:
            p.append("schedule.kind: must be 'constant', 'polynomial' or 'explicit'")
        if not isinstance(self.observables, list):
            p.append("observables: must be a list of ids")
        else:
            for o in self.observables:
                if o not in obs.LIBRARY:
                    p.append(f"observables: unknown id {o!r}")
            need = N_OBSERVABLES.get(self.experiment, 0)
            if len(self.observables) < need:
                p.append(f"observables: {self.experiment} needs {need} observable id(s)")
        if not isinstance(self.seed, int) or self.seed < 0 or self.seed >= 2**64:
            p.append("seed: unsigned 64-bit integer required")
        if not isinstance(self.threads, int) or self.threads < 1:
            p.append("threads: positive integer required")
        if not isinstance(self.params, dict):
            p.append("params: must be an object")
        if not isinstance(self.ensemble, dict):
            p.append("ensemble: must be an object")
        if p:
            raise ConfigError(p)

    # builders ------------------------------------------------------------

    def build_family(self):
        f = dict(self.family)
        kind = f.pop("kind")
        if kind == "linear-test":
            return linear_test(int(f.get("q", 10)), float(f.get("c", 0.0)), f.get("K1"))
        return trig_standard(f.get("K1"))

    def build_schedule(self) -> CoefficientSchedule:
        s = self.schedule
        if s["kind"] == "constant":
            return CoefficientSchedule.constant(float(s["L"]))
        if s["kind"] == "polynomial":
            cap = s.get("cap")
            return CoefficientSchedule.polynomial(float(s["p"]), float(s["L0"]),
                                                  None if cap is None else float(cap))
        return CoefficientSchedule.explicit(s["values"])

    def composition(self, schedule: Optional[CoefficientSchedule] = None) -> Composition:
        return Composition(self.build_family(), schedule or self.build_schedule(), float(self.eta))

    def observable(self, i: int = 0):
        return obs.get(self.observables[i])

    def square(self) -> Square:
        corner = self.params.get("corner", [0.0, 0.0])
        return Square(float(corner[0]), float(corner[1]), float(self.params.get("side", 1.0)))

    def to_dict(self) -> dict:
        return asdict(self)


def _positive(v) -> bool:
    try:
        return float(v) > 0 and math.isfinite(float(v))
    except (TypeError, ValueError):
        return False


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except FileNotFoundError:
        raise ConfigError([f"config: file not found: {path}"]) from None
    except json.JSONDecodeError as e:
        raise ConfigError([f"config: invalid JSON ({e})"]) from None
    return ExperimentConfig.from_dict(d)


# ---------------------------------------------------------------------------
# experiments


def _hypotheses(cfg: ExperimentConfig) -> ResultTable:
    fam = cfg.build_family()
    tab = ResultTable()
    grid = int(cfg.params.get("grid_size", 10_000))
    for L in cfg.params.get("L_list", [100.0, 1e4]):
        comp = cfg.composition(CoefficientSchedule.constant(float(L)))
        rep = validate_hypotheses(fam, comp.stage(1), grid)
        par = {"L": L, "grid_size": grid, "family": cfg.family}
        if fam.kind == "linear-test":
            k0 = 1.0
        else:
            k0 = 2 * math.pi + 4 * math.pi**2 + 2.0 / float(L)
        tab.add("hypotheses", f"K0/L={L:g}", par, rep.K0_hat, 0.0, k0, math.nan,
                rep.pass_H1 is not False and abs(rep.K0_hat - k0) <= 1e-3 * k0)
        tab.add("hypotheses", f"K1/L={L:g}", par, rep.K1_hat, 0.0,
                math.nan if fam.K1 is None else fam.K1, math.nan, rep.pass_H3 is not False)
        tab.add("hypotheses", f"M0/L={L:g}", par, rep.M0_hat, 0.0, fam.declared_M0, math.nan,
                rep.pass_H2 is not False and not rep.unstable)
    return tab


def _lyapunov(cfg: ExperimentConfig) -> ResultTable:
    comp = cfg.composition()
    N = int(cfg.params.get("N", 10))
    M = int(cfg.params.get("samples", 10_000))
    x, y = uniform_points(cfg.seed, M)
    ex = cocycle_norm_growth(comp, x, y, N)
    last = ex[-1]
    tab = ResultTable()
    par = {"N": N, "samples": M, "schedule": cfg.schedule}
    mean, se = float(np.mean(last)), float(np.std(last, ddof=1) / math.sqrt(M))
    fam = comp.family
    if fam.kind == "linear-test":
        q = float(fam.params["q"])
        theory = math.log((q + math.sqrt(q * q - 4)) / 2)
        tol = float(cfg.params.get("tol", 0.01))
        tab.add("lyapunov", f"exponent/N={N}", dict(par, tol=tol), mean, se, theory, math.nan,
                abs(mean - theory) <= tol)
        return tab
    LN = float(comp.schedule.formula(N))
    frac_req = float(cfg.params.get("fraction", 0.99))
    level = float(cfg.params.get("level", 0.9))
    frac = float(np.mean(last >= level * math.log(LN)))
    tab.add("lyapunov", f"exponent/N={N}", par, mean, se, math.log(LN), math.nan, True)
    tab.add("lyapunov", f"fraction-above/N={N}", dict(par, level=level, required=frac_req), frac,
            math.sqrt(frac * (1 - frac) / M), frac_req, math.nan, frac >= frac_req)
    if cfg.schedule["kind"] != "constant":
        # only where the coefficients actually grow
        grows = np.diff(comp.schedule.formula(np.arange(1, N + 1))) > 0
        d = np.diff(np.median(ex, axis=1))[grows]
        tab.add("lyapunov", "median-increasing", par, float(np.min(d, initial=math.inf)), 0.0, 0.0,
                math.nan, bool(np.all(d > 0)))
    return tab


def _curve_equidistribution(cfg: ExperimentConfig) -> ResultTable:
    psi = cfg.observable(0)
    m = int(cfg.params.get("m", 1))
    n = int(cfg.params.get("n", m + 3))
    nodes = int(cfg.params.get("nodes", 1 << 20))
    heights = cfg.params.get("heights", [0.3])
    L_list = cfg.params.get("L_list")
    comps = ([(float(L), cfg.composition(CoefficientSchedule.constant(float(L)))) for L in L_list]
             if L_list else [(math.nan, cfg.composition())])
    tab = ResultTable()
    cells = []
    for a, (L, comp) in enumerate(comps):
        for b, h in enumerate(heights):
            rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([cfg.seed, a, b])))
            r = curve_equidistribution_error(seed_curve(0.0, 1.0, float(h)), psi, comp, m, n,
                                             psi_mean=ens.mean_of(psi), alpha=float(cfg.alpha),
                                             nodes=nodes, rng=rng)
            cells.append((L, h, r))
    fit = ls_envelope([c[2].measured for c in cells], [c[2].std_error for c in cells],
                      [c[2].bound_shape for c in cells])
    for (L, h, r), ok in zip(cells, fit.passed):
        tab.add("curve-equidistribution", f"L={L:g}/h={h:g}", {"L": L, "height": h, "m": m, "n": n,
                "nodes": r.nodes, "method": r.method, "psi": psi.name}, r.measured, r.std_error,
                r.bound_shape, fit.constant, bool(ok))
    tab.fitted["curve-equidistribution"] = fit.constant
    if L_list and len(L_list) >= 2:
        factor = float(cfg.params.get("decrease_factor", 3.0))
        for h in heights:
            cs = [c for c in cells if c[1] == h]
            first, lastc = cs[0][2], cs[-1][2]
            ratio = first.measured / lastc.measured if lastc.measured > 0 else math.inf
            tab.add("curve-equidistribution", f"decrease/h={h:g}", {"L_from": cs[0][0], "L_to": cs[-1][0],
                    "required_factor": factor}, ratio, math.nan, factor, math.nan, ratio >= factor)
            snr = first.measured / first.std_error if first.std_error > 0 else math.inf
            tab.add("curve-equidistribution", f"above-noise/h={h:g}", {"L": cs[0][0],
                    "required_multiple": 3.0}, snr, math.nan, 3.0, math.nan, snr >= 3.0)
    return tab


def _crossing_split(cfg: ExperimentConfig) -> ResultTable:
    p = cfg.params
    h = float(p.get("height", 0.3))
    lo, hi = float(p.get("lo", 0.0)), float(p.get("hi", 1.0))
    m = int(p.get("m", 1))
    budget = int(p.get("budget", 100_000))
    tab = ResultTable()
    fam = cfg.build_family()
    linear = fam.kind == "linear-test"
    L_list = p.get("L_list")
    if L_list:
        # distortion scaling over a list of constant coefficients
        vals = []
        for L in L_list:
            comp = cfg.composition(CoefficientSchedule.constant(float(L)))
            dec = full_crossing_split(seed_curve(lo, hi, h), comp.stage(m))
            rep = tangent_distortion(dec.pieces, int(p.get("pairs", 16)),
                                     rng=np.random.default_rng(cfg.seed))
            vals.append(rep.max_log_ratio)
            tab.add("crossing-split", f"distortion/L={L:g}", {"L": L, "eta": cfg.eta, "pairs": rep.pairs,
                    "pieces": dec.piece_count}, rep.max_log_ratio, 0.0, rep.theoretical_bound,
                    rep.max_log_ratio / rep.theoretical_bound if rep.theoretical_bound else math.nan,
                    True)
        slope = loglog_slope(L_list, vals)
        target = 1.0 - 2.0 * float(cfg.eta)
        tol = float(p.get("slope_tol", 0.1))
        tab.add("crossing-split", "distortion-slope", {"L_list": L_list, "tol": tol}, slope, math.nan,
                target, math.nan, abs(slope - target) <= tol)
        return tab
    comp = cfg.composition()
    for k in p.get("stages", [1]):
        k = int(k)
        last = m + k - 1
        curve = seed_curve(lo, hi, h)
        if k == 1:
            dec = full_crossing_split(curve, comp.stage(m))
        else:
            dec = iterate_crossing_split(curve, comp, m, last, budget=budget,
                                         rng=np.random.default_rng(cfg.seed))
        par = {"height": h, "lo": lo, "hi": hi, "m": m, "last_stage": last, "budget": budget,
               "subsampled": dec.subsampled}
        if linear:
            q = int(fam.params["q"])
            expect = float(q**k)
            tab.add("crossing-split", f"pieces/stages={k}", par, dec.piece_count, 0.0, expect, math.nan,
                    dec.piece_count == expect)
            tab.add("crossing-split", f"excised/stages={k}", par, dec.excised_measure, 0.0, 0.0,
                    math.nan, dec.excised_measure <= 1e-12 if k == 1 else True)
        else:
            shape = excision_bound_shape(comp, m, last)
            tab.add("crossing-split", f"pieces/stages={k}", par, dec.piece_count, 0.0, math.nan,
                    math.nan, dec.piece_count > 0)
            tab.add("crossing-split", f"excised/stages={k}", par, dec.excised_measure, 0.0, shape,
                    dec.excised_measure / shape, True)
        if k == 1:
            rep = tangent_distortion(dec.pieces, int(p.get("pairs", 16)), rng=np.random.default_rng(cfg.seed))
            ok = rep.max_log_ratio <= 1e-12 if linear else True
            tab.add("crossing-split", "distortion/stages=1", dict(par, pairs=rep.pairs), rep.max_log_ratio,
                    0.0, rep.theoretical_bound, math.nan, ok)
    return tab


def stopping_time_table(comp: Composition, square: Square, samples: int, N_max: int,
                        sigma_horizon: Optional[int] = None, persistence: int = 10, seed: int = 0,
                        which=("tau", "tau_bar"), thresholds=None,
                        min_uncensored: int = 1000, experiment: str = "stopping-times") -> ResultTable:
    """Survival tails of the stopping times plus the ordering and persistence checks.

    Each survival curve gets an envelope constant calibrated on the first
    half of the thresholds and tested on all of them.
    """
    x, y = square.sample(samples, seed)
    rec = track_sigma(comp, x, y, square, N_max=N_max, sigma_horizon=sigma_horizon,
                      persistence=persistence)
    tab = ResultTable()
    base = {"samples": samples, "N_max": N_max, "sigma_horizon": rec.sigma_horizon,
            "side": square.side, "corner": [square.x0, square.y0], "eta": comp.eta}
    for w in which:
        hz = rec.sigma_horizon if w == "sigma" else rec.horizon
        th = thresholds if thresholds is not None else [t for t in (2, 4, 8, 16, 32, 64) if t < hz]
        sc = survival_tail(rec, w, comp, th, min_uncensored=min_uncensored)
        cal = np.arange(len(th)) < max(1, len(th) // 2)
        fit = calibrated_envelope(sc.empirical, sc.std_error, sc.theoretical_shape, cal)
        # a divergent tail series makes the bound infinite; the truncated
        # shape is still reported but cannot fail
        diverges = not math.isfinite(tail_shape(comp, w, int(th[0])))
        for i, N in enumerate(th):
            tab.add(experiment, f"{w}-survival/N={N}", dict(base, which=w, N=int(N),
                    calibration=bool(cal[i]), censored=sc.censored, series_diverges=diverges,
                    shape_truncated_at=int(rec.horizon) if diverges else None),
                    float(sc.empirical[i]), float(sc.std_error[i]), float(sc.theoretical_shape[i]),
                    fit.constant, bool(fit.passed[i]) or diverges)
        mono = bool(np.all(np.diff(sc.empirical) <= 0))
        tab.add(experiment, f"{w}-nonincreasing", dict(base, which=w), float(np.max(np.diff(sc.empirical),
                initial=0.0)), 0.0, 0.0, math.nan, mono)
        tab.fitted[w] = fit.constant
    bad = int(np.sum(~rec.ordering_ok()))
    tab.add(experiment, "ordering-violations", base, bad, 0.0, 0.0, math.nan, bad == 0)
    pers = int(np.sum(~rec.persistence_ok))
    tab.add(experiment, "persistence-violations", dict(base, persistence=persistence), pers, 0.0, 0.0,
            math.nan, pers == 0)
    return tab


def _stopping(cfg: ExperimentConfig, which) -> ResultTable:
    p = cfg.params
    N_max = int(p.get("N_max", 100))
    return stopping_time_table(cfg.composition(), cfg.square(), int(p.get("samples", 100_000)), N_max,
                               p.get("sigma_horizon"), int(p.get("persistence", 10)), cfg.seed, which,
                               p.get("thresholds"), int(p.get("min_uncensored", 1000)), cfg.experiment)


def _proliferation(cfg: ExperimentConfig) -> ResultTable:
    comp = cfg.composition()
    sq = cfg.square()
    M = int(cfg.params.get("samples", 10_000))
    n_list = [int(n) for n in cfg.params.get("n_list", [20, 40])]
    tab = ResultTable()
    ests = []
    for n in n_list:
        est, se, shape = proliferated_mass(comp, sq, n, M, cfg.seed)
        ests.append((est, se))
        tab.add("proliferation", f"mass/n={n}", {"n": n, "samples": M, "side": sq.side}, est, se, shape,
                math.nan, est >= shape - 3 * se)
    for (a, b), (ea, eb) in zip(zip(n_list[:-1], n_list[1:]), zip(ests[:-1], ests[1:])):
        tol = 3 * math.hypot(ea[1], eb[1])
        tab.add("proliferation", f"trend/n={a}->{b}", {"n_from": a, "n_to": b}, eb[0] - ea[0], tol / 3,
                0.0, math.nan, eb[0] >= ea[0] - tol)
    return tab


def _singular_limit(cfg: ExperimentConfig) -> ResultTable:
    p = cfg.params
    return ens.singular_limit_scan(cfg.build_family(), p.get("L_list", [1e3, 1e4, 1e5]), float(cfg.eta),
                                   float(cfg.alpha), int(p.get("budget", 1_000_000)), cfg.seed,
                                   cfg.threads)


def _finite_time(cfg: ExperimentConfig) -> ResultTable:
    p = cfg.params
    return ens.finite_time_doc_scan(cfg.observable(0), cfg.observable(1), cfg.build_family(),
                                    p.get("L_list", [1e3, 1e4, 1e5]), p.get("n_list", [2, 3, 4, 5, 6]),
                                    float(cfg.alpha), int(p.get("budget", 1_000_000)), cfg.seed,
                                    cfg.threads, float(cfg.eta))


def _birkhoff(cfg: ExperimentConfig) -> ResultTable:
    p = cfg.params
    N_list = [int(n) for n in p.get("N_list", [100, 1000])]
    samples = int(cfg.ensemble.get("samples", 10_000))
    compare = bool(p.get("compare_sigma", cfg.schedule["kind"] == "constant"))
    tab = ens.birkhoff_trend(cfg.observable(0), cfg.composition(), N_list, samples, cfg.seed,
                             cfg.threads, compare_sigma=compare)
    tab.meta["mode"] = ("constant coefficients: compared with sigma^2/N" if compare else
                        "capped polynomial schedule: monotone trend only")
    return tab


def _clt(cfg: ExperimentConfig) -> ResultTable:
    e = cfg.ensemble
    spec = ens.EnsembleSpec(int(e.get("samples", 10_000)), int(e.get("time", 1000)), e.get("burn_in"),
                            cfg.seed, bool(e.get("stratified", False)), cfg.threads)
    return ens.clt_ensemble(cfg.observable(0), cfg.composition(), spec,
                            coboundary=bool(cfg.params.get("coboundary", False)))


def _square_mixing(cfg: ExperimentConfig) -> ResultTable:
    p = cfg.params
    sq = cfg.square()
    return ens.square_mixing(cfg.observable(0), cfg.composition(), sq, p.get("n_list", [8, 16, 32]),
                             int(p.get("samples", 1_000_000)), cfg.seed, cfg.threads, float(cfg.alpha),
                             int(p.get("calibrate", 1)))


EXPERIMENTS = {
    "hypotheses": _hypotheses,
    "lyapunov": _lyapunov,
    "curve-equidistribution": _curve_equidistribution,
    "crossing-split": _crossing_split,
    "stopping-times": lambda c: _stopping(c, ("tau", "tau_bar")),
    "sigma-tail": lambda c: _stopping(c, ("sigma",)),
    "proliferation": _proliferation,
    "singular-limit": _singular_limit,
    "finite-time-doc": _finite_time,
    "birkhoff": _birkhoff,
    "clt": _clt,
    "square-mixing": _square_mixing,
}


def run_experiment(cfg: ExperimentConfig) -> ResultTable:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return EXPERIMENTS[cfg.experiment](cfg)


NUMERIC_ERRORS = (NumericError, ResolutionError, StatisticsError, ContractError, DomainError,
                  ArithmeticError)


def run(cfg: ExperimentConfig, out_dir=None, preset: Optional[str] = None) -> int:
    """Run ``cfg``; write ``results.csv`` and ``manifest.json``; return the exit status."""
    out = Path(out_dir or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    error = None
    try:
        tab = run_experiment(cfg)
    except NUMERIC_ERRORS as e:
        tab = ResultTable()
        error = {"type": type(e).__name__, "message": str(e),
                 "where": traceback.extract_tb(e.__traceback__)[-1].name}
    wall = time.perf_counter() - t0
    tab.write_csv(out / "results.csv")
    failing = [r.row_id for r in tab.failing()]
    status = 1 if (error or failing) else 0
    manifest = {
        "schema_version": MANIFEST_SCHEMA,
        "preset": preset,
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "threads": cfg.threads,
        "fitted_constants": tab.fitted,
        "metadata": tab.meta,
        "summary": {"rows": len(tab), "passed": len(tab) - len(failing), "failed": len(failing),
                    "failing_rows": failing, "error": error, "exit_status": status},
        "wall_time_seconds": wall,
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return status


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def emit_report(out_dir) -> str:
    """Pass/fail digest of a finished run directory."""
    from .results import read_csv
    out = Path(out_dir)
    csv_path, man_path = out / "results.csv", out / "manifest.json"
    missing = [str(p) for p in (csv_path, man_path) if not p.exists()]
    if missing:
        raise FileNotFoundError("missing run artifacts: " + ", ".join(missing))
    rows = read_csv(csv_path)
    with open(man_path, encoding="utf-8") as fh:
        man = json.load(fh)
    lines = []
    err = man.get("summary", {}).get("error")
    if err:
        lines.append(f"ERROR {err['type']} in {err['where']}: {err['message']}")
    if not rows:
        lines.append("no rows: the results table is empty")
        return "\n".join(lines)
    bad = [r for r in rows if r["pass"] != "true"]
    k = len(rows)
    lines.append(f"{'PASS' if not bad else 'FAIL'} {k - len(bad)}/{k}")
    for name, c in sorted(man.get("fitted_constants", {}).items()):
        lines.append(f"fitted constant {name}: {c}")
    for r in bad:
        lines.append(f"failed {r['experiment_id']}:{r['row_id']} estimate={r['estimate']} "
                     f"std_error={r['std_error']} theory_shape={r['theory_shape']} "
                     f"fitted_constant={r['fitted_constant']}")
    lines.append("columns: row_id, estimate, std_error, theory_shape, fitted_constant")
    for r in rows:
        lines.append(f"  {r['row_id']}, {r['estimate']}, {r['std_error']}, {r['theory_shape']}, "
                     f"{r['fitted_constant']}")
    return "\n".join(lines)
