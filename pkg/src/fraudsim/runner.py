"""Run a validated config, write CSV tables and derive verdicts from them.

Every verdict is recomputed from the CSV files just written, so the report
can be audited (or regenerated) from the tables alone.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from ._rng import derive_seed
from .analysis import (
    ergodic_average,
    invariant_comparison,
    invariant_grid,
    lyapunov_rate,
    occupation_fraction,
    selection_stats,
    spherical_inequality_check,
    tv_decay_probe,
)
from .config import default_output_dir, parse_config, plan_experiment
from .errors import VerdictError, VerificationError
from .landscape import default_screen_resolution, verify_landscape
from .sde import (
    SimParams,
    ensemble_summary,
    shell_sampler,
    simulate_ensemble,
    simulate_sphere,
    uniform_torus_sampler,
    write_path_csv,
)
from .spectral import (
    MONTE_CARLO,
    QUADRATURE,
    Spectrum,
    beta_thresholds,
    beta_zero,
    lambda_avg,
    two_point_lambda_scan,
)

PASS, FAIL, INDETERMINATE = "pass", "fail", "indeterminate"
SPHERE_MAX_RECORDS = 100_000


@dataclass(frozen=True)
class Verdict:
    name: str
    status: str
    detail: str
    source: str


@dataclass
class Report:
    config: dict
    version: str
    output_dir: str
    outputs: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)
    wall_clock: float = 0.0

    @property
    def exit_code(self):
        states = {v.status for v in self.verdicts}
        if FAIL in states:
            return 2
        if INDETERMINATE in states:
            return 3
        return 0

    def summary_lines(self):
        return [f"{v.status.upper():13s} {v.name}: {v.detail}" for v in self.verdicts]

    def to_dict(self):
        return {
            "config": self.config,
            "version": self.version,
            "output_dir": self.output_dir,
            "outputs": self.outputs,
            "verdicts": [v.__dict__ for v in self.verdicts],
            "exit_code": self.exit_code,
            "wall_clock_seconds": self.wall_clock,
        }


# --------------------------------------------------------------- file access

def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


class OutputDir:
    """All writes go through here; paths escaping the root are refused."""

    def __init__(self, root):
        self.root = Path(root).resolve()
        self.files = []

    def path(self, rel):
        p = (self.root / rel).resolve()
        if p != self.root and self.root not in p.parents:
            raise ValueError(f"refusing to write outside the output directory: {p}")
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def _record(self, rel):
        rel = str(Path(rel).as_posix())
        if rel not in self.files:
            self.files.append(rel)

    def write_csv(self, rel, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
        self.path(rel).write_text(buf.getvalue(), encoding="utf-8")
        self._record(rel)

    def write_json(self, rel, obj):
        self.path(rel).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        self._record(rel)

    def read_csv(self, rel):
        with open(self.root / rel, encoding="utf-8", newline="") as fh:
            return list(csv.DictReader(fh))


def _join(prefix, name):
    return f"{prefix}/{name}" if prefix else name


# ------------------------------------------------------------------ helpers

def _sim_params(cfg, beta, seed, **extra):
    s = cfg.sim
    return SimParams(beta=beta, dt=s.dt, horizon=s.horizon, record_stride=s.record_stride, seed=seed,
                     floor_distance=s.floor_distance, burn_in=s.burn_in, **extra)


def _ensemble(cfg, land, params, workers):
    s = cfg.sim
    if s.start == "point":
        return simulate_ensemble(land, params, x0=s.x0, n_paths=s.n_paths, workers=workers)
    if s.start == "shell":
        sampler = shell_sampler(land.m, s.shell_factor * land.domain.r)
    elif land.is_torus:
        sampler = uniform_torus_sampler(land)
    else:
        r = land.domain.r

        def sampler(rng):
            return (2 * rng.random(land.m) - 1) * r
    return simulate_ensemble(land, params, x0_sampler=sampler, n_paths=s.n_paths, workers=workers)


def _write_paths(out, prefix, ens, land):
    for i, p in enumerate(ens.paths):
        buf = io.StringIO()
        write_path_csv(p, land, buf)
        rel = _join(prefix, f"paths/path_{i:04d}.csv")
        out.path(rel).write_text(buf.getvalue(), encoding="utf-8")
        out._record(rel)


def _common_outputs(out, prefix, cfg, ens, land):
    summary = ensemble_summary(ens, land)
    out.write_json(_join(prefix, "ensemble.json"), summary)
    if cfg.analysis.write_paths:
        _write_paths(out, prefix, ens, land)


def _method(cfg, m):
    if cfg.analysis.method != "auto":
        return cfg.analysis.method
    return QUADRATURE if m <= 3 else MONTE_CARLO


def _budget(cfg, method):
    """``analysis.budget`` is a Monte Carlo sample count; quadrature uses its default grid."""
    return cfg.analysis.budget if method == MONTE_CARLO else None


# ---------------------------------------------------------------- lyapunov

LYAP_HEADER = ["path_id", "seed", "terminal", "well", "slope", "stderr", "target", "window_start", "window_end",
               "status"]


def run_lyapunov(cfg, land, beta, seed, out, prefix, workers):
    ens = _ensemble(cfg, land, _sim_params(cfg, beta, seed), workers)
    rows = []
    for i, p in enumerate(ens.paths):
        try:
            v = lyapunov_rate(p, land, tail_fraction=cfg.analysis.tail_fraction)
        except VerdictError:
            rows.append([i, p.params.seed, p.terminal, None, None, None, None, None, None, "not_attracted"])
            continue
        rows.append([i, p.params.seed, p.terminal, v.well, v.slope, v.stderr, v.target, v.window[0], v.window[1],
                     "ok"])
    out.write_csv(_join(prefix, "lyapunov.csv"), LYAP_HEADER, rows)
    _common_outputs(out, prefix, cfg, ens, land)


def judge_lyapunov(cfg, out, prefix):
    src = _join(prefix, "lyapunov.csv")
    rows = out.read_csv(src)
    a = cfg.analysis
    verdicts = []
    ok = [r for r in rows if r["status"] == "ok"]
    for well in sorted({int(r["well"]) for r in ok}):
        sel = [r for r in ok if int(r["well"]) == well]
        slopes = np.array([float(r["slope"]) for r in sel])
        target = float(sel[0]["target"])
        mean = float(slopes.mean())
        name = f"{prefix or 'run'}: pooled slope, well {well}"
        if len(slopes) < 2:
            verdicts.append(Verdict(name, INDETERMINATE, f"only {len(slopes)} attracted path", src))
            continue
        se = float(slopes.std(ddof=1) / math.sqrt(len(slopes)))
        lo, hi = target - a.rate_tolerance * abs(target), target + a.rate_tolerance * abs(target)
        status = PASS if lo <= mean <= hi else FAIL
        verdicts.append(Verdict(name, status, f"mean {mean:.4f} +- {se:.4f} over {len(slopes)} paths, "
                                              f"target {target:.4f}, band [{lo:.4f}, {hi:.4f}]", src))
    passed = sum(1 for r in ok if float(r["slope"]) <= a.slack * float(r["target"]) + 3 * float(r["stderr"]))
    frac = passed / len(rows) if rows else 0.0
    status = PASS if frac >= a.one_sided_min else FAIL
    verdicts.append(Verdict(f"{prefix or 'run'}: one-sided rate bound", status,
                            f"{passed}/{len(rows)} paths satisfy slope <= {a.slack} target + 3 stderr "
                            f"(need {a.one_sided_min:.0%})", src))
    return verdicts


# --------------------------------------------------------------- selection

SEL_HEADER = ["well_id", "count", "freq", "ci_low", "ci_high"]


def run_selection(cfg, land, beta, seed, out, prefix, workers):
    ens = _ensemble(cfg, land, _sim_params(cfg, beta, seed), workers)
    st = selection_stats(ens, land, cfg.analysis.confidence)
    rows = [[j, st.counts[j], st.freqs[j], *st.intervals[j]] for j in range(land.n_wells)]
    rows.append(["unresolved", st.unresolved, st.unresolved / st.n_paths, None, None])
    rows.append(["capped", st.capped, st.capped / st.n_paths, None, None])
    out.write_csv(_join(prefix, "selection.csv"), SEL_HEADER, rows)
    _common_outputs(out, prefix, cfg, ens, land)


def judge_selection(cfg, out, prefix):
    src = _join(prefix, "selection.csv")
    rows = out.read_csv(src)
    wells = [r for r in rows if r["well_id"].isdigit()]
    total = sum(float(r["freq"]) for r in rows)
    tag = prefix or "run"
    verdicts = [Verdict(f"{tag}: frequencies sum to one", PASS if abs(total - 1) < 1e-12 else FAIL,
                        f"sum {total:.15g}", src)]
    lows = [float(r["ci_low"]) for r in wells]
    verdicts.append(Verdict(f"{tag}: every well selected", PASS if min(lows) > 0 else FAIL,
                            "Wilson lower bounds " + ", ".join(f"{v:.4f}" for v in lows), src))
    if cfg.analysis.symmetric:
        inside = all(float(r["ci_low"]) <= 0.5 <= float(r["ci_high"]) for r in wells)
        verdicts.append(Verdict(f"{tag}: symmetric control", PASS if inside else FAIL,
                                "intervals " + ", ".join(f"[{r['ci_low'][:6]}, {r['ci_high'][:6]}]" for r in wells)
                                + " against 0.5", src))
    return verdicts


# --------------------------------------------------------------- invariant

def run_invariant(cfg, land, beta, seed, out, prefix, workers):
    a = cfg.analysis
    params = _sim_params(cfg, beta, seed, occupation_bins=a.bins)
    ens = _ensemble(cfg, land, params, workers)
    grid = invariant_grid(land, beta, a.bins)
    cmp = invariant_comparison(ens, land, beta, a.bins, grid=grid)
    centers = grid.centers()
    rows = []
    for b in range(grid.masses.size):
        rel = None if grid.flagged[b] else cmp.rel_err[b]
        rows.append([b, *centers[b], cmp.empirical[b], grid.masses[b], rel, bool(grid.flagged[b])])
    header = ["bin_id", *[f"center_{k + 1}" for k in range(land.m)], "empirical", "pi_mass", "rel_err", "flagged"]
    out.write_csv(_join(prefix, "invariant.csv"), header, rows)
    expo = 1.0 + beta
    avg_u = ergodic_average(ens, lambda X: land.u(X) ** expo)
    avg_one = ergodic_average(ens, lambda X: np.ones(len(X)))
    ref_u = grid.volume / grid.c_beta
    out.write_csv(_join(prefix, "ergodic.csv"),
                  ["observable", "time_average", "reference", "rel_err", "c_beta"],
                  [["one", avg_one, 1.0, avg_one - 1.0, grid.c_beta],
                   [f"U^{expo:g}", avg_u, ref_u, avg_u / ref_u - 1, grid.c_beta]])
    if a.tv_times:
        probe = tv_decay_probe(ens, land, beta, a.tv_times, bins=a.tv_bins)
        out.write_csv(_join(prefix, "tv_decay.csv"), ["t", "tv"], list(zip(probe.times, probe.tv)))
    _common_outputs(out, prefix, cfg, ens, land)


def judge_invariant(cfg, out, prefix):
    a = cfg.analysis
    tag = prefix or "run"
    src = _join(prefix, "invariant.csv")
    rows = out.read_csv(src)
    emp = np.array([float(r["empirical"]) for r in rows])
    pi = np.array([float(r["pi_mass"]) for r in rows])
    tv = 0.5 * float(np.abs(emp - pi).sum())
    rel = [abs(float(r["rel_err"])) for r in rows if r["flagged"] == "false"]
    n_flag = sum(r["flagged"] == "true" for r in rows)
    verdicts = [
        Verdict(f"{tag}: total variation", PASS if tv < a.tv_max else FAIL, f"TV {tv:.4f} (limit {a.tv_max})", src),
        Verdict(f"{tag}: bin relative error", PASS if max(rel) < a.rel_err_max else FAIL,
                f"max {max(rel):.4f} over {len(rel)} bins, {n_flag} flagged bins excluded (limit {a.rel_err_max})",
                src),
    ]
    esrc = _join(prefix, "ergodic.csv")
    for r in out.read_csv(esrc):
        err = abs(float(r["rel_err"]))
        lim = 1e-12 if r["observable"] == "one" else a.ergodic_tol
        verdicts.append(Verdict(f"{tag}: ergodic average of {r['observable']}", PASS if err <= lim else FAIL,
                                f"{float(r['time_average']):.6g} vs {float(r['reference']):.6g} "
                                f"(rel err {err:.4f}, limit {lim:g})", esrc))
    tsrc = _join(prefix, "tv_decay.csv")
    if (out.root / tsrc).exists():
        tvs = [float(r["tv"]) for r in out.read_csv(tsrc)]
        verdicts.append(Verdict(f"{tag}: TV decay trend", PASS if tvs[-1] < tvs[0] else FAIL,
                                " -> ".join(f"{v:.4f}" for v in tvs), tsrc))
    return verdicts


# ---------------------------------------------------------------- critical

def run_critical(cfg, land, beta, seed, out, prefix, workers):
    a = cfg.analysis
    ens = _ensemble(cfg, land, _sim_params(cfg, beta, seed), workers)
    early = a.compare_horizon or cfg.sim.horizon / 10
    rows = []
    for i, p in enumerate(ens.paths):
        for label, until in (("compare", early), ("horizon", cfg.sim.horizon)):
            rows.append([i, p.params.seed, label, until, a.u0, occupation_fraction(p, a.u0, until=until)])
    out.write_csv(_join(prefix, "occupation.csv"), ["path_id", "seed", "label", "until", "u0", "fraction"], rows)
    _common_outputs(out, prefix, cfg, ens, land)


def judge_critical(cfg, out, prefix):
    src = _join(prefix, "occupation.csv")
    rows = out.read_csv(src)
    tag = prefix or "run"
    late = np.mean([float(r["fraction"]) for r in rows if r["label"] == "horizon"])
    early = np.mean([float(r["fraction"]) for r in rows if r["label"] == "compare"])
    t_late = float(next(r["until"] for r in rows if r["label"] == "horizon"))
    t_early = float(next(r["until"] for r in rows if r["label"] == "compare"))
    lim = cfg.analysis.occupation_min
    return [
        Verdict(f"{tag}: occupation at horizon", PASS if late >= lim else FAIL,
                f"mean fraction {late:.4f} at t={t_late:g} (need >= {lim})", src),
        Verdict(f"{tag}: occupation increases", PASS if late > early else FAIL,
                f"{early:.4f} at t={t_early:g} -> {late:.4f} at t={t_late:g}", src),
    ]


# ------------------------------------------------------------------ verify

def run_verify(cfg, land, beta, seed, out, prefix, workers):
    res = cfg.analysis.grid_resolution or default_screen_resolution(land.m)
    try:
        rep = verify_landscape(land, res, beta_range=None if land.is_torus else (beta, beta))
        rows = [[name, value, ok, None] for name, value, ok in rep.rows()]
    except VerificationError as exc:
        rows = [["verification", None, False, str(exc)]]
    out.write_csv(_join(prefix, "verify.csv"), ["check", "value", "ok", "witness"], rows)
    if not land.is_torus and cfg.sim.start == "shell":
        params = _sim_params(cfg, beta, seed)
        ens = _ensemble(cfg, land, params, workers)
        rrows = []
        for i, p in enumerate(ens.paths):
            finite = bool(np.all(np.isfinite(p.states)) and np.all(np.isfinite(p.u_values)))
            rrows.append([i, p.params.seed, float(np.linalg.norm(p.x0)), p.entry_time, p.terminal, finite])
        out.write_csv(_join(prefix, "returns.csv"),
                      ["path_id", "seed", "start_radius", "entry_time", "terminal", "finite"], rrows)
        _common_outputs(out, prefix, cfg, ens, land)


def judge_verify(cfg, out, prefix):
    src = _join(prefix, "verify.csv")
    rows = out.read_csv(src)
    tag = prefix or "run"
    bad = [r["check"] for r in rows if r["ok"] != "true"]
    verdicts = [Verdict(f"{tag}: landscape checks", FAIL if bad else PASS,
                        f"{len(rows) - len(bad)}/{len(rows)} checks pass" + (f"; failing: {bad}" if bad else ""), src)]
    rsrc = _join(prefix, "returns.csv")
    if (out.root / rsrc).exists():
        rr = out.read_csv(rsrc)
        entered = sum(r["entry_time"] != "" for r in rr)
        capped = sum(r["terminal"] == "capped" for r in rr)
        finite = all(r["finite"] == "true" for r in rr)
        ok = entered == len(rr) and finite
        verdicts.append(Verdict(f"{tag}: return to the confinement ball", PASS if ok else FAIL,
                                f"{entered}/{len(rr)} paths entered B(0, r); {capped} capped; "
                                f"all finite: {finite}", rsrc))
    return verdicts


# ------------------------------------------------------------------ sphere

SPHERE_HEADER = ["spectrum_id", "eigenvalues", "beta", "seed", "time_average", "reference", "ref_stderr", "rel_err",
                 "phi_average"]


def _eig_cell(s):
    return ";".join(format(v, ".17g") for v in s.eigenvalues)


def run_sphere(cfg, plan, out, workers):
    rows = []
    for i, raw in enumerate(cfg.spectra):
        spec = Spectrum(raw)
        theta0 = np.asarray(cfg.theta0 if cfg.theta0 is not None else np.ones(spec.m), dtype=float)
        theta0 = theta0 / np.linalg.norm(theta0)
        for k, beta in enumerate(plan.betas):
            seed = derive_seed(cfg.sim.seed, i, k)
            n_steps = int(round(cfg.sim.horizon / cfg.sim.dt))
            stride = max(cfg.sim.record_stride, -(-n_steps // SPHERE_MAX_RECORDS))
            params = SimParams(beta=beta, dt=cfg.sim.dt, horizon=cfg.sim.horizon, record_stride=stride, seed=seed)
            rec = simulate_sphere(spec, beta, theta0, params)
            method = _method(cfg, spec.m)
            ref, se = lambda_avg(spec, beta, method, _budget(cfg, method), seed)
            avg = rec.final_averages["psi"]
            rows.append([i, _eig_cell(spec), beta, seed, avg, ref, se, avg / ref - 1, rec.final_averages["phi_a"]])
    out.write_csv("sphere.csv", SPHERE_HEADER, rows)


def judge_sphere(cfg, out):
    rows = out.read_csv("sphere.csv")
    tol = cfg.analysis.sphere_tol
    verdicts = []
    for r in rows:
        avg, ref, se = float(r["time_average"]), float(r["reference"]), float(r["ref_stderr"])
        err = abs(avg - ref)
        if err <= tol * ref:
            status = PASS
        elif err <= tol * ref + 3 * se:
            status = INDETERMINATE
        else:
            status = FAIL
        verdicts.append(Verdict(f"sphere average, spectrum {r['spectrum_id']}, beta {float(r['beta']):g}", status,
                                f"{avg:.5f} vs Lambda {ref:.5f} (rel err {err / ref:.4f}, limit {tol})",
                                "sphere.csv"))
    return verdicts


# ---------------------------------------------------------------- spectral

def run_spectral(cfg, plan, out, workers):
    a = cfg.analysis
    if cfg.spectra:
        rows, trows = [], []
        for i, raw in enumerate(cfg.spectra):
            spec = Spectrum(raw)
            th = beta_thresholds([spec])
            trows.append([i, _eig_cell(spec), th.beta_zero, th.beta_vee, th.beta_wedge])
            method = _method(cfg, spec.m)
            for k, beta in enumerate(plan.betas):
                seed = derive_seed(cfg.sim.seed, i, k)
                val, se = lambda_avg(spec, beta, method, _budget(cfg, method), seed)
                rows.append([i, _eig_cell(spec), beta, val, se, spec.lambda_min, spec.lambda_max, method])
        out.write_csv("spectral.csv", ["spectrum_id", "eigenvalues", "beta", "lambda", "stderr", "lambda_min",
                                       "lambda_max", "method"], rows)
        out.write_csv("thresholds.csv", ["spectrum_id", "eigenvalues", "beta_zero", "beta_vee", "beta_wedge"], trows)
    if cfg.two_point is not None:
        tp = cfg.two_point
        rows = []
        for k, beta in enumerate(plan.betas):
            method = "auto" if a.method == "auto" else a.method
            scan = two_point_lambda_scan(tp.lambda_minus, tp.lambda_plus, beta, tp.dims, method=method,
                                         budget=a.budget, seed=derive_seed(cfg.sim.seed, k))
            rows.extend([beta, tp.lambda_minus, tp.lambda_plus, row.m, row.value, row.stderr, row.method]
                        for row in scan)
        out.write_csv("two_point.csv", ["beta", "lambda_minus", "lambda_plus", "m", "lambda", "stderr", "method"],
                      rows)


def judge_spectral(cfg, out):
    verdicts = []
    if (out.root / "spectral.csv").exists():
        bad, loose = [], []
        rows = out.read_csv("spectral.csv")
        for r in rows:
            v, se = float(r["lambda"]), float(r["stderr"])
            lo, hi = float(r["lambda_min"]), float(r["lambda_max"])
            if v + 3 * se < lo or v - 3 * se > hi:
                bad.append(r)
            elif lo < hi and not (lo < v - 3 * se and v + 3 * se < hi):
                loose.append(r)
        status = FAIL if bad else (INDETERMINATE if loose else PASS)
        verdicts.append(Verdict("Lambda within eigenvalue bounds", status,
                                f"{len(rows)} rows, {len(bad)} outside, {len(loose)} not strictly inside at 3 stderr",
                                "spectral.csv"))
        trows = out.read_csv("thresholds.csv")
        order = all(float(r["beta_wedge"]) <= float(r["beta_zero"]) <= float(r["beta_vee"]) for r in trows)
        verdicts.append(Verdict("threshold ordering", PASS if order else FAIL,
                                "beta_wedge <= beta_zero <= beta_vee for every spectrum", "thresholds.csv"))
    if (out.root / "two_point.csv").exists():
        rows = out.read_csv("two_point.csv")
        frac = cfg.analysis.two_point_fraction
        for beta in sorted({r["beta"] for r in rows}, key=float):
            sel = sorted((r for r in rows if r["beta"] == beta), key=lambda r: int(r["m"]))
            vals = [float(r["lambda"]) for r in sel]
            ses = [float(r["stderr"]) for r in sel]
            steps = [vals[k] - vals[k + 1] for k in range(len(vals) - 1)]
            noise = [3 * math.hypot(ses[k], ses[k + 1]) for k in range(len(vals) - 1)]
            if all(s > n for s, n in zip(steps, noise)):
                status = PASS
            elif any(s < -n for s, n in zip(steps, noise)):
                status = FAIL
            else:
                status = INDETERMINATE
            desc = ", ".join(f"m={r['m']}: {float(r['lambda']):.5f}" for r in sel)
            verdicts.append(Verdict(f"two-point Lambda decreasing in m, beta {float(beta):g}", status, desc,
                                    "two_point.csv"))
            lm, lp = float(sel[-1]["lambda_minus"]), float(sel[-1]["lambda_plus"])
            gap = vals[-1] - lm
            verdicts.append(Verdict(f"two-point Lambda near lambda_minus, beta {float(beta):g}",
                                    PASS if gap < frac * (lp - lm) else FAIL,
                                    f"Lambda(m={sel[-1]['m']}) - lambda_minus = {gap:.5f} "
                                    f"(limit {frac * (lp - lm):.5f})", "two_point.csv"))
    return verdicts


# -------------------------------------------------------------- inequality

def run_inequality(cfg, plan, out, workers):
    rows = []
    for i, raw in enumerate(cfg.spectra):
        spec = Spectrum(raw)
        method = _method(cfg, spec.m)
        for k, beta in enumerate(plan.betas):
            res = spherical_inequality_check(spec, beta, method, _budget(cfg, method), derive_seed(cfg.sim.seed, i, k))
            rows.append([i, _eig_cell(spec), spec.m, beta, res.lhs, res.rhs, res.stderr, res.verdict])
    out.write_csv("inequality.csv", ["spectrum_id", "eigenvalues", "m", "beta", "lhs", "rhs", "stderr", "verdict"],
                  rows)


def judge_inequality(cfg, out, tol=1e-9):
    rows = out.read_csv("inequality.csv")
    counts = {"match": 0, "mismatch": 0, "indeterminate": 0}
    for r in rows:
        lhs, rhs, se = float(r["lhs"]), float(r["rhs"]), float(r["stderr"])
        b = float(r["beta"])
        expected = np.sign(b - beta_zero(int(r["m"])))
        if abs(lhs - rhs) <= max(3 * se, tol * abs(rhs)):
            counts["match" if expected == 0 else "indeterminate"] += 1
        else:
            counts["match" if np.sign(lhs - rhs) == expected else "mismatch"] += 1
    status = FAIL if counts["mismatch"] else (INDETERMINATE if counts["indeterminate"] else PASS)
    return [Verdict("sign identity", status,
                    f"{counts['match']} match, {counts['mismatch']} mismatch, "
                    f"{counts['indeterminate']} indeterminate of {len(rows)}", "inequality.csv")]


# ------------------------------------------------------------------ driver

SIM_RUNNERS = {
    "lyapunov": (run_lyapunov, judge_lyapunov),
    "selection": (run_selection, judge_selection),
    "invariant": (run_invariant, judge_invariant),
    "critical": (run_critical, judge_critical),
    "verify": (run_verify, judge_verify),
}
TABLE_RUNNERS = {
    "sphere": (run_sphere, judge_sphere),
    "spectral": (run_spectral, judge_spectral),
    "inequality": (run_inequality, judge_inequality),
}


def judge(cfg, plan, out):
    """Verdicts recomputed from the CSV tables under ``out``."""
    if cfg.experiment in SIM_RUNNERS:
        judge_fn = SIM_RUNNERS[cfg.experiment][1]
        verdicts = []
        for run in plan.runs:
            verdicts.extend(judge_fn(cfg, out, run.label))
        return verdicts
    return TABLE_RUNNERS[cfg.experiment][1](cfg, out)


def run_experiment(config, output_dir=None, workers=None):
    """Validate, simulate, write tables under ``output_dir`` and judge them.

    ``config`` may be an ``ExperimentConfig``, a dict, JSON text or a path.
    ``workers`` overrides ``sim.workers``; it changes wall-clock time only.
    """
    start = time.perf_counter()
    cfg = config if hasattr(config, "experiment") else parse_config(config)
    plan = plan_experiment(cfg)
    root = Path(output_dir) if output_dir is not None else default_output_dir(cfg)
    out = OutputDir(root)
    workers = cfg.sim.workers if workers is None else max(1, int(workers))
    if cfg.experiment in SIM_RUNNERS:
        out.write_json("landscape.json", plan.landscape.to_dict())
        run_fn = SIM_RUNNERS[cfg.experiment][0]
        for run in plan.runs:
            run_fn(cfg, plan.landscape, run.beta, run.seed, out, run.label, workers)
    else:
        TABLE_RUNNERS[cfg.experiment][0](cfg, plan, out, workers)
    verdicts = judge(cfg, plan, out)
    report = Report(config=cfg.echo(), version=__version__, output_dir=str(out.root), outputs=list(out.files),
                    verdicts=verdicts, wall_clock=time.perf_counter() - start)
    report_dict = report.to_dict()
    report_dict["betas"] = plan.betas
    report_dict["workers"] = workers
    out.write_json("report.json", report_dict)
    report.outputs = list(out.files)
    return report
