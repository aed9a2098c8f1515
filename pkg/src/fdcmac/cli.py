"""Command-line driver: ``fdcmac {eval,optimize,sweep,simulate,compare,verify}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

from .core import Scenario, db_to_linear, linear_to_db
from .exceptions import ConfigError, DomainError, FdcMacError
from .manifest import Manifest, apply_value, bundled_manifests, load_manifest
from .montecarlo import SimConfig, simulate
from .optimizer import OptimizationResult, optimize_config, optimize_ts, power_grid, verify_theorem1
from .throughput import evaluate

__all__ = ["BaselineComparison", "compare_baselines", "run_manifest", "main",
           "REPORT_COLUMNS", "OPT_COLUMNS", "COMPARE_COLUMNS", "SIM_COLUMNS"]

REPORT_COLUMNS = [
    "t_s", "p_sen", "p_sen_db", "nt", "b1", "b2", "b3", "b31", "b32", "t_ove", "t_cont_bar",
    "pf00", "epsilon", "k_e", "delta_tau_inv",
    "gamma_s1", "gamma_s2", "gamma_d1", "gamma_d2", "gamma_ps",
]
OPT_COLUMNS = ["t_s_star", "p_sen_star", "p_sen_star_db", "nt_star", "boundary_flag",
               "flagged_points", "failed_points"]
COMPARE_COLUMNS = ["nt_fdc", "t_s_fdc", "p_sen_fdc_db", "nt_single_stage", "p_sen_single_stage_db",
                   "nt_hd", "t_s_hd"]
SIM_COLUMNS = ["sim_cycles", "sim_seed", "sim_nt", "sim_nt_se", "sim_mean_collisions", "sim_mean_idle_slots",
               "sim_multi_transition_fraction", "sim_evacuation_violation_fraction",
               "sim_case1_bits", "sim_case1_bits_se", "sim_case2_bits", "sim_case2_bits_se",
               "sim_case3_bits", "sim_case3_bits_se"]
SWEEP_PREFIX = ["scenario", "series_variable", "series_value", "variable", "value", "status", "error"]
_OBJECTIVE_COLUMNS = {"eval": REPORT_COLUMNS, "optimize": OPT_COLUMNS,
                      "compare": COMPARE_COLUMNS, "simulate": REPORT_COLUMNS + SIM_COLUMNS}


# ---------------------------------------------------------------------------
# baselines
# ---------------------------------------------------------------------------

@dataclass
class BaselineComparison:
    """FDC-MAC optimum against its two special cases."""

    fdc: OptimizationResult
    nt_single_stage: float
    p_sen_single_stage: float
    nt_hd: float
    t_s_hd: float

    @property
    def nt_fdc(self) -> float:
        return self.fdc.nt_star

    def as_row(self) -> dict:
        def db(p):
            return linear_to_db(p) if p > 0 else -math.inf
        return {
            "nt_fdc": self.fdc.nt_star, "t_s_fdc": self.fdc.t_s_star, "p_sen_fdc_db": db(self.fdc.p_sen_star),
            "nt_single_stage": self.nt_single_stage, "p_sen_single_stage_db": db(self.p_sen_single_stage),
            "nt_hd": self.nt_hd, "t_s_hd": self.t_s_hd,
        }


def compare_baselines(scenario: Scenario, single_stage_power: str = "max", workers=None,
                      **opt_kw) -> BaselineComparison:
    """Evaluate FDC-MAC at its optimum, the single-stage FD MAC (``t_s = T``)
    and the HD MAC (``p_sen = 0``, ``t_s`` optimised).

    ``single_stage_power="max"`` runs the single stage at ``p_max``;
    ``"optimize"`` picks the best ``p_sen <= p_max`` on the optimiser grid.
    """
    fdc = optimize_config(scenario, workers=workers, **opt_kw)
    T = scenario.access.t_frame
    p_max = scenario.access.p_max
    if single_stage_power == "max":
        cands = [p_max]
    elif single_stage_power == "optimize":
        cands = power_grid(p_max, opt_kw.get("step_db", 0.25), opt_kw.get("min_db", -10.0))
    else:
        raise ValueError("single_stage_power must be 'max' or 'optimize'")
    single = max(((evaluate(scenario, t_s=T, p_sen=float(p)).nt, float(p)) for p in cands))
    hd = optimize_ts(scenario, 0.0, rel_tol=opt_kw.get("rel_tol", 1e-3))
    return BaselineComparison(fdc=fdc, nt_single_stage=single[0], p_sen_single_stage=single[1],
                              nt_hd=hd.nt, t_s_hd=hd.t_s)


# ---------------------------------------------------------------------------
# manifest runs
# ---------------------------------------------------------------------------

def _opt_kw(m: Manifest):
    kw = {}
    for k in ("step_db", "min_db", "rel_tol"):
        if k in m.optimizer:
            kw[k] = float(m.optimizer[k])
    if "refine" in m.optimizer:
        kw["refine"] = bool(m.optimizer["refine"])
    return kw


def _sim_config(m: Manifest, seed=None, cycles=None, workers=None) -> SimConfig:
    s = m.simulation
    return SimConfig(
        cycles=int(cycles if cycles is not None else s.get("cycles", 100_000)),
        seed=int(seed if seed is not None else s.get("seed", 0)),
        multi_transition_policy=s.get("policy", "ignore"),
        chunk_size=int(s.get("chunk_size", 50_000)),
        workers=workers,
    )


def _point(objective, scenario, m, seed, cycles, workers):
    if objective == "eval":
        return evaluate(scenario).as_row()
    if objective == "optimize":
        return optimize_config(scenario, workers=workers, **_opt_kw(m)).summary()
    if objective == "compare":
        return compare_baselines(scenario, workers=workers, **_opt_kw(m)).as_row()
    if objective == "simulate":
        row = evaluate(scenario).as_row()
        row.update(simulate(scenario, _sim_config(m, seed, cycles, workers)).as_row())
        return row
    raise ConfigError(f"unknown objective {objective!r}", field="sweep.objective")


def run_manifest(m: Manifest, seed=None, cycles=None, workers=None):
    """Run the manifest sweep.  Returns ``(columns, rows, summary)``.

    One row per sweep point in sweep order; a failing point is kept with
    ``status = failed`` and the error text.
    """
    if m.axis is None:
        raise ConfigError("manifest has no [sweep] section", field="sweep")
    objective = m.objective
    if objective == "eval" and m.simulation.get("enabled"):
        objective = "simulate"
    columns = SWEEP_PREFIX + _OBJECTIVE_COLUMNS[objective]
    series_vals = m.series.values if m.series is not None else (None,)
    rows = []
    for sv in series_vals:
        base = m.scenario if sv is None else apply_value(m.scenario, m.series.variable, sv)
        for v in m.axis.values:
            row = {"scenario": m.name, "series_variable": m.series.variable if m.series else "",
                   "series_value": "" if sv is None else sv, "variable": m.axis.variable, "value": v,
                   "status": "ok", "error": ""}
            try:
                row.update(_point(objective, apply_value(base, m.axis.variable, v), m, seed, cycles, workers))
            except FdcMacError as exc:
                if isinstance(exc, ConfigError):
                    raise
                row.update(status="failed", error=f"{type(exc).__name__}: {exc}")
            rows.append(row)

    ok = [r for r in rows if r["status"] == "ok"]
    key = {"eval": "nt", "simulate": "nt", "optimize": "nt_star", "compare": "nt_fdc"}[objective]
    best = max(ok, key=lambda r: r[key]) if ok else None
    summary = {
        "command": "sweep", "scenario": m.name, "manifest_sha256": m.sha256,
        "seed": seed if seed is not None else m.seed, "objective": objective,
        "points": len(rows), "failed_points": len(rows) - len(ok),
        "optimum": best,
    }
    return columns, rows, summary


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _clean(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({c: r.get(c, "") for c in columns})
    return buf.getvalue()


def _emit(args, stem, columns, rows, summary):
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if rows:
            (out / f"{stem}.csv").write_text(_csv_text(columns, rows))
        (out / f"{stem}.json").write_text(json.dumps(_clean(summary), indent=2) + "\n")
        print(f"wrote {out / stem}.{{csv,json}}" if rows else f"wrote {out / stem}.json")
    elif args.format == "csv" and rows:
        sys.stdout.write(_csv_text(columns, rows))
    else:
        payload = dict(summary)
        if rows:
            payload["rows"] = rows
        print(json.dumps(_clean(payload), indent=2))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _manifest(args) -> Manifest:
    return load_manifest(args.manifest or "fig5")


def _base(args, m):
    s = m.scenario
    changes = {}
    if getattr(args, "t_s", None) is not None:
        changes["t_s"] = args.t_s
    if getattr(args, "p_sen_db", None) is not None:
        changes["p_sen"] = db_to_linear(args.p_sen_db)
    return s.with_access(**changes) if changes else s


def _head(args, m, command):
    return {"command": command, "scenario": m.name, "manifest_sha256": m.sha256,
            "seed": args.seed if args.seed is not None else m.seed}


def cmd_eval(args):
    m = _manifest(args)
    rep = evaluate(_base(args, m))
    summary = _head(args, m, "eval") | {"report": rep.as_row()}
    _emit(args, f"{m.name}_eval", REPORT_COLUMNS, [rep.as_row()], summary)
    return 0


def cmd_optimize(args):
    m = _manifest(args)
    res = optimize_config(_base(args, m), workers=args.workers, **_opt_kw(m))
    rows = [dict(p_sen=r.p_sen, p_sen_db=r.p_sen_db, t_s=r.t_s, nt=r.nt, boundary=r.boundary,
                 flagged=r.flagged, error=r.error) for r in res.trace]
    summary = _head(args, m, "optimize") | {"optimum": res.summary()}
    _emit(args, f"{m.name}_optimize", ["p_sen", "p_sen_db", "t_s", "nt", "boundary", "flagged", "error"],
          rows, summary)
    return 0


def cmd_sweep(args):
    m = _manifest(args)
    columns, rows, summary = run_manifest(m, seed=args.seed, cycles=args.cycles, workers=args.workers)
    _emit(args, f"{m.name}_sweep", columns, rows, summary)
    if rows and summary["failed_points"] == len(rows):
        print("error: every sweep point failed", file=sys.stderr)
        return 3
    return 0


def cmd_simulate(args):
    m = _manifest(args)
    s = _base(args, m)
    rep = evaluate(s)
    sim = simulate(s, _sim_config(m, args.seed, args.cycles, args.workers))
    row = rep.as_row() | sim.as_row()
    z = (sim.nt_estimate - rep.nt) / sim.nt_se if sim.nt_se > 0 else math.nan
    summary = _head(args, m, "simulate") | {"seed": sim.seed, "nt_closed_form": rep.nt,
                                            "nt_simulated": sim.nt_estimate, "nt_se": sim.nt_se,
                                            "z_score": z, "warnings": sim.warnings}
    _emit(args, f"{m.name}_simulate", REPORT_COLUMNS + SIM_COLUMNS, [row], summary)
    return 0


def cmd_compare(args):
    m = _manifest(args)
    cmp_ = compare_baselines(_base(args, m), single_stage_power=args.single_stage_power,
                             workers=args.workers, **_opt_kw(m))
    summary = _head(args, m, "compare") | {"optimum": cmp_.fdc.summary(), "comparison": cmp_.as_row()}
    _emit(args, f"{m.name}_compare", COMPARE_COLUMNS, [cmp_.as_row()], summary)
    return 0


def cmd_verify(args):
    m = _manifest(args)
    s = m.scenario
    powers = [db_to_linear(x) for x in args.p_sen_db] if args.p_sen_db else [s.access.p_sen]
    rows = []
    for p in powers:
        d = verify_theorem1(s, p, probe_points=args.probes)
        rows.append({"p_sen": p, "p_sen_db": linear_to_db(p) if p > 0 else -math.inf,
                     "p_sen_critical_db": linear_to_db(d.p_sen_critical),
                     "left_derivative": d.left_derivative, "right_derivative": d.right_derivative,
                     "right_sign": d.right_derivative_sign, "predicted_right_sign": d.predicted_right_sign,
                     "concavity_violations": d.concavity_violations, "consistent": d.consistent})
    cols = list(rows[0])
    _emit(args, f"{m.name}_verify", cols, rows, _head(args, m, "verify") | {"diagnostics": rows})
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fdcmac", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", help="manifest path or bundled name "
                        f"({', '.join(bundled_manifests())}); default fig5")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--cycles", type=int, default=None)
    common.add_argument("--out", help="output directory (CSV + JSON); stdout otherwise")
    common.add_argument("--format", choices=("csv", "json"), default="json")
    common.add_argument("--workers", type=int, default=None)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", parents=[common], help="throughput report for one configuration")
    p.add_argument("--t-s", type=float, help="sensing time [s]")
    p.add_argument("--p-sen-db", type=float, help="sensing-stage power [dB]")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("optimize", parents=[common], help="joint (t_s, p_sen) optimum")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep", parents=[common], help="run the manifest sweep")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", parents=[common], help="Monte-Carlo estimate vs closed form")
    p.add_argument("--t-s", type=float)
    p.add_argument("--p-sen-db", type=float)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", parents=[common], help="FDC-MAC vs single-stage FD and HD MAC")
    p.add_argument("--single-stage-power", choices=("max", "optimize"), default="max")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("verify", parents=[common], help="slope-sign and concavity diagnostics in t_s")
    p.add_argument("--p-sen-db", type=float, nargs="*", help="sensing powers to probe [dB]")
    p.add_argument("--probes", type=int, default=200)
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (FdcMacError, ArithmeticError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
