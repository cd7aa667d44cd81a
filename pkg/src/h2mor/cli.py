"""Experiment driver: run IRKA / R-IRKA / T-R-IRKA side by side and write
convergence series, shifts, summaries and transfer samples to disk."""

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import H2MORError
from .h2 import H2Method, sample_transfer, sigma
from .irka import InitOption, IrkaConfig, irka
from .kernels import DENSE_CAP
from .problems import OPERATORS, ProblemSpec, save_matrix_market
from .records import ConvergenceRecord
from .rirka import RirkaConfig, RirkaInit, rirka

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
METHODS = ("IRKA", "RIRKA", "TRIRKA")
OUTPUT_ROOT_ENV = "H2MOR_OUTPUT_ROOT"

# per-method knobs and their defaults; overrides may replace any of them
_DEFAULTS = {
    "IRKA": {"tol": 1e-8, "itmax": 300},
    "RIRKA": {"tol_outer": 1e-8, "tol_inner": 5e-9, "itmax_outer": 30, "itmax_inner": 300},
    "TRIRKA": {"tol_outer": 1e-8, "tol_inner": 5e-9, "itmax_outer": 30, "itmax_inner": 300, "tau": 3},
}


def fmt(x):
    """Full-precision text for a float (17 significant digits)."""
    return "%.17g" % x


def _default_output_root():
    return os.environ.get(OUTPUT_ROOT_ENV, "h2mor_runs")


@dataclass
class ExperimentConfig:
    """Everything needed to rerun an experiment; serializes to versioned JSON."""

    problem: Union[dict, str]
    methods: list = field(default_factory=lambda: list(METHODS))
    r: int = 11
    init_option: str = "eig"
    seed: int = 0
    overrides: dict = field(default_factory=dict)
    output_dir: Optional[str] = None
    sigma: str = "auto"  # auto | always | never
    transfer: bool = False
    omega: tuple = (1e-2, 1e4, 200)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if not self.methods:
            raise ValueError("at least one method is required")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown method(s) {bad}; choose from {METHODS}")
        if self.r < 1:
            raise ValueError("r must be >= 1")
        if self.sigma not in ("auto", "always", "never"):
            raise ValueError("sigma must be 'auto', 'always' or 'never'")
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(f"config schema version {self.schema_version} is not supported")
        self.omega = tuple(self.omega)

    def problem_spec(self):
        if isinstance(self.problem, str):
            return ProblemSpec.from_json(self.problem)
        return ProblemSpec.from_dict(self.problem)

    def method_params(self, method):
        params = dict(_DEFAULTS[method])
        params.update(self.overrides.get(method, {}))
        return params

    def resolved_output_dir(self):
        if self.output_dir:
            return Path(self.output_dir)
        return Path(_default_output_root()) / self.problem_spec().name

    def to_dict(self):
        d = asdict(self)
        d["omega"] = list(self.omega)
        return d

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class MethodOutcome:
    method: str
    result: object
    record: object
    sigma: Optional[float] = None
    sigma_approximate: bool = False
    cpu: float = 0.0


def run_method(system, method, cfg):
    """Run one reduction method; failures are recorded, not raised."""
    p = cfg.method_params(method)
    t0 = time.process_time()
    if method == "IRKA":
        icfg = IrkaConfig(cfg.r, tol=p["tol"], itmax=p["itmax"],
                          init_option=InitOption(cfg.init_option), seed=cfg.seed)
        try:
            result = irka(system, icfg)
            record = result.record
        except H2MORError as exc:
            result = None
            record = ConvergenceRecord("IRKA", cfg.r, status="error", message=str(exc))
    else:
        rcfg = RirkaConfig(
            cfg.r, tol_outer=p["tol_outer"], tol_inner=p["tol_inner"],
            itmax_outer=p["itmax_outer"], itmax_inner=p["itmax_inner"],
            init_option=RirkaInit(cfg.init_option), tau=p.get("tau"), seed=cfg.seed,
        )
        result = rirka(system, rcfg)
        record = result.record
    return MethodOutcome(method, result, record, cpu=time.process_time() - t0)


def _sigma_for(system, outcome, mode):
    model = outcome.result.model if outcome.result is not None else None
    if mode == "never" or model is None:
        return None, False
    if mode == "auto" and system.n + model.order > DENSE_CAP:
        return None, False
    try:
        rep = sigma(system, model, H2Method.LYAPUNOV)
    except H2MORError as exc:
        logger.warning("sigma for %s unavailable: %s", outcome.method, exc)
        return None, False
    return rep.sigma, rep.approximate


def write_convergence_csv(record, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "chi", "cum_solves", "basis_dim", "inner_iters", "wall_ms"])
        for e in record.entries:
            w.writerow([e.k, fmt(e.chi), e.cum_solves, min(e.dim_v, e.dim_w), e.inner_iters,
                        fmt(1e3 * e.wall_time)])


def _complex_list(values):
    return [[fmt(z.real), fmt(z.imag)] for z in np.asarray(values, dtype=complex)]


def write_shifts_json(record, path):
    payload = {
        "method": record.method,
        "r": record.r,
        "final": _complex_list(record.final_shifts) if record.final_shifts is not None else [],
        "initial": _complex_list(record.initial_shifts) if record.initial_shifts is not None else [],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def summary_row(outcome):
    rec = outcome.record
    return {
        "method": outcome.method,
        "status": rec.status,
        "its": rec.n_iters,
        "xi_lin": rec.xi_lin,
        "ell_fin": rec.ell_fin,
        "cpu_s": outcome.cpu,
        "sigma": outcome.sigma,
        "sigma_approximate": outcome.sigma_approximate,
        "message": rec.message,
    }


_COLUMNS = ("method", "status", "its", "xi_lin", "ell_fin", "cpu_s", "sigma")


def _cell(key, value):
    if value is None:
        return "-"
    if key == "cpu_s":
        return f"{value:.2f}"
    if key == "sigma":
        return f"{value:.5g}"
    return str(value)


def compare_report(rows):
    """Aligned text table and CSV text for summary rows (fixed column order)."""
    if not rows:
        raise ValueError("compare_report needs at least one row")
    rows = [r if isinstance(r, dict) else summary_row(r) for r in rows]
    cells = [[_cell(k, row.get(k)) for k in _COLUMNS] for row in rows]
    widths = [max(len(k), *(len(c[i]) for c in cells)) for i, k in enumerate(_COLUMNS)]
    lines = ["  ".join(k.rjust(w) for k, w in zip(_COLUMNS, widths))]
    lines += ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_COLUMNS)
    for row in rows:
        w.writerow(["" if row.get(k) is None else (fmt(row[k]) if isinstance(row[k], float) else row[k])
                    for k in _COLUMNS])
    return "\n".join(lines) + "\n", buf.getvalue()


def write_transfer_csv(system, outcomes, omega, path):
    lo, hi, num = omega
    grid = np.logspace(np.log10(lo), np.log10(hi), int(num))
    cols = {"omega": grid, "full": sample_transfer(system, grid).magnitude}
    for o in outcomes:
        if o.result is not None and o.result.model is not None:
            tab = sample_transfer(system, grid, o.result.model)
            cols[o.method] = tab.magnitude_other
            cols[f"{o.method}_err"] = tab.error
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(cols))
        for row in zip(*cols.values()):
            w.writerow([fmt(x) for x in row])


@dataclass
class ExperimentResult:
    outcomes: list
    output_dir: Path
    table: str

    @property
    def ok(self):
        return all(o.record.status != "error" for o in self.outcomes)


def run_experiment(cfg, system=None):
    """Run every configured method on the problem and write the artifacts.

    Files (per method ``M``): ``M_convergence.csv``, ``M_shifts.json``,
    ``M_summary.json``; plus ``config.json``, ``summary.csv``, ``report.txt``
    and optionally ``transfer.csv``.
    """
    if system is None:
        system = cfg.problem_spec().build()
    out = cfg.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.json")
    outcomes = []
    for method in cfg.methods:
        logger.info("running %s (r=%d) on %s", method, cfg.r, system.name or "problem")
        o = run_method(system, method, cfg)
        o.sigma, o.sigma_approximate = _sigma_for(system, o, cfg.sigma)
        outcomes.append(o)
        write_convergence_csv(o.record, out / f"{method}_convergence.csv")
        write_shifts_json(o.record, out / f"{method}_shifts.json")
        row = summary_row(o)
        row["sigma"] = None if o.sigma is None else fmt(o.sigma)
        row["cpu_s"] = fmt(row["cpu_s"])
        with open(out / f"{method}_summary.json", "w") as fh:
            json.dump(row, fh, indent=2)
            fh.write("\n")
    table, csv_text = compare_report(outcomes)
    (out / "summary.csv").write_text(csv_text)
    (out / "report.txt").write_text(table)
    if cfg.transfer:
        write_transfer_csv(system, outcomes, cfg.omega, out / "transfer.csv")
    return ExperimentResult(outcomes, out, table)


def _problem_from_args(args):
    if getattr(args, "config", None):
        return None
    if args.problem:
        path = Path(args.problem)
        if path.is_dir():
            spec = {"name": path.name, "kind": "MatrixMarketDir", "params": {"path": str(path)}}
        elif path.suffix == ".json":
            spec = ProblemSpec.from_json(path).to_dict()
        elif args.problem in OPERATORS:
            spec = {"name": args.problem, "kind": "EllipticFD", "params": {"operator": args.problem}}
        else:
            raise ValueError(f"cannot interpret problem {args.problem!r}")
    else:
        raise ValueError("--problem or --config is required")
    if args.grid is not None:
        spec["params"]["grid"] = args.grid
    if args.siso is not None:
        spec["params"]["siso"] = list(args.siso)
    return spec


def _config_from_args(args, methods):
    if args.config:
        cfg = ExperimentConfig.load(args.config)
        if args.out:
            cfg.output_dir = args.out
        return cfg
    overrides = {}
    for m in methods:
        o = {}
        if m == "IRKA":
            if args.tol is not None:
                o["tol"] = args.tol
            if args.itmax is not None:
                o["itmax"] = args.itmax
        else:
            for key in ("tol_outer", "tol_inner", "itmax_outer", "itmax_inner"):
                if getattr(args, key) is not None:
                    o[key] = getattr(args, key)
            if m == "TRIRKA" and args.tau is not None:
                o["tau"] = args.tau
        if o:
            overrides[m] = o
    return ExperimentConfig(
        problem=_problem_from_args(args), methods=methods, r=args.r,
        init_option=args.init, seed=args.seed, overrides=overrides, output_dir=args.out,
        sigma=args.sigma, transfer=args.transfer,
    )


def _add_run_args(p):
    p.add_argument("--config", help="experiment config JSON (other problem/method flags are ignored)")
    p.add_argument("--problem", help="operator id, problem-spec JSON or Matrix Market directory")
    p.add_argument("--grid", type=int, help="interior grid points per dimension for FD operators")
    p.add_argument("--siso", type=int, nargs=2, metavar=("B_COL", "C_COL"),
                   help="restrict to one input/output column (0-based)")
    p.add_argument("-r", type=int, default=11, help="reduced order")
    p.add_argument("--init", choices=["eig", "random"], default="eig")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, help="IRKA tolerance")
    p.add_argument("--itmax", type=int, help="IRKA iteration cap")
    p.add_argument("--tol-outer", dest="tol_outer", type=float)
    p.add_argument("--tol-inner", dest="tol_inner", type=float)
    p.add_argument("--itmax-outer", dest="itmax_outer", type=int)
    p.add_argument("--itmax-inner", dest="itmax_inner", type=int)
    p.add_argument("--tau", type=int, help="truncation window for TRIRKA")
    p.add_argument("--sigma", choices=["auto", "always", "never"], default="auto")
    p.add_argument("--transfer", action="store_true", help="also write transfer.csv")
    p.add_argument("--out", help=f"output directory (default: ${OUTPUT_ROOT_ENV}/<problem>)")


def build_parser():
    parser = argparse.ArgumentParser(prog="h2mor", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a benchmark problem as Matrix Market files")
    g.add_argument("--problem", required=True, help="operator id or problem-spec JSON")
    g.add_argument("--grid", type=int)
    g.add_argument("--siso", type=int, nargs=2, metavar=("B_COL", "C_COL"))
    g.add_argument("--out", required=True)

    red = sub.add_parser("reduce", help="run a single method")
    red.add_argument("--method", choices=METHODS, default="RIRKA")
    _add_run_args(red)

    cmp_ = sub.add_parser("compare", help="run several methods head to head")
    cmp_.add_argument("--methods", default=",".join(METHODS),
                      help="comma-separated subset of " + ",".join(METHODS))
    _add_run_args(cmp_)

    s = sub.add_parser("sample", help="sample |h(iw)| of a problem on a log grid")
    s.add_argument("--problem", required=True)
    s.add_argument("--grid", type=int)
    s.add_argument("--siso", type=int, nargs=2, metavar=("B_COL", "C_COL"))
    s.add_argument("--omega", type=float, nargs=3, default=[1e-2, 1e4, 200],
                   metavar=("MIN", "MAX", "NUM"))
    s.add_argument("--out", required=True, help="CSV file")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "generate":
            args.config = None
            spec = ProblemSpec.from_dict(_problem_from_args(args))
            system = spec.build()
            out = save_matrix_market(system, args.out)
            with open(out / "problem.json", "w") as fh:
                json.dump(spec.to_dict(), fh, indent=2)
                fh.write("\n")
            print(f"wrote {system.name}: n={system.n}, m={system.m}, p={system.p} to {out}")
            return 0
        if args.command == "sample":
            args.config = None
            system = ProblemSpec.from_dict(_problem_from_args(args)).build()
            lo, hi, num = args.omega
            write_transfer_csv(system, [], (lo, hi, int(num)), args.out)
            print(f"wrote {int(num)} samples to {args.out}")
            return 0
        methods = [args.method] if args.command == "reduce" else [
            m.strip().upper() for m in args.methods.split(",") if m.strip()]
        cfg = _config_from_args(args, methods)
        res = run_experiment(cfg)
    except (H2MORError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(res.table, end="")
    print(f"outputs in {res.output_dir}")
    return 0 if res.ok else 1


if __name__ == "__main__":
    sys.exit(main())
