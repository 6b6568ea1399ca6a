"""
Command-line driver.

    kronsketch gen           write a synthetic matrix
    kronsketch kron-sketch   sketch A1 (x) A2, verify, write report + sketch files
    kronsketch bench-scaling ledger totals over a sweep of n, with log-log slopes
    kronsketch leverage      exact / generalized / JL leverage scores of a file

All state is on the command line; no environment variables are read.
"""
import argparse
import csv
import json
import math
import sys
import time
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import generate, mmio
from .halving import HalvingConfig, kron_repeated_halving, sketched_gram, subseed
from .leverage import exact_leverage, generalized_leverage, jl_prepare, jl_query_many
from .matrix import gram, spectral_check
from .oracle import QueryLedger, RowOracle

SCHEMA_ID = "kron-sketch-report/1"
VERIFY_MAX_DIM = 64
CSV_COLUMNS = ["n", "d", "eps", "seed", "rows_kept", "distortion", "quantum_cost", "classical_queries"]


@dataclass
class RunConfig:
    n: int = 1024
    d: int = 4
    eps: float = 0.5
    c_const: float = HalvingConfig.c_const
    c_jl: float = HalvingConfig.c_jl
    seed: int = 0
    generator: str = "gaussian"
    trials: int = 1

    def __post_init__(self):
        if not 0 < self.eps <= 1:
            raise ValueError(f"eps must lie in (0, 1], got {self.eps}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.n < 1 or self.d < 1:
            raise ValueError("n and d must be positive")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.generator not in generate.GENERATORS + ("file",):
            raise ValueError(f"unknown generator {self.generator!r}")

    def halving(self, seed=None):
        return HalvingConfig(c_const=self.c_const, c_jl=self.c_jl, seed=self.seed if seed is None else seed)


def report_schema():
    return json.loads(resources.files("kronsketch").joinpath("report.schema.json").read_text())


def validate_report(report):
    import jsonschema
    jsonschema.validate(report, report_schema())


def factor_matrices(cfg, seed):
    return (generate.make(cfg.generator, cfg.n, cfg.d, subseed(seed, "matrix", 1)),
            generate.make(cfg.generator, cfg.n, cfg.d, subseed(seed, "matrix", 2)))


def run_kron_sketch(cfg, A1, A2, seed):
    """One sketch + verification. Returns ``(report, sketch)``."""
    for k, A in ((1, A1), (2, A2)):
        if A.n_rows < 2 * A.n_cols:
            raise ValueError(f"matrix {k} has shape {A.shape}; need n >= 2d")
    ledger = QueryLedger()
    start = time.perf_counter()
    sketch = kron_repeated_halving(RowOracle(A1, ledger), RowOracle(A2, ledger), cfg.eps, cfg.halving(seed))
    verify_eps = 3.0 * cfg.eps
    dim = A1.n_cols * A2.n_cols
    distortion, passes, note = None, None, None
    if dim <= VERIFY_MAX_DIM:
        rep = spectral_check(sketched_gram(sketch, A1, A2), np.kron(gram(A1), gram(A2)), verify_eps)
        distortion = "inf" if math.isinf(rep.measured_distortion) else rep.measured_distortion
        passes = rep.passes
    else:
        note = f"verification skipped: d1*d2 = {dim} exceeds {VERIFY_MAX_DIM}"
    wall_ms = (time.perf_counter() - start) * 1e3

    config = asdict(cfg)
    config["seed"] = seed
    config["n"], config["d"] = A1.n_rows, A1.n_cols
    report = {
        "schema": SCHEMA_ID,
        "config": config,
        "rows_kept": sketch.nnz,
        "nnz_D": sketch.nnz,
        "factor_rows": [len(s) for s in sketch.factor_form],
        "distortion": distortion,
        "spectral_pass": passes,
        "verify_eps": verify_eps,
        "verified": passes is not None,
        "verification_note": note,
        "ledger": ledger.to_dict(),
        "wall_ms": wall_ms,
    }
    return report, sketch


def dump_report(report):
    return json.dumps(report, sort_keys=True, indent=1) + "\n"


def cmd_kron_sketch(cfg, out, files=None):
    """
    Run ``cfg.trials`` sketches (seeds ``cfg.seed + t``) and write, per trial,
    ``report-seed<s>.json`` and ``sketch-seed<s>.{mtx,json}``, plus
    ``summary.csv`` over all trials. Returns the list of reports.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    for t in range(cfg.trials):
        seed = cfg.seed + t
        if files:
            A1, A2 = (mmio.read_matrix(f) for f in files)
        else:
            A1, A2 = factor_matrices(cfg, seed)
        report, sketch = run_kron_sketch(cfg, A1, A2, seed)
        validate_report(report)
        (out / f"report-seed{seed}.json").write_text(dump_report(report))
        mmio.write_sketch(out / f"sketch-seed{seed}", sketch)
        reports.append(report)
    write_csv(out / "summary.csv", [csv_row(r) for r in reports])
    return reports


def csv_row(report):
    c = report["config"]
    return {"n": c["n"], "d": c["d"], "eps": c["eps"], "seed": c["seed"],
            "rows_kept": report["rows_kept"],
            "distortion": "" if report["distortion"] is None else report["distortion"],
            "quantum_cost": report["ledger"]["quantum_cost_units"],
            "classical_queries": report["ledger"]["classical_queries"]}


def write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def loglog_slope(xs, ys):
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def cmd_bench_scaling(n_list, cfg, out=None):
    """
    Ledger totals of one Kronecker sketch per n, plus least-squares log-log
    slopes of quantum cost and classical queries against n.
    """
    n_list = [int(n) for n in n_list]
    if len(n_list) < 4:
        raise ValueError(f"need at least 4 sizes to fit a slope, got {len(n_list)}")
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be strictly ascending")
    rows, reports = [], []
    for n in n_list:
        run_cfg = RunConfig(**{**asdict(cfg), "n": n})
        A1, A2 = factor_matrices(run_cfg, cfg.seed)
        report, _ = run_kron_sketch(run_cfg, A1, A2, cfg.seed)
        reports.append(report)
        rows.append(csv_row(report))
    result = {
        "schema": "kron-sketch-scaling/1",
        "rows": rows,
        "slopes": {
            "quantum_cost": loglog_slope(n_list, [r["quantum_cost"] for r in rows]),
            "classical_queries": loglog_slope(n_list, [r["classical_queries"] for r in rows]),
        },
        "breakdown": [r["ledger"]["breakdown"] for r in reports],
    }
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "scaling.csv", rows)
        (out / "scaling.json").write_text(json.dumps(result, sort_keys=True, indent=1) + "\n")
    return result


def cmd_leverage(a_file, out, b_file=None, jl=False, compare=False, eps=0.25, seed=0, c_jl=HalvingConfig.c_jl):
    """
    Exact (or, with ``b_file``, generalized) leverage scores of the rows of A.
    ``jl`` switches to the JL estimator; ``compare`` writes both columns
    (exact, JL) and returns the fraction of finite rows within (1 +- eps).
    """
    A = mmio.read_matrix(a_file)
    B = mmio.read_matrix(b_file) if b_file else None
    if B is not None and B.n_cols != A.n_cols:
        raise ValueError(f"column mismatch: A has {A.n_cols}, B has {B.n_cols}")
    ref = A if B is None else B
    summary = {"n": A.n_rows, "d": A.n_cols, "mode": "generalized" if B is not None else "exact"}
    if not (jl or compare):
        scores = exact_leverage(A) if B is None else generalized_leverage(A, B)
        mmio.write_scores(out, scores)
        return summary
    est = jl_prepare(ref, A.n_rows, eps, seed, c_jl=c_jl)
    approx = jl_query_many(est, A)
    summary.update(mode="jl", eps=eps, jl_rows=list(est.jl_rows))
    if not compare:
        mmio.write_scores(out, approx)
        return summary
    exact = generalized_leverage(A, ref)
    finite = np.isfinite(exact) & np.isfinite(approx)
    ratio = approx[finite] / np.where(exact[finite] > 0, exact[finite], 1.0)
    ok = (np.abs(ratio - 1.0) <= eps) | ((exact[finite] == 0) & (approx[finite] == 0))
    summary.update(mode="compare", within=float(ok.mean()) if ok.size else 1.0,
                   infinite_agree=bool(np.array_equal(np.isinf(exact), np.isinf(approx))))
    mmio.write_scores(out, np.column_stack([exact, approx]), comment="columns: exact, jl")
    return summary


def _add_run_flags(p, n=1024, d=4):
    p.add_argument("--n", type=int, default=n)
    p.add_argument("--d", type=int, default=d)
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--c-const", type=float, default=HalvingConfig.c_const)
    p.add_argument("--c-jl", type=float, default=HalvingConfig.c_jl)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--generator", default="gaussian", choices=generate.GENERATORS + ("file",))


def _config(args):
    return RunConfig(n=args.n, d=args.d, eps=args.eps, c_const=args.c_const, c_jl=args.c_jl,
                     seed=args.seed, generator=args.generator, trials=args.trials)


def build_parser():
    parser = argparse.ArgumentParser(prog="kronsketch", description=__doc__.splitlines()[1])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic matrix in Matrix Market format")
    _add_run_flags(p, n=64)
    p.add_argument("--out", required=True)

    p = sub.add_parser("kron-sketch", help="sketch A1 (x) A2 and write reports")
    _add_run_flags(p)
    p.add_argument("--a1", help="Matrix Market file for A1 (implies --generator file)")
    p.add_argument("--a2", help="Matrix Market file for A2")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("bench-scaling", help="ledger scaling sweep over n")
    _add_run_flags(p, d=8)
    p.add_argument("--n-list", required=True, help="comma-separated ascending sizes")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("leverage", help="leverage scores of a Matrix Market matrix")
    p.add_argument("a_file")
    p.add_argument("--b", dest="b_file")
    p.add_argument("--jl", action="store_true")
    p.add_argument("--compare", action="store_true")
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--c-jl", type=float, default=HalvingConfig.c_jl)
    p.add_argument("--out", required=True)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen":
            cfg = _config(args)
            if cfg.generator == "file":
                raise ValueError("gen needs a synthetic generator")
            A = generate.make(cfg.generator, cfg.n, cfg.d, cfg.seed)
            path = mmio.write_matrix(args.out, A)
            print(path)
        elif args.command == "kron-sketch":
            files = None
            if args.a1 or args.a2:
                if not (args.a1 and args.a2):
                    raise ValueError("--a1 and --a2 must be given together")
                files, args.generator = (args.a1, args.a2), "file"
            for r in cmd_kron_sketch(_config(args), args.out, files):
                print(json.dumps({k: r[k] for k in ("rows_kept", "distortion", "spectral_pass")}
                                 | {"seed": r["config"]["seed"]}))
        elif args.command == "bench-scaling":
            result = cmd_bench_scaling(args.n_list.split(","), _config(args), args.out)
            print(json.dumps(result["slopes"]))
        elif args.command == "leverage":
            print(json.dumps(cmd_leverage(args.a_file, args.out, args.b_file, args.jl, args.compare,
                                          args.eps, args.seed, args.c_jl)))
    except (ValueError, OSError) as exc:
        print(f"kronsketch: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
