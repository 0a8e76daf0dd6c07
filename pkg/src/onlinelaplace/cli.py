"""Command line runner: train, evaluate, verify, protocol.

Exit codes: 0 success, 1 numerical failure, 2 usage error, 3 I/O or missing data.
"""

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import SplitSpec, data_root, load_dataset, make_split
from .exceptions import MissingArtifacts, NumericalBreakdown, ParseError
from .model import Hyperparams, MlpArchitecture
from .train import OFFLINE_MAX_STEPS, STEP_BUDGETS, TRACE_COLUMNS, TrainConfig, run

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


def fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


class TraceWriter:
    """Appends trace rows to a CSV file, flushing after each row."""

    def __init__(self, path, digest):
        self.fh = open(path, "w", newline="", encoding="utf-8")
        self.fh.write(f"# manifest-sha256: {digest}\n")
        self.fh.write(",".join(TRACE_COLUMNS) + "\n")
        self.fh.flush()

    def __call__(self, row):
        self.fh.write(",".join(fmt(row.get(c)) for c in TRACE_COLUMNS) + "\n")
        self.fh.flush()

    def close(self):
        self.fh.close()


def read_trace(path):
    """Rows of a trace file as dicts of floats (``phase`` kept as text)."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = []
    for rec in csv.DictReader(io.StringIO("".join(lines))):
        rows.append({k: (v if k == "phase" else (float(v) if v != "" else math.nan)) for k, v in rec.items()})
    return rows


def run_dir(out_dir, dataset, procedure, split):
    return Path(out_dir) / dataset / procedure / f"split_{split}"


def build_manifest(args, dataset_checksum, data_path):
    steps = args.steps
    if steps is None:
        steps = OFFLINE_MAX_STEPS if args.procedure == "offline" else STEP_BUDGETS.get(args.dataset, 1000)
    cfg = TrainConfig(
        procedure=args.procedure,
        max_steps=steps,
        hyper_init=Hyperparams(args.alpha, args.beta),
        seed=args.seed,
        damping=args.damping,
        record_every=args.record_every,
        diagnostics=not args.no_diagnostics,
    )
    return {
        "dataset": args.dataset,
        "data_path": str(data_path),
        "dataset_sha256": dataset_checksum,
        "procedure": args.procedure,
        "seed": args.seed,
        "split_index": args.split,
        "hidden_units": args.hidden,
        "posthoc": args.posthoc,
        "train_config": cfg.as_dict(),
        "code_version": __version__,
    }


def config_from_manifest(man):
    c = dict(man["train_config"])
    c["hyper_init"] = Hyperparams(**c["hyper_init"])
    return TrainConfig(**c)


def train_from_manifest(man, out):
    """Execute one run described by a manifest dict, writing artifacts into ``out``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = config_from_manifest(man)
    ds = load_dataset(man["dataset"], man.get("datasets_file"))
    if man.get("dataset_sha256") and ds.checksum != man["dataset_sha256"]:
        raise ParseError(f"dataset {man['dataset']} checksum does not match the manifest")
    split = make_split(
        ds,
        SplitSpec(seed=man["seed"], split_index=man["split_index"], use_validation=cfg.procedure == "offline"),
    )
    arch = MlpArchitecture(ds.X.shape[1], man["hidden_units"])

    text = json.dumps(man, indent=2, sort_keys=True)
    (out / "manifest.json").write_text(text + "\n", encoding="utf-8")
    digest = hashlib.sha256(text.encode()).hexdigest()
    writer = TraceWriter(out / "trace.csv", digest)
    try:
        kw = {"posthoc": man.get("posthoc")} if cfg.procedure == "offline" else {}
        res = run(arch, split, cfg, on_record=writer, **kw)
    finally:
        writer.close()
    sc = split.scaler
    np.savez(
        out / "model.npz",
        params=res.params,
        alpha=res.hyper.alpha,
        beta=res.hyper.beta,
        input_dim=arch.input_dim,
        hidden_units=arch.hidden_units,
        feature_means=sc.feature_means,
        feature_stds=sc.feature_stds,
        target_mean=sc.target_mean,
        target_std=sc.target_std,
    )
    return res


def cmd_train(args):
    if args.manifest:
        man = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        out = Path(args.out_dir) if args.out_dir_given else Path(args.manifest).parent
    else:
        if not args.dataset:
            print("error: --dataset is required without --manifest", file=sys.stderr)
            return EXIT_USAGE
        ds = load_dataset(args.dataset, args.datasets_file)
        man = build_manifest(args, ds.checksum, args.datasets_file or data_root() / "datasets.ini")
        if args.datasets_file:
            man["datasets_file"] = str(args.datasets_file)
        out = run_dir(args.out_dir, args.dataset, args.procedure, args.split)
    res = train_from_manifest(man, out)
    fin = res.trace.final
    print(
        f"{man['dataset']} {man['procedure']} split {man['split_index']}: "
        f"test_rmse={fin['test_rmse']:.4f} test_loglik={fin['test_loglik']:.4f} "
        f"alpha={res.hyper.alpha:.4g} beta={res.hyper.beta:.4g} -> {out}"
    )
    return EXIT_OK


def collect(out_dir, datasets=None, procedures=None, splits=None):
    """Final-row metrics of every requested run; raises MissingArtifacts for absent ones."""
    out_dir = Path(out_dir)
    if datasets is None:
        datasets = sorted(p.name for p in out_dir.iterdir() if p.is_dir())
    rows, missing = [], []
    for ds in datasets:
        procs = procedures or sorted(p.name for p in (out_dir / ds).iterdir() if p.is_dir())
        for proc in procs:
            if splits is None:
                found = sorted((out_dir / ds / proc).glob("split_*"), key=lambda p: int(p.name[6:]))
                idx = [int(p.name[6:]) for p in found]
            else:
                idx = splits
            for k in idx:
                path = run_dir(out_dir, ds, proc, k) / "trace.csv"
                if not path.exists():
                    missing.append(path)
                    continue
                final = [r for r in read_trace(path) if r["phase"] == "final"]
                if not final:
                    missing.append(path)
                    continue
                f = final[-1]
                rows.append({
                    "dataset": ds, "procedure": proc, "split": k,
                    "test_rmse": f["test_rmse"], "test_loglik": f["test_loglik"],
                    "alpha": f["alpha"], "beta": f["beta"],
                })
    if missing:
        raise MissingArtifacts(missing)
    return rows


def mean_stderr(values):
    values = np.asarray(values, dtype=np.float64)
    if len(values) < 2:
        return float(values.mean()), None
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(len(values)))


def summarise(rows):
    groups = {}
    for r in rows:
        groups.setdefault((r["dataset"], r["procedure"]), []).append(r)
    table = []
    for (ds, proc), rs in sorted(groups.items()):
        rm, rs_e = mean_stderr([r["test_rmse"] for r in rs])
        lm, ls_e = mean_stderr([r["test_loglik"] for r in rs])
        table.append({
            "dataset": ds, "procedure": proc, "n_splits": len(rs),
            "test_rmse_mean": rm, "test_rmse_stderr": rs_e,
            "test_loglik_mean": lm, "test_loglik_stderr": ls_e,
        })
    return table


SUMMARY_COLUMNS = (
    "dataset", "procedure", "n_splits", "test_rmse_mean", "test_rmse_stderr",
    "test_loglik_mean", "test_loglik_stderr",
)


def write_csv(path, rows, columns):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(columns) + "\n")
        for r in rows:
            fh.write(",".join(fmt(r.get(c)) for c in columns) + "\n")


def format_table(table):
    def pm(m, s):
        return f"{m:.4f} ± {s:.4f}" if s is not None else f"{m:.4f} ± -"

    lines = [f"{'dataset':<10} {'procedure':<9} {'splits':>6}  {'test RMSE':>18}  {'test log-lik':>18}"]
    for t in table:
        lines.append(
            f"{t['dataset']:<10} {t['procedure']:<9} {t['n_splits']:>6}  "
            f"{pm(t['test_rmse_mean'], t['test_rmse_stderr']):>18}  "
            f"{pm(t['test_loglik_mean'], t['test_loglik_stderr']):>18}"
        )
    return "\n".join(lines)


def cmd_evaluate(args):
    splits = parse_splits(args.splits) if args.splits else None
    rows = collect(args.out_dir, args.datasets, args.procedures, splits)
    table = summarise(rows)
    out = Path(args.out_dir)
    write_csv(out / "per_split.csv", rows, ("dataset", "procedure", "split", "test_rmse", "test_loglik", "alpha", "beta"))
    write_csv(out / "summary.csv", table, SUMMARY_COLUMNS)
    print(format_table(table))
    return EXIT_OK


def cmd_verify(args):
    from .verify import run_all

    results = run_all(seed=args.seed)
    failed = [r for r in results if not r.passed]
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<24} {r.detail}")
    if failed:
        print(f"{len(failed)} propert{'y' if len(failed) == 1 else 'ies'} failed: "
              + ", ".join(r.name for r in failed))
        return EXIT_NUMERIC
    return EXIT_OK


def parse_splits(text):
    """``"3"`` -> [3]; ``"0-9"`` -> [0..9]; ``"0,2,5"`` -> [0, 2, 5]."""
    out = []
    for part in str(text).split(","):
        if "-" in part:
            a, b = part.split("-")
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return out


def _protocol_job(job):
    man, out = job
    try:
        train_from_manifest(man, out)
        return None
    except NumericalBreakdown as e:
        return f"{out}: {e}"


def cmd_protocol(args):
    """Train every (split, procedure) pair for one dataset, then summarise."""
    ds = load_dataset(args.dataset, args.datasets_file)
    jobs = []
    for k in parse_splits(args.splits):
        for proc in args.procedures:
            ns = argparse.Namespace(**vars(args))
            ns.procedure, ns.split = proc, k
            ns.record_every = args.record_every if proc != "offline" else args.offline_record_every
            man = build_manifest(ns, ds.checksum, args.datasets_file or data_root() / "datasets.ini")
            if args.datasets_file:
                man["datasets_file"] = str(args.datasets_file)
            jobs.append((man, run_dir(args.out_dir, args.dataset, proc, k)))
    if args.jobs == 1:
        errors = [_protocol_job(j) for j in jobs]
    else:
        from joblib import Parallel, delayed

        errors = Parallel(n_jobs=args.jobs)(delayed(_protocol_job)(j) for j in jobs)
    errors = [e for e in errors if e]
    for e in errors:
        print(f"numerical failure: {e}", file=sys.stderr)
    table = summarise(collect(args.out_dir, [args.dataset], args.procedures, parse_splits(args.splits)))
    write_csv(Path(args.out_dir) / f"summary_{args.dataset}.csv", table, SUMMARY_COLUMNS)
    print(format_table(table))
    return EXIT_NUMERIC if errors else EXIT_OK


def _add_train_flags(p):
    p.add_argument("--dataset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=None, help="default: per-dataset budget (offline: 30000)")
    p.add_argument("--alpha", type=float, default=1.0, help="initial prior precision")
    p.add_argument("--beta", type=float, default=1.0, help="initial noise precision")
    p.add_argument("--damping", type=float, default=1.0)
    p.add_argument("--record-every", type=int, default=1)
    p.add_argument("--hidden", type=int, default=50)
    p.add_argument("--posthoc", choices=["lf", "lh"], default="lf",
                   help="objective for offline predictive hyperparameters")
    p.add_argument("--no-diagnostics", action="store_true",
                   help="offline: skip evidence columns on recorded rows")
    p.add_argument("--datasets-file", type=Path, default=None,
                   help="dataset manifest (default: $ONLINELAPLACE_DATA/datasets.ini)")


def make_parser():
    parser = argparse.ArgumentParser(prog="onlinelaplace", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one model and write trace, model and manifest")
    _add_train_flags(p)
    p.add_argument("--procedure", choices=["ol", "lm", "offline"], default="ol")
    p.add_argument("--split", type=int, default=0)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--manifest", type=Path, default=None, help="re-run from a saved run manifest")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="mean ± standard error over splits")
    p.add_argument("--out-dir", default="runs")
    p.add_argument("--datasets", nargs="*", default=None)
    p.add_argument("--procedures", nargs="*", default=None)
    p.add_argument("--splits", default=None, help="e.g. 0-9")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("verify", help="run the evidence/derivative property suite")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("protocol", help="train all splits and procedures for one dataset")
    _add_train_flags(p)
    p.add_argument("--procedures", nargs="+", default=["ol", "lm", "offline"],
                   choices=["ol", "lm", "offline"])
    p.add_argument("--splits", default="0-9")
    p.add_argument("--offline-record-every", type=int, default=100)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out-dir", default="runs")
    p.set_defaults(func=cmd_protocol)
    return parser


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    if args.command == "train":
        args.out_dir_given = args.out_dir is not None
        if args.out_dir is None:
            args.out_dir = "runs"
    if args.command == "protocol" and not args.dataset:
        parser.error("--dataset is required")
    try:
        return args.func(args)
    except NumericalBreakdown as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except MissingArtifacts as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (OSError, ParseError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
