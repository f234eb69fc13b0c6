"""Command-line interface: synth, train, predict, evaluate, compare, bench.

Every command writes JSON with sorted keys and embeds its resolved
configuration, the package version and checksums of the datasets it read.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import run_bench
from .data import (
    SyntheticSpec,
    dataset_checksum,
    dump_json,
    generate_synthetic,
    load_dataset,
    load_model,
    save_dataset,
    save_model,
)
from .metrics import discretize_predictive, evaluate, pcc, round_and_clamp
from .models import VARIANTS, predict
from .optimize import OptimizerConfig
from .pipeline import train_model
from .stats import paired_t_test, steiger_z1

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

log = logging.getLogger("multirater_gp")


class _JitterLog(logging.Handler):
    def __init__(self):
        super().__init__(logging.INFO)
        self.events = []

    def emit(self, record):
        self.events.append(record.getMessage())


def _header(args, **checksums):
    config = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    return {"config": config, "version": __version__, "checksums": checksums}


def _int_list(text):
    return [int(v) for v in text.split(",") if v.strip()]


def cmd_synth(args):
    spec = SyntheticSpec(
        n_train=args.n_train, n_test=args.n_test, dim=args.dim, s=args.s, l=args.l,
        sigma=args.sigma, raters=args.raters, score_min=args.score_min,
        score_max=args.score_max, seed=args.seed, rounded=not args.unrounded,
    )
    train, test, truth = generate_synthetic(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(train, out / f"train.{args.format}", args.format)
    save_dataset(test, out / f"test.{args.format}", args.format)
    sidecar = _header(args, train=dataset_checksum(train), test=dataset_checksum(test))
    sidecar.update({
        "spec": spec.to_dict(),
        "true_hyperparameters": spec.true_hp.to_dict(),
        "latent_train": truth["f_train"].tolist(),
        "latent_test": truth["f_test"].tolist(),
    })
    dump_json(sidecar, out / "truth.json")
    print(f"wrote {out / f'train.{args.format}'}, {out / f'test.{args.format}'}, {out / 'truth.json'}")


def cmd_train(args):
    ds = load_dataset(args.data, args.format)
    cfg = OptimizerConfig(
        max_iters=args.max_iters, grad_tol=args.grad_tol, step_init=args.step_init,
        seed=args.seed, restarts=args.restarts,
    )
    handler = _JitterLog()
    linalg_log = logging.getLogger("multirater_gp.linalg")
    old_level = linalg_log.level
    linalg_log.addHandler(handler)
    linalg_log.setLevel(logging.INFO)
    try:
        model, report, prepared = train_model(
            ds, args.variant, cfg, whiten=not args.no_whiten, center=not args.no_center,
            force_repeat=args.force_repeat,
        )
    finally:
        linalg_log.removeHandler(handler)
        linalg_log.setLevel(old_level)
    save_model(model, prepared, args.out)
    doc = _header(args, data=dataset_checksum(ds))
    doc.update({
        "optimizer": cfg.to_dict(),
        "fit": report.to_dict(),
        "jitter_events": handler.events,
        "whitening_dropped": 0 if model.whitening is None else model.whitening.n_dropped,
    })
    report_path = args.report or str(Path(args.out).with_suffix(".report.json"))
    dump_json(doc, report_path)
    hp = report.final_hp
    print(
        f"{args.variant}: objective {report.final_objective:.6f} after {report.iterations} "
        f"iterations (converged={report.converged}); s={hp.s:.4g} l={hp.l:.4g} "
        f"sigma={hp.sigma:.4g}"
    )


def cmd_predict(args):
    model = load_model(args.model)
    ds = load_dataset(args.data, args.format)
    pd = predict(model, ds.features)
    rng = (ds.score_min, ds.score_max)
    scores = round_and_clamp(pd.mean, rng)
    with open(args.out, "w") as fh:
        for i in range(len(pd)):
            dist = discretize_predictive(pd.mean[i], pd.var[i], rng)
            line = {
                "index": i,
                "mean": float(pd.mean[i]),
                "var": float(pd.var[i]),
                "latent_var": float(pd.latent_var[i]),
                "score": int(scores[i]),
                "score_min": rng[0],
                "score_max": rng[1],
                "probs": dist.probs.tolist(),
            }
            fh.write(json.dumps(line, sort_keys=True) + "\n")
    print(f"wrote {len(pd)} predictions to {args.out}")


class _Predictions:
    def __init__(self, path):
        rows = []
        with open(path) as fh:
            for lineno, line in enumerate(fh):
                if not line.strip():
                    continue
                try:
                    rows.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{path}:{lineno + 1}: {exc}") from None
        try:
            rows.sort(key=lambda r: r["index"])
            self.mean = np.array([r["mean"] for r in rows], dtype=float)
            self.var = np.array([r["var"] for r in rows], dtype=float)
        except KeyError as exc:
            raise ValueError(f"{path}: prediction line missing {exc}") from None


def _evaluate_files(pred_path, ds):
    return evaluate(_Predictions(pred_path), ds.ratings, (ds.score_min, ds.score_max))


def cmd_evaluate(args):
    ds = load_dataset(args.data, args.format)
    rep = _evaluate_files(args.predictions, ds)
    doc = _header(args, data=dataset_checksum(ds))
    doc["metrics"] = rep.to_dict()
    dump_json(doc, args.out)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "pred_score", "ref_score", "sq_err", "kl"])
            for i in range(rep.per_item_kl.size):
                w.writerow([
                    i, int(rep.pred_scores[i]), int(rep.ref_scores[i]),
                    repr(float(rep.per_item_sq_err[i])), repr(float(rep.per_item_kl[i])),
                ])
    pcc_text = "undefined" if np.isnan(rep.pcc) else f"{rep.pcc:.4f}"
    print(f"PCC {pcc_text}  MSE {rep.mse:.4f}  KL {rep.kl:.4f}")


def cmd_compare(args):
    ds = load_dataset(args.data, args.format)
    a = _evaluate_files(args.pred_a, ds)
    b = _evaluate_files(args.pred_b, ds)
    n = a.per_item_kl.size
    doc = _header(args, data=dataset_checksum(ds))
    doc["mse"] = {"a": a.mse, "b": b.mse, **paired_t_test(a.per_item_sq_err, b.per_item_sq_err).to_dict()}
    doc["kl"] = {"a": a.kl, "b": b.kl, **paired_t_test(a.per_item_kl, b.per_item_kl).to_dict()}
    try:
        r_12 = pcc(a.pred_scores, b.pred_scores)
        z = steiger_z1(a.pcc, b.pcc, r_12, n).to_dict()
    except ValueError as exc:
        r_12, z = None, {"statistic": None, "p_value": None, "n": n, "error": str(exc)}
    doc["pcc"] = {"a": a.to_dict()["pcc"], "b": b.to_dict()["pcc"], "r_12": r_12, **z}
    dump_json(doc, args.out)
    print(
        f"p_MSE {doc['mse']['p_value']:.4g}  p_KL {doc['kl']['p_value']:.4g}  "
        f"p_PCC {doc['pcc']['p_value']}"
    )


def cmd_bench(args):
    if args.repeats < 3:
        raise ValueError("--repeats must be at least 3")
    res = run_bench(
        args.grid_n, args.grid_r, repeats=args.repeats, threads=args.threads,
        n_test=args.n_test, seed=args.seed, variants=tuple(args.variants),
    )
    doc = _header(args)
    doc.update(res)
    dump_json(doc, args.out)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "r", "variant", "stage", "mean_s", "std_s", "repeats", "threads"])
            for cell in res["cells"]:
                for v, t in cell["variants"].items():
                    for stage in ("factor_s", "predict_s", "wall_time_s"):
                        w.writerow([
                            cell["n"], cell["r"], v, stage.removesuffix("_s"),
                            t[stage]["mean"], t[stage]["std"], t["repeats"], res["threads"],
                        ])
    for cell in res["cells"]:
        times = "  ".join(
            f"{v} {t['wall_time_s']['mean']:.4f}s" for v, t in cell["variants"].items()
        )
        ratio = cell.get("ratio_repeat_joint")
        extra = f"  repeat/joint {ratio:.1f}x" if ratio else ""
        print(f"N={cell['n']} R={cell['r']}: {times}{extra}")


def build_parser():
    p = argparse.ArgumentParser(prog="multirater-gp", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_help, out_default=None):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default=out_default, required=out_default is None, help=out_help)
        sp.add_argument("--format", choices=("json", "csv"), default=None,
                        help="dataset format (default: from file extension)")

    sp = sub.add_parser("synth", help="generate a synthetic multi-rater dataset")
    common(sp, "output directory", "data")
    sp.set_defaults(format="json")
    sp.add_argument("--n-train", type=int, default=300)
    sp.add_argument("--n-test", type=int, default=200)
    sp.add_argument("--dim", type=int, default=2)
    sp.add_argument("--raters", type=int, default=5)
    sp.add_argument("--s", type=float, default=2.0, help="kernel scale")
    sp.add_argument("--l", type=float, default=1.0, help="kernel length")
    sp.add_argument("--sigma", type=float, default=0.8, help="rater noise std")
    sp.add_argument("--score-min", type=int, default=0)
    sp.add_argument("--score-max", type=int, default=10)
    sp.add_argument("--unrounded", action="store_true", help="keep ratings continuous")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("train", help="optimize hyperparameters and write a model file")
    common(sp, "model file", "model.json")
    sp.add_argument("--data", required=True)
    sp.add_argument("--variant", choices=VARIANTS, default="joint")
    sp.add_argument("--max-iters", type=int, default=500)
    sp.add_argument("--restarts", type=int, default=3)
    sp.add_argument("--grad-tol", type=float, default=1e-6)
    sp.add_argument("--step-init", type=float, default=0.1)
    sp.add_argument("--force-repeat", action="store_true",
                    help="allow the repeat variant beyond 4000 ratings")
    sp.add_argument("--no-whiten", action="store_true")
    sp.add_argument("--no-center", action="store_true")
    sp.add_argument("--report", default=None, help="report path (default: <out>.report.json)")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("predict", help="write per-item predictive distributions")
    common(sp, "predictions file (JSON lines)", "predictions.jsonl")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("evaluate", help="PCC, MSE and discrete KL against raters")
    common(sp, "report file", "eval.json")
    sp.add_argument("--predictions", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--csv", default=None, help="also write per-item metrics as CSV")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("compare", help="significance of differences between two systems")
    common(sp, "report file", "compare.json")
    sp.add_argument("--pred-a", required=True)
    sp.add_argument("--pred-b", required=True)
    sp.add_argument("--data", required=True)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("bench", help="time inference of the GP variants")
    common(sp, "report file", "bench.json")
    sp.add_argument("--grid-n", type=_int_list, default=[200])
    sp.add_argument("--grid-r", type=_int_list, default=[1, 5])
    sp.add_argument("--repeats", type=int, default=3)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--n-test", type=int, default=100)
    sp.add_argument("--variants", nargs="+", choices=VARIANTS, default=list(VARIANTS))
    sp.add_argument("--csv", default=None, help="also write tidy timings as CSV")
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        args.func(args)
    except np.linalg.LinAlgError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, TypeError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
