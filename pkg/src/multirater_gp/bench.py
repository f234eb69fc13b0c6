"""Inference timing for the GP variants.

Inference here means factoring the training covariance and predicting a
fixed block of test inputs, timed separately and together.
"""

from __future__ import annotations

import time

import numpy as np
from threadpoolctl import threadpool_info, threadpool_limits

from .data import SyntheticSpec, generate_synthetic
from .linalg import Hyperparameters
from .models import fit, predict

__all__ = ["time_inference", "run_bench"]


def time_inference(ds, Xtest, variant, hp: Hyperparameters, repeats: int = 3) -> dict:
    """Wall-clock seconds of ``repeats`` factor + predict runs.

    One untimed run precedes the measurements so that allocation and
    library warm-up do not land in the first sample.
    """
    if repeats < 3:
        raise ValueError("repeats must be >= 3")
    predict(fit(ds, variant, hp), Xtest, raw=False)
    factor, pred = [], []
    for _ in range(repeats):
        t0 = time.perf_counter()
        model = fit(ds, variant, hp)
        t1 = time.perf_counter()
        predict(model, Xtest, raw=False)
        t2 = time.perf_counter()
        factor.append(t1 - t0)
        pred.append(t2 - t1)
    total = np.add(factor, pred)

    def stats(v):
        return {"mean": float(np.mean(v)), "std": float(np.std(v)), "min": float(np.min(v))}

    return {
        "variant": variant,
        "repeats": repeats,
        "factor_s": stats(factor),
        "predict_s": stats(pred),
        "wall_time_s": stats(total),
    }


def _blas_threads():
    counts = [info.get("num_threads", 0) for info in threadpool_info()]
    return max(counts) if counts else 1


def run_bench(grid_n, grid_r, repeats=3, threads=1, n_test=100, dim=2, seed=0,
              variants=("base", "joint", "repeat")) -> dict:
    """Time every variant on a synthetic problem for each (N, R) in the grid.

    All variants share the true hyperparameters of the generator, so the
    timings measure linear algebra only.
    """
    cells = []
    with threadpool_limits(limits=threads):
        used_threads = _blas_threads()
        for n in grid_n:
            for r in grid_r:
                spec = SyntheticSpec(n_train=n, n_test=n_test, dim=dim, raters=r, seed=seed)
                train, test, _ = generate_synthetic(spec)
                train = train.centered()
                hp = spec.true_hp
                row = {"n": int(n), "r": int(r), "variants": {}}
                for v in variants:
                    row["variants"][v] = time_inference(train, test.features, v, hp, repeats)
                t = {v: row["variants"][v]["wall_time_s"]["mean"] for v in variants}
                if "repeat" in t and "joint" in t:
                    row["ratio_repeat_joint"] = t["repeat"] / t["joint"]
                cells.append(row)
    return {"threads": used_threads, "repeats": repeats, "n_test": n_test, "cells": cells}
