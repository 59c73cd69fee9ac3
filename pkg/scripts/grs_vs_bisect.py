"""Golden-ratio versus bisection bracketing on the desk model.

Reports loop counts per search, agreement of the found strengths and time per
batch of 128 frames.

    python3 scripts/grs_vs_bisect.py [--snr 0] [--tol 1e-4]
"""

import argparse
from dataclasses import replace

import numpy as np

from grsattack import bench, metrics


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--snr", type=float, default=0.0)
    ap.add_argument("--tol", type=float, default=1e-4)
    ap.add_argument("--pmax", type=float, default=0.05)
    args = ap.parse_args()

    cfg = bench.ExperimentConfig()
    ds = bench.make_dataset(cfg.dataset)
    model = bench.fit_model(cfg, ds)
    idx = bench.select_test(ds, [args.snr])
    X, y = ds.X[idx], ds.labels[idx]

    found = {}
    for method in ("grs", "bisect"):
        acfg = replace(cfg.attacks[method], tol=args.tol, p_max=args.pmax)
        res = bench.attack_samples(model, X, y, acfg)
        loops = [n for r in res for n in r.per_class_iters.values()]
        t = metrics.batch_attack_time(acfg, model, X[: metrics.TIMING_BATCH], y[: metrics.TIMING_BATCH])
        found[method] = np.array([r.eps_star for r in res])
        if loops:
            print(f"{method:7} searches {len(loops):5d}  loops min/mean/max {min(loops)}/{np.mean(loops):.2f}/{max(loops)}"
                  f"  t/128 {t.median_s:.4f}s")
        else:
            print(f"{method:7} no frame attackable within p_max  t/128 {t.median_s:.4f}s")

    both = np.isfinite(found["grs"]) & np.isfinite(found["bisect"])
    if both.any():
        gap = np.abs(found["grs"][both] - found["bisect"][both])
        print(f"eps* agreement on {int(both.sum())} frames: max |grs - bisect| {gap.max():.2e} (tol {args.tol:g})")


if __name__ == "__main__":
    main()
