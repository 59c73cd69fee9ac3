"""Average GRS robustness per SNR bin on the desk model.

    python3 scripts/snr_sweep.py [--snr -10 --snr -5 ...] [--frames 500]
"""

import argparse
from dataclasses import replace

import numpy as np

from grsattack import bench, metrics


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--snr", type=float, action="append", help="SNR bins (default: the desk bins)")
    ap.add_argument("--frames", type=int, default=None, help="frames per (scheme, SNR) cell")
    ap.add_argument("--method", default="grs")
    args = ap.parse_args()

    cfg = bench.ExperimentConfig()
    ds_cfg = cfg.dataset
    if args.snr:
        ds_cfg = replace(ds_cfg, snr_list=args.snr)
    if args.frames:
        ds_cfg = replace(ds_cfg, frames_per_cell=args.frames)
    ds = bench.make_dataset(ds_cfg)
    model = bench.fit_model(cfg, ds)
    acfg = cfg.attacks[args.method]

    print(f"{'snr':>5} {'clean':>6} {'adv':>6} {'robust':>8} {'fooled':>7}")
    for snr in sorted(set(ds_cfg.snr_list)):
        idx = bench.select_test(ds, [snr])
        X, y = ds.X[idx], ds.labels[idx]
        res = bench.attack_samples(model, X, y, acfg)
        row = metrics.summarize(model, "desk", args.method, snr, X, y, res, cfg.failed_policy)
        fooled = np.mean([r.success for r in res])
        print(f"{snr:5g} {row.clean_acc:6.3f} {row.adv_acc:6.3f} {row.avg_robustness:8.5f} {fooled:7.3f}")


if __name__ == "__main__":
    main()
