"""Desk-scale comparison table: plain and FGSM-trained models against every attack.

    python3 scripts/desk_comparison.py --out results/comparison.csv [--snr 20] [--workers 4]
"""

import argparse
import logging
import pathlib

from grsattack import attacks, bench


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="JSON experiment config (defaults to the desk config)")
    ap.add_argument("--snr", type=float, action="append", help="restrict to these SNR bins")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="results/comparison.csv")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = bench.load_config(args.config) if args.config else bench.ExperimentConfig()
    ds = bench.make_dataset(cfg.dataset)
    models = {
        "plain": bench.fit_model(cfg, ds),
        "at-fgsm": bench.fit_model(cfg, ds, adv="fgsm"),
    }
    report = bench.compare(models, ds, attacks.METHODS, cfg, args.snr, args.workers)

    out = pathlib.Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_csv())
    out.with_suffix(".json").write_text(report.to_json())

    print(f"{'model':8} {'attack':7} {'snr':>5} {'clean':>6} {'adv':>6} {'robust':>8} {'t/128':>8}")
    for r in report.rows:
        print(f"{r.model:8} {r.attack:7} {r.snr_db:5g} {r.clean_acc:6.3f} {r.adv_acc:6.3f} "
              f"{r.avg_robustness:8.5f} {r.mean_batch_time_s:8.3f}")


if __name__ == "__main__":
    main()
