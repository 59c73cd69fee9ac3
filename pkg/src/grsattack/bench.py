"""Experiment configuration and the ``grsattack`` command line.

Subcommands: ``gen`` (dataset file), ``train`` (model file), ``attack``
(per-sample CSV) and ``compare`` (report CSV + JSON). A JSON config with the
sections ``dataset``, ``model``, ``train``, ``attacks`` and ``report`` supplies
defaults; command-line flags override it.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import attacks, metrics, nn, signal

log = logging.getLogger("grsattack")

ATTACK_CSV_FIELDS = (
    "sample_id",
    "method",
    "snr_db",
    "l_true",
    "predicted_clean",
    "predicted_adv",
    "eps_star",
    "linf_ratio",
    "success",
    "iterations",
    "wall_time_s",
)
TIMING_COLUMNS = ("wall_time_s", "mean_batch_time_s")


@dataclass
class DatasetConfig:
    schemes: list[str] = field(default_factory=lambda: ["OOK", "4ASK", "BPSK", "QPSK"])
    snr_list: list[float] = field(default_factory=lambda: [0.0, 5.0, 10.0, 15.0, 20.0])
    frames_per_cell: int = 2000
    N: int = signal.DEFAULT_FRAME_LEN
    samples_per_symbol: int = signal.DEFAULT_SPS
    seed: int = 1


@dataclass
class ModelConfig:
    hidden: list[int] = field(default_factory=lambda: [128, 64])
    seed: int = 0


@dataclass
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: nn.TrainConfig = field(default_factory=lambda: nn.TrainConfig(epochs=20, learning_rate=0.05))
    attacks: dict[str, attacks.AttackConfig] = field(
        default_factory=lambda: {m: attacks.AttackConfig(method=m) for m in attacks.METHODS}
    )
    failed_policy: str = "pmax"
    data_path: str = "data.amcd"
    model_path: str = "model.amcm"
    out_path: str | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        unknown = set(doc) - {"dataset", "model", "train", "attacks", "report"}
        if unknown:
            raise ValueError(f"unknown config sections: {', '.join(sorted(unknown))}")
        cfg = cls()
        if "dataset" in doc:
            cfg.dataset = _build(DatasetConfig, doc["dataset"], "dataset")
        if "model" in doc:
            cfg.model = _build(ModelConfig, doc["model"], "model")
        if "train" in doc:
            tr = dict(doc["train"])
            mix = tr.pop("adv_mix", None)
            cfg.train = _build(nn.TrainConfig, tr, "train")
            if mix is not None:
                cfg.train.adv_mix = _build(nn.AdvMix, mix, "train.adv_mix")
        for method, params in doc.get("attacks", {}).items():
            if method not in attacks.METHODS:
                raise ValueError(f"unknown attack method {method!r} in config")
            cfg.attacks[method] = _build(attacks.AttackConfig, {**params, "method": method}, f"attacks.{method}")
        report = doc.get("report", {})
        extra = set(report) - {"failed_policy", "data_path", "model_path", "out"}
        if extra:
            raise ValueError(f"unknown keys in report: {', '.join(sorted(extra))}")
        cfg.failed_policy = report.get("failed_policy", cfg.failed_policy)
        cfg.data_path = report.get("data_path", cfg.data_path)
        cfg.model_path = report.get("model_path", cfg.model_path)
        cfg.out_path = report.get("out", cfg.out_path)
        if cfg.failed_policy not in metrics.FAILED_POLICIES:
            raise ValueError(f"unknown failed policy {cfg.failed_policy!r}")
        return cfg

    def to_dict(self) -> dict:
        return {
            "dataset": asdict(self.dataset),
            "model": asdict(self.model),
            "train": asdict(self.train),
            "attacks": {m: {k: v for k, v in asdict(c).items() if k != "method"} for m, c in self.attacks.items()},
            "report": {
                "failed_policy": self.failed_policy,
                "data_path": self.data_path,
                "model_path": self.model_path,
                "out": self.out_path,
            },
        }


def _build(cls, params: dict, where: str):
    names = {f.name for f in fields(cls)}
    bad = set(params) - names
    if bad:
        raise ValueError(f"unknown keys in {where}: {', '.join(sorted(bad))}")
    return cls(**params)


def load_config(path) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    return ExperimentConfig.from_dict(json.loads(Path(path).read_text()))


# --- stages -----------------------------------------------------------------


def make_dataset(cfg: DatasetConfig) -> signal.Dataset:
    return signal.build_dataset(
        cfg.schemes,
        cfg.snr_list,
        cfg.frames_per_cell,
        cfg.N,
        cfg.seed,
        samples_per_symbol=cfg.samples_per_symbol,
    )


def make_model(cfg: ModelConfig, ds: signal.Dataset) -> nn.Classifier:
    specs = nn.mlp_specs(2 * ds.frame_len, tuple(cfg.hidden), ds.num_classes)
    return nn.init_model(specs, cfg.seed)


def fit_model(cfg: ExperimentConfig, ds: signal.Dataset, adv: str | None = None) -> nn.Classifier:
    model = make_model(cfg.model, ds)
    tcfg = cfg.train
    if adv is not None:
        mix = tcfg.adv_mix or nn.AdvMix()
        ac = cfg.attacks[adv]
        tcfg = replace(tcfg, adv_mix=replace(mix, attack=adv, eps=ac.eps, step=ac.step, iters=ac.iters))
    if tcfg.adv_mix is not None:
        trained, _ = nn.adversarial_train(model, ds, tcfg)
    else:
        trained, _ = nn.train(model, ds, tcfg)
    return trained


def _attack_one(args):
    model, x, label, cfg = args
    return attacks.run_attack(model, x, label, cfg)


def attack_samples(model, X, y, cfg: attacks.AttackConfig, workers: int = 1) -> list[attacks.AttackResult]:
    """Attack each row of ``X``; results come back in input order."""
    jobs = [(model, x, int(label), cfg) for x, label in zip(X, y)]
    if workers <= 1:
        return [_attack_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_attack_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def attack_rows(model, ds: signal.Dataset, idx, results, method: str) -> list[dict]:
    rows = []
    for i, res in zip(idx, results):
        x = ds.X[i]
        rows.append(
            {
                "sample_id": int(i),
                "method": method,
                "snr_db": float(ds.snr_db[i]),
                "l_true": int(ds.labels[i]),
                "predicted_clean": nn.predict(model, x),
                "predicted_adv": nn.predict(model, x + res.perturbation),
                "eps_star": float(res.eps_star),
                "linf_ratio": float(np.max(np.abs(res.perturbation)) / np.max(np.abs(x))),
                "success": int(res.success),
                "iterations": int(res.iterations),
                "wall_time_s": float(res.wall_time_s),
            }
        )
    return sorted(rows, key=lambda r: r["sample_id"])


def rows_to_csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def select_test(ds: signal.Dataset, snrs=None) -> np.ndarray:
    idx = ds.test_indices
    if snrs:
        idx = idx[np.isin(ds.snr_db[idx], np.asarray(snrs, dtype=np.float64))]
    return idx


def compare(models: dict, ds: signal.Dataset, methods, cfg: ExperimentConfig, snrs=None, workers: int = 1):
    """Attack every test sample with every method, one report row per (model, method, SNR)."""
    report = metrics.RobustnessReport()
    bins = sorted(set(ds.snr_db[ds.test_indices].tolist()))
    if snrs:
        bins = [b for b in bins if b in set(float(s) for s in snrs)]
    for model_id, model in models.items():
        for method in methods:
            acfg = cfg.attacks[method]
            for snr in bins:
                idx = select_test(ds, [snr])
                X, y = ds.X[idx], ds.labels[idx]
                results = attack_samples(model, X, y, acfg, workers)
                report.rows.append(metrics.summarize(model, model_id, method, snr, X, y, results, cfg.failed_policy))
                log.info("%s %s %g dB done", model_id, method, snr)
    return report


# --- CLI --------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(2, f"error: {message}\n")


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v]


def _methods(text: str) -> list[str]:
    out = [m.strip() for m in text.split(",") if m.strip()]
    for m in out:
        if m not in attacks.METHODS:
            raise argparse.ArgumentTypeError(f"unknown method {m!r}")
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--data", help="dataset file (AMCD)")
    common.add_argument("--model", action="append", help="model file (AMCM); repeat in compare")
    common.add_argument("--method", type=_methods, help="attack method(s), comma separated")
    common.add_argument("--snr", type=_floats, help="SNR bins in dB, comma separated")
    common.add_argument("--pmax", type=float)
    common.add_argument("--tol", type=float)
    common.add_argument("--eps", type=float)
    common.add_argument("--step", type=float)
    common.add_argument("--iters", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--failed-policy", choices=metrics.FAILED_POLICIES)
    common.add_argument("--out", help="output path")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="grsattack", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("gen", parents=[common], help="generate a dataset file")
    tr = sub.add_parser("train", parents=[common], help="train a classifier")
    tr.add_argument("--adv", choices=("fgsm", "pgd"), help="adversarial training attack")
    tr.add_argument("--epochs", type=int)
    sub.add_parser("attack", parents=[common], help="attack test samples, per-sample CSV")
    sub.add_parser("compare", parents=[common], help="robustness report over methods and SNR bins")
    return p


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    over = {k: getattr(args, k) for k in ("pmax", "tol", "eps", "step", "iters")}
    keymap = {"pmax": "p_max"}
    changes = {keymap.get(k, k): v for k, v in over.items() if v is not None}
    if changes:
        cfg.attacks = {m: replace(c, **changes) for m, c in cfg.attacks.items()}
    if args.failed_policy:
        cfg.failed_policy = args.failed_policy
    return cfg


def _write(path, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_gen(cfg: ExperimentConfig, args) -> int:
    if args.seed is not None:
        cfg.dataset.seed = args.seed
    ds = make_dataset(cfg.dataset)
    out = args.out or cfg.data_path
    signal.save_dataset(ds, out)
    print(
        f"wrote {out}: {len(ds)} examples, {ds.num_classes} classes, "
        f"{ds.train_indices.size} train / {ds.test_indices.size} test"
    )
    return 0


def cmd_train(cfg: ExperimentConfig, args) -> int:
    ds = signal.load_dataset(args.data or cfg.data_path)
    if args.seed is not None:
        cfg.model.seed = args.seed
        cfg.train.seed = args.seed
    if args.epochs is not None:
        cfg.train.epochs = args.epochs
    model = fit_model(cfg, ds, args.adv)
    out = args.out or cfg.model_path
    nn.save_model(model, out)
    tr, te = ds.train_indices, ds.test_indices
    print(
        f"wrote {out}: train acc {nn.accuracy(model, ds.X[tr], ds.labels[tr]):.4f}, "
        f"test acc {nn.accuracy(model, ds.X[te], ds.labels[te]):.4f}"
    )
    return 0


def _model_paths(cfg, args) -> list[str]:
    return args.model or [cfg.model_path]


def cmd_attack(cfg: ExperimentConfig, args) -> int:
    ds = signal.load_dataset(args.data or cfg.data_path)
    model = nn.load_model(_model_paths(cfg, args)[0])
    if model.input_dim != 2 * ds.frame_len:
        raise ValueError("model input dim does not match dataset frame length")
    methods = args.method or ["grs"]
    idx = select_test(ds, args.snr)
    rows = []
    for method in methods:
        results = attack_samples(model, ds.X[idx], ds.labels[idx], cfg.attacks[method], args.workers)
        rows += attack_rows(model, ds, idx, results, method)
    _write(args.out or cfg.out_path, rows_to_csv(rows, ATTACK_CSV_FIELDS))
    return 0


def cmd_compare(cfg: ExperimentConfig, args) -> int:
    ds = signal.load_dataset(args.data or cfg.data_path)
    models = {}
    for path in _model_paths(cfg, args):
        model = nn.load_model(path)
        if model.input_dim != 2 * ds.frame_len:
            raise ValueError(f"{path}: model input dim does not match dataset frame length")
        models[Path(path).stem] = model
    methods = args.method or list(attacks.METHODS)
    report = compare(models, ds, methods, cfg, args.snr, args.workers)
    out = args.out or cfg.out_path
    _write(out, report.to_csv())
    if out and out != "-":
        Path(out).with_suffix(".json").write_text(report.to_json())
    return 0


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "attack": cmd_attack, "compare": cmd_compare}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        return COMMANDS[args.command](cfg, args)
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
