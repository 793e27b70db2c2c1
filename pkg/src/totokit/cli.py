"""Command-line surface: data generation, training, forecasting, evaluation.

Every command is a pure function of (config file, flag overrides, seed):
reruns produce byte-identical outputs. Exit codes: 0 success, 2 usage or
config error, 3 numeric failure. The environment variable TOTOKIT_SEED
supplies the seed when neither a flag nor the config sets one.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import json
import os
import sys
import zlib
from pathlib import Path

import numpy as np

from . import data as dt
from . import engine as eng
from . import obsbench as ob
from . import smm
from .backbone import MacCounter, Model, ModelConfig, attention_flops
from .numkit import Rng, Tensor, finite_difference_check
from .scaler import ScalerConfig

USAGE_ERROR = 2
NUMERIC_ERROR = 3

ABLATION_FLAGS = {
    "none": {},
    "no-variate-attention": {"disable_variate_attention": True},
    "no-robust-loss": {"disable_robust_loss": True},
    "no-smm": {"single_student_t": True},
    "no-causal-scaling": {"global_scaling": True},
}


class ConfigError(ValueError):
    pass


def _coerce(value: str, target_type):
    if target_type is bool:
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {value!r}")
    if target_type is float:
        return float("-inf") if value.strip() == "-inf" else float(value)
    return target_type(value)


def _section_into(parser: configparser.ConfigParser, section: str, cls, **overrides):
    """Build a dataclass from a config section plus keyword overrides."""
    kwargs = {}
    fields = {f.name: f for f in dataclasses.fields(cls)}
    if parser.has_section(section):
        for key, raw in parser.items(section):
            if key not in fields:
                raise ConfigError(f"[{section}] has unknown key {key!r}")
            f = fields[key]
            if f.type in ("int", int):
                kwargs[key] = _coerce(raw, int)
            elif f.type in ("float", float):
                kwargs[key] = _coerce(raw, float)
            elif f.type in ("bool", bool):
                kwargs[key] = _coerce(raw, bool)
            elif "tuple" in str(f.type):
                kwargs[key] = tuple(_coerce(part.strip(), float) for part in raw.split(","))
            else:
                kwargs[key] = raw
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}]: {exc}") from exc


def load_config(path: str | None) -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    if path:
        if not Path(path).exists():
            raise ConfigError(f"config file not found: {path}")
        parser.read(path)
    return parser


def resolve_seed(flag_seed: int | None, parser: configparser.ConfigParser,
                 section: str = "train") -> int:
    if flag_seed is not None:
        return flag_seed
    if parser.has_option(section, "seed"):
        return parser.getint(section, "seed")
    env = os.environ.get("TOTOKIT_SEED")
    return int(env) if env else 0


def echo_config(parser: configparser.ConfigParser, out_dir: Path,
                extra: dict[str, dict] | None = None) -> None:
    merged = configparser.ConfigParser()
    merged.read_dict({s: dict(parser.items(s)) for s in parser.sections()})
    for section, values in (extra or {}).items():
        if not merged.has_section(section):
            merged.add_section(section)
        for k, v in values.items():
            merged.set(section, k, str(v))
    with (out_dir / "config.ini").open("w") as fh:
        merged.write(fh)


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_generate_data(args) -> int:
    parser = load_config(args.config)
    seed = resolve_seed(args.seed, parser, "synth")
    cfg = _section_into(parser, "synth", dt.SynthConfig, seed=seed)
    series = dt.generate_synthetic(cfg)
    out = _out_dir(args.out)
    dt.save_dataset(series, out / "dataset.jsonl")
    echo_config(parser, out, {"synth": {"seed": seed}})
    print(f"wrote {len(series)} series to {out / 'dataset.jsonl'}")
    return 0


def _model_config(parser) -> ModelConfig:
    return _section_into(parser, "model", ModelConfig)


def _scaler_config(parser, patch_size: int) -> ScalerConfig:
    return _section_into(parser, "scaler", ScalerConfig, patch_size=patch_size)


def cmd_train(args) -> int:
    parser = load_config(args.config)
    seed = resolve_seed(args.seed, parser)
    ablation = ABLATION_FLAGS[args.ablation]
    model_cfg = _model_config(parser)
    train_cfg = _section_into(parser, "train", eng.TrainConfig, seed=seed, **ablation)
    loss_cfg = _section_into(parser, "loss", smm.LossConfig)
    scaler_cfg = _scaler_config(parser, model_cfg.patch_size)
    shuffle_cfg = _section_into(parser, "shuffle", dt.ShuffleConfig)
    dataset = dt.load_dataset(args.data, impute_missing=True)

    out = _out_dir(args.out)
    echo_config(parser, out, {"train": {"seed": seed, "ablation": args.ablation}})
    try:
        result = eng.train(model_cfg, dataset, train_cfg, loss_cfg, scaler_cfg, shuffle_cfg)
    except eng.TrainingDiverged as diverged:
        base = out / "checkpoint"
        eng.save_checkpoint(diverged.checkpoint, base)
        _write_losses(out / "losses.csv", diverged.loss_log)
        print(f"training diverged at step {diverged.step}; "
              f"last good checkpoint: {base.with_suffix('.bin')}", file=sys.stderr)
        return NUMERIC_ERROR

    base = out / "checkpoint"
    eng.save_checkpoint(result.checkpoint, base)
    _write_losses(out / "losses.csv", result.loss_log)
    print(f"trained {train_cfg.total_steps} steps; checkpoint at {base.with_suffix('.bin')}")
    return 0


def _write_losses(path: Path, log) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss", "lr"])
        for step, loss, lr in log:
            writer.writerow([step, repr(loss), repr(lr)])


def _parse_levels(raw: str) -> list[float]:
    levels = [float(part) for part in raw.split(",") if part.strip()]
    if not levels or any(not 0.0 < q < 1.0 for q in levels):
        raise ConfigError("quantile levels must lie strictly inside (0, 1)")
    return levels


def cmd_forecast(args) -> int:
    parser = load_config(args.config)
    seed = resolve_seed(args.seed, parser)
    if args.horizon < 1:
        raise ConfigError("horizon must be at least 1")
    if args.samples < 1:
        raise ConfigError("samples must be at least 1")
    levels = _parse_levels(args.quantiles)
    ckpt = eng.load_checkpoint(args.checkpoint)
    model = eng.model_from_checkpoint(ckpt)
    scaler_cfg = _scaler_config(parser, model.cfg.patch_size)
    dataset = dt.load_dataset(args.data, impute_missing=True)
    root = Rng(seed)

    out = _out_dir(args.out)
    echo_config(parser, out, {"forecast": {"seed": seed, "horizon": args.horizon,
                                           "samples": args.samples}})
    rows = []
    for series in dataset:
        context = series.values[:, -model.cfg.max_context:]
        rng = root.child(zlib.crc32(series.id.encode()))
        samples = eng.forecast(model, context, None, args.horizon, args.samples, rng,
                               scaler_cfg=scaler_cfg,
                               max_horizon=max(args.horizon, 512))
        qs = eng.quantiles(samples, levels)
        for v in range(series.num_variates):
            for step in range(args.horizon):
                rows.append([series.id, v, step] + [repr(float(qs[i, v, step]))
                                                    for i in range(len(levels))])
    path = out / "forecasts.csv"
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["series", "variate", "step"] + [f"q{q:g}" for q in levels])
        writer.writerows(rows)
    print(f"wrote forecasts for {len(dataset)} series to {path}")
    return 0


def cmd_evaluate(args) -> int:
    parser = load_config(args.config)
    seed = resolve_seed(args.seed, parser, "eval")
    dataset = dt.load_dataset(args.data, impute_missing=True)
    out = _out_dir(args.out)

    if args.forecasts:
        report = _evaluate_forecast_file(dataset, Path(args.forecasts))
    else:
        eval_cfg = ob.EvalConfig(num_samples=args.samples, seed=seed, jobs=args.jobs)
        forecasters: list = []
        for i, base in enumerate(args.checkpoint or []):
            ckpt = eng.load_checkpoint(base)
            model = eng.model_from_checkpoint(ckpt)
            name = f"model{i}" if len(args.checkpoint) > 1 else "model"
            forecasters.append(ob.ModelForecaster(
                model, name=name, num_samples=eval_cfg.num_samples, seed=seed,
                scaler_cfg=_scaler_config(parser, model.cfg.patch_size)))
        if args.naive or not forecasters:
            forecasters.append(ob.SeasonalNaiveForecaster())
        report = ob.evaluate(dataset, forecasters, eval_cfg)

    ob.write_metrics_csv(report, out / "metrics.csv")
    ob.write_summary_json(report, out / "summary.json")
    echo_config(parser, out, {"eval": {"seed": seed}})
    print(f"evaluated {len(report.model_names)} model(s) on {len(report.records)} tasks "
          f"({report.main_count} main, {report.flat_count} flat)")
    return 0


def _evaluate_forecast_file(dataset, path: Path) -> ob.EvalReport:
    """Score a forecasts.csv against the final steps of each series."""
    if not path.exists():
        raise ConfigError(f"forecast file not found: {path}")
    with path.open() as fh:
        reader = csv.reader(fh)
        header = next(reader)
        level_cols = [(i, float(name[1:])) for i, name in enumerate(header)
                      if name.startswith("q")]
        table: dict[str, dict] = {}
        for row in reader:
            sid, variate, step = row[0], int(row[1]), int(row[2])
            entry = table.setdefault(sid, {})
            for col, level in level_cols:
                entry.setdefault(level, {})[(variate, step)] = float(row[col])
    levels = sorted(level for _, level in level_cols)
    if 0.5 not in levels:
        raise ConfigError("forecast file must include the 0.5 quantile for point scoring")

    class FileForecaster:
        name = f"file:{path.name}"

        def predict(self, context, horizon, m, key):
            raise RuntimeError("file forecaster is scored directly")

    records = []
    for series in dataset:
        if series.id not in table:
            continue
        entry = table[series.id]
        horizon = max(step for (_, step) in entry[0.5]) + 1
        if horizon > series.length:
            raise ConfigError(f"forecast horizon {horizon} exceeds series {series.id}")
        actual = series.values[:, -horizon:]
        history = series.values[:, :-horizon]
        m = ob.SEASONALITY[series.freq]
        if history.shape[1] <= m:
            m = 1
        insample = np.array([ob.insample_naive_mae(history[v], m)
                             for v in range(series.num_variates)])
        naive_point = ob.seasonal_naive(history, m, horizon)

        def grid(level):
            arr = np.empty_like(actual)
            for (v, step), value in entry[level].items():
                arr[v, step] = value
            return arr

        quant = {q: grid(q) for q in levels}
        point = quant[0.5]
        model_mase, model_crps, model_mae = [], [], []
        naive_mase, naive_crps = [], []
        zero_naive = bool(np.any(insample == 0.0))
        for v in range(series.num_variates):
            mae = float(np.mean(np.abs(point[v] - actual[v])))
            nmae = float(np.mean(np.abs(naive_point[v] - actual[v])))
            if nmae == 0.0:
                zero_naive = True
            model_mae.append(mae)
            if insample[v] > 0.0:
                model_mase.append(mae / insample[v])
                naive_mase.append(nmae / insample[v])
            model_crps.append(ob.crps_wql({q: quant[q][v] for q in levels}, actual[v], levels))
            naive_crps.append(ob.crps_wql({q: naive_point[v] for q in levels}, actual[v], levels))
        records.append(ob.TaskRecord(
            series_id=series.id, term="file", horizon=horizon,
            metrics={FileForecaster.name: {
                "mase": float(np.mean(model_mase)) if model_mase else float("nan"),
                "crps": float(np.mean(model_crps)),
                "mae": float(np.mean(model_mae)),
            }},
            naive_mase=float(np.mean(naive_mase)) if naive_mase else float("nan"),
            naive_crps=float(np.mean(naive_crps)),
            zero_naive=zero_naive,
        ))
    if not records:
        raise ConfigError("forecast file matched no series in the dataset")
    main, flat = ob.normalize_and_split(records)
    name = FileForecaster.name
    aggregates: dict[str, dict[str, float]] = {name: {}}
    if main:
        aggregates[name]["mase"] = ob.aggregate_shifted_geomean(
            ob.impute_invalid([r.normalized[name]["mase"] for r in main]))
        aggregates[name]["crps"] = ob.aggregate_shifted_geomean(
            ob.impute_invalid([r.normalized[name]["crps"] for r in main]))
    if flat:
        aggregates[name]["flat_mae"] = float(np.mean(
            ob.impute_invalid([r.normalized[name]["mase"] for r in flat])))
        aggregates[name]["flat_crps"] = float(np.mean(
            ob.impute_invalid([r.normalized[name]["crps"] for r in flat])))
    return ob.EvalReport(records=records, model_names=[name], aggregates=aggregates,
                         main_count=len(main), flat_count=len(flat))


def cmd_gradcheck(args) -> int:
    parser = load_config(args.config)
    seed = resolve_seed(args.seed, parser)
    model_cfg = _model_config(parser)
    rng = Rng(seed)
    model = Model(model_cfg, rng=rng.child(0))
    data_rng = np.random.default_rng(seed)
    values = data_rng.normal(size=(2, model_cfg.patch_size * 4))
    targets = values[:, model_cfg.patch_size:].reshape(2, 3, model_cfg.patch_size)
    loss_cfg = smm.LossConfig()
    weights = np.ones_like(targets)

    def loss_for(params):
        feats = Model(model_cfg, params=params).token_features(values)
        mix = smm.compute_params(feats[:, :-1],
                                 {k.split(".", 1)[1]: v for k, v in params.items()
                                  if k.startswith("head.")})
        return smm.composite_loss(mix, targets, weights, loss_cfg)

    worst = 0.0
    worst_name = ""
    probe_rng = Rng(seed + 1)
    for name, tensor in model.trainable().items():
        def f(t, _name=name):
            trial = dict(model.params)
            trial[_name] = t
            return loss_for(trial)
        err = finite_difference_check(f, tensor, eps=1e-5, max_coords=args.coords,
                                      rng=probe_rng)
        if err > worst:
            worst, worst_name = err, name
    print(f"max relative error {worst:.3e} (parameter {worst_name})")
    if worst >= args.tolerance:
        print(f"gradcheck failed tolerance {args.tolerance}", file=sys.stderr)
        return NUMERIC_ERROR
    return 0


def cmd_flops(args) -> int:
    parser = load_config(args.config)
    model_cfg = _model_config(parser)
    fact = attention_flops(model_cfg, args.variates, args.patches, "factorized")
    full = attention_flops(model_cfg, args.variates, args.patches, "full")
    print(f"factorized {fact}")
    print(f"full {full}")
    if args.verify:
        model = Model(model_cfg, rng=Rng(0))
        counter = MacCounter()
        model.token_features(np.zeros((args.variates, args.patches * model_cfg.patch_size)),
                             mac_counter=counter)
        print(f"counted {counter.total}")
        if counter.total != fact:
            print("instrumented count does not match the formula", file=sys.stderr)
            return NUMERIC_ERROR
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="totokit",
                                     description="desk-scale observability forecaster")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-data", help="write a synthetic dataset")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=cmd_generate_data)

    p = sub.add_parser("train", help="train a model on a dataset file")
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--ablation", choices=sorted(ABLATION_FLAGS), default="none")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("forecast", help="sample forecasts from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--samples", type=int, default=128)
    p.add_argument("--quantiles", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=cmd_forecast)

    p = sub.add_parser("evaluate", help="run the evaluation protocol")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", action="append")
    p.add_argument("--forecasts")
    p.add_argument("--naive", action="store_true",
                   help="include the seasonal-naive reference as a ranked model")
    p.add_argument("--samples", type=int, default=128)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("gradcheck", help="finite-difference check of model gradients")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--coords", type=int, default=4,
                   help="random coordinates probed per parameter array")
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("flops", help="attention MAC counts for both schemas")
    p.add_argument("--variates", type=int, required=True)
    p.add_argument("--patches", type=int, required=True)
    p.add_argument("--config")
    p.add_argument("--verify", action="store_true",
                   help="also run an instrumented forward pass")
    p.set_defaults(fn=cmd_flops)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, dt.DatasetFormatError, eng.CheckpointError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except FloatingPointError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return NUMERIC_ERROR


if __name__ == "__main__":
    sys.exit(main())
