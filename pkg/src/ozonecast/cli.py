"""Command-line front end: stats, featurize, benchmark, synth.

Exit codes: 0 success, 1 model or benchmark failure, 2 I/O, data or config failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional, Sequence

from .dataset import SCHEMA, TARGET, SplitSpec, TimeSeriesTable, check_gaps, fill_gaps, parse_csv, write_csv
from .errors import OzoneError
from .evaluate import ROSTER_ORDER, build_roster, parse_value, run_benchmark
from .features import ApproachSpec, build_approach
from .plot import render_svg, write_scatter_csv
from .stats import correlation_matrix, describe
from .synth import SynthConfig, generate

log = logging.getLogger("ozonecast")

EXIT_OK, EXIT_MODEL, EXIT_INPUT = 0, 1, 2


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    data: Optional[str] = None
    approach: str = "1"  # 1-4 or "all"
    split: str = "chrono"
    train_frac: float = 0.8
    seed: int = 0
    models: Optional[tuple[str, ...]] = None
    out: str = "."
    overrides: tuple[tuple[str, str], ...] = ()  # ("model.param", "raw value")
    jobs: int = 1

    def approaches(self) -> list[int]:
        if self.approach == "all":
            return [1, 2, 3, 4]
        try:
            ids = [int(a) for a in self.approach.split(",")]
        except ValueError:
            raise ConfigError(f"approach must be 1-4 or 'all', got {self.approach!r}") from None
        if any(a not in (1, 2, 3, 4) for a in ids):
            raise ConfigError(f"approach must be 1-4 or 'all', got {self.approach!r}")
        return ids

    def split_spec(self) -> SplitSpec:
        if self.split not in ("chrono", "random"):
            raise ConfigError(f"split must be chrono or random, got {self.split!r}")
        return SplitSpec(self.split, self.train_frac, self.seed)

    def model_overrides(self) -> dict[str, dict]:
        table: dict[str, dict] = {}
        for key, raw in self.overrides:
            model, _, param = key.partition(".")
            if not model or not param:
                raise ConfigError(f"override must look like model.param=value, got {key!r}")
            table.setdefault(model, {})[param] = parse_value(raw)
        return table

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            key = f.name.replace("_", "-")
            if f.name == "overrides":
                lines += [f"set = {k}={v}" for k, v in value]
            elif value is None:
                continue
            elif f.name == "models":
                lines.append(f"{key} = {','.join(value)}")
            else:
                lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        values: dict = {}
        overrides = []
        for n, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"config line {n}: expected key = value")
            key = key.strip().replace("-", "_")
            value = value.strip()
            if key == "set":
                overrides.append(_split_override(value))
            else:
                values[key] = value
        return cls().updated(values, overrides)

    def updated(self, values: dict, overrides: Sequence[tuple[str, str]] = ()) -> "RunConfig":
        """Copy with string- or typed-valued fields replaced; overrides are appended."""
        known = {f.name for f in fields(self)} - {"overrides"}
        changes = {}
        for key, value in values.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            if value is None:
                continue
            try:
                if key in ("seed", "jobs"):
                    value = int(value)
                elif key == "train_frac":
                    value = float(value)
                elif key == "models" and isinstance(value, str):
                    value = tuple(m.strip() for m in value.split(",") if m.strip())
                elif key == "approach":
                    value = str(value)
            except ValueError:
                raise ConfigError(f"bad value {value!r} for {key}") from None
            changes[key] = value
        return replace(self, **changes, overrides=self.overrides + tuple(overrides))


def _split_override(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep:
        raise ConfigError(f"override must look like model.param=value, got {text!r}")
    return key.strip(), value.strip()


def load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return RunConfig.from_text(text)


def _load_table(cfg: RunConfig) -> TimeSeriesTable:
    if cfg.data is None:
        raise ConfigError("no --data given")
    table = parse_csv(cfg.data)
    problems = check_gaps(table)
    if problems:
        raise DataErrors([f"{cfg.data}: {p}" for p in problems])
    return fill_gaps(table)


class DataErrors(Exception):
    def __init__(self, lines):
        self.lines = list(lines)
        super().__init__("; ".join(self.lines))


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------- commands


STAT_COLUMNS = ("min", "mean", "max", "sd", "skewness", "kurtosis", "shapiro_w", "shapiro_p")


def cmd_stats(cfg: RunConfig) -> int:
    table = _load_table(cfg)
    out = _out_dir(cfg)
    rows = describe(table.columns, SCHEMA)
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variable", *STAT_COLUMNS])
        for name in SCHEMA:
            r = rows[name]
            w.writerow([name, *(repr(float(getattr(r, c))) for c in STAT_COLUMNS)])
    md = ["| Variable | Min | Mean | Max | SD | Skewness | Kurtosis | Shapiro-Wilk |",
          "|---|---:|---:|---:|---:|---:|---:|---:|"]
    for name in SCHEMA:
        r = rows[name]
        md.append(f"| {name} | {r.min:.3f} | {r.mean:.3f} | {r.max:.3f} | {r.sd:.3f} | "
                  f"{r.skewness:.3f} | {r.kurtosis:.3f} | {r.shapiro_w:.3f}({r.shapiro_p:.3f}) |")
    (out / "summary.md").write_text("\n".join(md) + "\n")
    corr = correlation_matrix(table.columns, SCHEMA)
    with open(out / "spearman.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["", *corr.labels])
        for label, row in zip(corr.labels, corr.values):
            w.writerow([label, *(repr(float(v)) for v in row)])
    log.info("wrote summary and Spearman matrix for %d rows to %s", table.n_rows, out)
    return EXIT_OK


def cmd_featurize(cfg: RunConfig) -> int:
    table = _load_table(cfg)
    out = _out_dir(cfg)
    for approach in cfg.approaches():
        train, test, _ = build_approach(table, ApproachSpec(approach), cfg.split_spec(), cfg.seed)
        for part, fs in (("train", train), ("test", test)):
            with open(out / f"features_approach{approach}_{part}.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["date", *fs.names, TARGET])
                for d, x, y in zip(fs.row_dates, fs.X, fs.y):
                    w.writerow([d.isoformat(), *(repr(float(v)) for v in x), repr(float(y))])
        log.info("approach %d: %d train / %d test rows, %d features", approach, train.n_rows,
                 test.n_rows, len(train.names))
    return EXIT_OK


def cmd_benchmark(cfg: RunConfig) -> int:
    table = _load_table(cfg)
    try:
        roster = build_roster(cfg.models, cfg.model_overrides())
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from None
    out = _out_dir(cfg)
    status = EXIT_OK
    for approach in cfg.approaches():
        report = run_benchmark(table, ApproachSpec(approach), roster, cfg.split_spec(), cfg.seed,
                               jobs=cfg.jobs)
        (out / f"report_approach{approach}.csv").write_text(report.to_csv())
        (out / f"report_approach{approach}.md").write_text(report.to_markdown())
        for row in report.rows:
            if row.error is not None:
                print(f"error: approach {approach}, {row.label}: {row.error}", file=sys.stderr)
                status = EXIT_MODEL
                continue
            data = report.scatter[row.key]
            stem = out / f"scatter_approach{approach}_{row.key}"
            stem.with_suffix(".svg").write_text(render_svg(data))
            write_scatter_csv(data, stem.with_suffix(".csv"))
        log.info("approach %d: %d models -> %s", approach, len(report.rows), out)
    return status


def cmd_synth(cfg: RunConfig, n: int = 1200, lag1: float = 0.7) -> int:
    try:
        table = generate(SynthConfig(n=n, seed=cfg.seed, lag1=lag1))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    target = Path(cfg.out)
    if target.suffix != ".csv":
        target.mkdir(parents=True, exist_ok=True)
        target = target / "synthetic.csv"
    else:
        target.parent.mkdir(parents=True, exist_ok=True)
    write_csv(table, target)
    log.info("wrote %d synthetic rows to %s", table.n_rows, target)
    return EXIT_OK


# ---------------------------------------------------------------- parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file; flags override its entries")
    common.add_argument("--data", help="daily CSV with a date column and the 12 variables")
    common.add_argument("--out", help="output directory (synth: directory or .csv path)")
    common.add_argument("--seed", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    split = argparse.ArgumentParser(add_help=False)
    split.add_argument("--approach", help="1, 2, 3, 4, a comma list, or all")
    split.add_argument("--split", choices=("chrono", "random"))
    split.add_argument("--train-frac", type=float)

    parser = argparse.ArgumentParser(prog="ozonecast", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("stats", parents=[common], help="summary statistics and Spearman matrix")
    sub.add_parser("featurize", parents=[common, split], help="write train/test feature matrices")
    bench = sub.add_parser("benchmark", parents=[common, split], help="fit and score the model roster")
    bench.add_argument("--models", help=f"comma list from {','.join(ROSTER_ORDER)}")
    bench.add_argument("--set", action="append", default=[], metavar="MODEL.PARAM=VALUE",
                       help="hyperparameter override, repeatable")
    bench.add_argument("--jobs", type=int, help="models trained concurrently")
    synth = sub.add_parser("synth", parents=[common], help="write a seeded synthetic dataset")
    synth.add_argument("--n", type=int, default=1200)
    synth.add_argument("--lag1", type=float, default=0.7)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config)
    keys = ("data", "approach", "split", "train_frac", "seed", "models", "out", "jobs")
    flags = {k: getattr(args, k, None) for k in keys}
    overrides = [_split_override(s) for s in getattr(args, "set", [])]
    return cfg.updated(flags, overrides)


COMMANDS = {"stats": cmd_stats, "featurize": cmd_featurize, "benchmark": cmd_benchmark}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command == "synth":
            return cmd_synth(cfg, args.n, args.lag1)
        return COMMANDS[args.command](cfg)
    except DataErrors as exc:
        for line in exc.lines:
            print(f"error: {line}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigError, OzoneError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
