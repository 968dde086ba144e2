"""Command-line front end: ``python -m hexrelay --mode {trial,sweep,replay-example}``.

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 the replayed example
did not select R2.
"""
from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Sequence

from .netmodel import Strategy, selection
from .predictor import DEFAULT_EPS, replay
from .simengine import SWEEP_MUS, SimConfig, SweepRow, run_experiment

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_CHECK = 0, 1, 2, 3

CSV_HEADER = ("n_mus", "strategy", "throughput_mean", "throughput_std",
              "lifetime_mean", "lifetime_std", "blocked_mean")

# energy histories of the three candidate relays in the worked example
EXAMPLE_HISTORIES = {
    1: (2000.0, 1500.0, 1300.0, 900.0),
    2: (900.0, 870.0, 830.0, 800.0),
    3: (1400.0, 1200.0, 1000.0, 850.0),
}

# flag name -> (SimConfig field, parser)
_FLAGS = {
    "mus": ("n_mus", int),
    "cells": ("n_cells", int),
    "slots": ("horizon", int),
    "seed": ("seed", int),
    "eps": ("eps", float),
    "hot-weight": ("hot_cell_weight", float),
    "p-idle": ("p_idle", float),
    "p-session": ("p_session", float),
    "energy": ("initial_energy", float),
    "capacity": ("capacity", int),
    "rate": ("rate", float),
    "start-prob": ("session_start_prob", float),
    "mean-len": ("mean_session_len", float),
}
_FIELD_TYPES = {f.name: f.type for f in fields(SimConfig)}


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunSpec:
    mode: str
    config: SimConfig
    trials: int
    out: Path | None = None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hexrelay", description="Relay energy-balancing simulator")
    p.add_argument("--mode", choices=("trial", "sweep", "replay-example"), default="trial")
    p.add_argument("--strategy", choices=[s.label for s in Strategy])
    p.add_argument("--trials", type=int, help="seeds per point (sweep default 10, trial default 1)")
    p.add_argument("--config", type=Path, help="key=value file; flags override it")
    p.add_argument("--out", type=Path, help="CSV output path")
    for flag, (_, conv) in _FLAGS.items():
        p.add_argument(f"--{flag}", type=conv, dest=flag.replace("-", "_"))
    return p


def _convert(key: str, raw: str):
    field_name, conv = _lookup(key)
    if field_name == "strategy":
        conv = Strategy.from_label
    try:
        return field_name, conv(raw)
    except ValueError:
        raise UsageError(f"bad value for {key}: {raw!r}") from None


def _lookup(key: str):
    key = key.strip()
    if key in _FLAGS:
        return _FLAGS[key]
    if key.replace("_", "-") in _FLAGS:
        return _FLAGS[key.replace("_", "-")]
    if key == "strategy":
        return "strategy", str
    if key in _FIELD_TYPES and key != "strategy":
        return key, int if _FIELD_TYPES[key] in ("int", int) else float
    raise UsageError(f"unknown config key {key!r}")


def read_config_file(path: Path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        name, val = _convert(key, value.strip())
        out[name] = val
    return out


def parse_args(argv: Sequence[str] | None = None) -> RunSpec:
    ns = _build_parser().parse_args(argv)
    overrides = read_config_file(ns.config) if ns.config else {}
    for flag, (field_name, _) in _FLAGS.items():
        val = getattr(ns, flag.replace("-", "_"))
        if val is not None:
            overrides[field_name] = val
    if ns.strategy is not None:
        overrides["strategy"] = Strategy.from_label(ns.strategy)
    try:
        config = replace(SimConfig(), **overrides)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    trials = ns.trials if ns.trials is not None else (10 if ns.mode == "sweep" else 1)
    if trials < 1:
        raise UsageError("--trials must be >= 1")
    return RunSpec(mode=ns.mode, config=config, trials=trials, out=ns.out)


def emit_csv(table: Sequence[SweepRow], path) -> None:
    """Write sweep rows as CSV, 6 significant digits, LF line endings."""
    rows = sorted(table, key=lambda r: (r.n_mus, r.strategy.label))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow([r.n_mus, r.strategy.label] + [
                format(x, ".6g") for x in (r.throughput_mean, r.throughput_std, r.lifetime_mean,
                                           r.lifetime_std, r.blocked_mean)
            ])


@dataclass(frozen=True)
class ReplayReport:
    eps: float
    predictions: dict
    selected: int

    def lines(self) -> list[str]:
        out = [f"eps = {self.eps:g}"]
        for rid, value in self.predictions.items():
            hist = ", ".join(f"{e:g}" for e in EXAMPLE_HISTORIES.get(rid, ()))
            out.append(f"  R{rid}: history [{hist}] -> potential energy {value:.4f}")
        out.append(f"  selected R{self.selected}")
        return out


def replay_example(eps: float = DEFAULT_EPS, histories: dict | None = None) -> ReplayReport:
    histories = EXAMPLE_HISTORIES if histories is None else histories
    preds = {rid: replay(hist, eps=eps)[1] for rid, hist in histories.items()}
    return ReplayReport(eps, preds, selection(list(preds.items())))


def _ordering_summary(table: Sequence[SweepRow]) -> list[str]:
    by_n = {}
    for r in table:
        by_n.setdefault(r.n_mus, {})[r.strategy] = r
    lines = []
    for n, d in sorted(by_n.items()):
        if len(d) < len(Strategy):
            continue
        tp = [d[s].throughput_mean for s in (Strategy.EB_BY_MU, Strategy.EB_BY_BS, Strategy.NO_EB)]
        lt = [d[s].lifetime_mean for s in (Strategy.EB_BY_MU, Strategy.EB_BY_BS, Strategy.NO_EB)]
        best_tp = max(d, key=lambda s: (d[s].throughput_mean, s)).label
        best_lt = max(d, key=lambda s: (d[s].lifetime_mean, s)).label
        ok_tp = "ok" if tp[0] >= tp[1] >= tp[2] else "VIOLATED"
        ok_lt = "ok" if lt[0] >= lt[1] >= lt[2] else "VIOLATED"
        lines.append(f"n_mus={n:4d}  throughput best={best_tp:5s} order {ok_tp:8s}  "
                     f"lifetime best={best_lt:5s} order {ok_lt}")
    return lines


def run(spec: RunSpec) -> int:
    if spec.mode == "replay-example":
        report = replay_example(spec.config.eps)
        print("\n".join(report.lines()))
        return EXIT_OK if report.selected == 2 else EXIT_CHECK

    if spec.mode == "sweep":
        table = run_experiment(spec.config, mu_counts=SWEEP_MUS, trials=spec.trials)
    else:
        table = run_experiment(spec.config, mu_counts=[spec.config.n_mus],
                               strategies=[spec.config.strategy], trials=spec.trials)

    for r in table:
        print(f"n_mus={r.n_mus:4d} {r.strategy.label:5s} throughput={r.throughput_mean:.4f} "
              f"lifetime={r.lifetime_mean:.2f} blocked={r.blocked_mean:.1f}")
    if spec.mode == "sweep":
        print("\n".join(_ordering_summary(table)))
    if spec.out is not None:
        try:
            emit_csv(table, spec.out)
        except OSError as exc:
            print(f"hexrelay: cannot write {spec.out}: {exc}", file=sys.stderr)
            return EXIT_IO
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    try:
        spec = parse_args(argv)
    except UsageError as exc:
        print(f"hexrelay: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run(spec)


if __name__ == "__main__":
    sys.exit(main())
