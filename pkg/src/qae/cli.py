"""Command-line entry point: ``qae run|dataset|denoise|plotdata``."""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import math
import os
import re
import statistics
import sys
from collections import OrderedDict
from pathlib import Path
from typing import Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from . import __version__
from .harness import ExperimentConfig, TopologySpec, metrics_csv, noise_for, run_sweep
from .linops import projector
from .qnn import forward, load_network, save_network
from .states import Dataset, GhzSpec, build_pairs, build_tests, load_states, save_dataset
from .train import batch_fidelities

__all__ = ["main", "RunConfig", "load_config"]

EXIT_OK, EXIT_INTERNAL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3

EPILOG = """\
exit codes:
  0  success
  1  internal invariant violation
  2  invalid configuration or input (message names the offending key or position)
  3  I/O failure

environment:
  QAE_LOG  log verbosity: off (default), info or debug
"""

log = logging.getLogger("qae")


class UsageError(Exception):
    """Bad configuration or input data; maps to exit code 2."""


# --- config schema ----------------------------------------------------------

_PHASE_RE = re.compile(r"^\s*(?:(\d+(?:\.\d*)?)\s*\*\s*)?pi\s*(?:/\s*(\d+(?:\.\d*)?))?\s*$")


def parse_phase(value: Union[float, int, str]) -> float:
    """Radians, or a string such as ``"pi"``, ``"pi/3"`` or ``"2*pi/3"``."""
    if isinstance(value, (int, float)):
        return float(value)
    m = _PHASE_RE.match(value)
    if not m:
        raise ValueError(f"cannot read phase {value!r}")
    num = float(m.group(1) or 1)
    den = float(m.group(2) or 1)
    return num * math.pi / den


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class TopologyModel(_Strict):
    kind: Literal["dense", "sparse"] = "dense"
    widths: list[int]
    stack: int = Field(1, ge=1)


class PhaseCount(_Strict):
    phase: Union[float, str]
    count: int = Field(ge=1)

    @field_validator("phase")
    @classmethod
    def _phase(cls, v):
        return parse_phase(v)


class TestsModel(_Strict):
    rule: Literal["fixed", "random"]
    phases: list[PhaseCount] = []
    count: int = Field(0, ge=0)


class NoiseModel(_Strict):
    kind: Literal["spinflip", "brownian", "combined"]
    grid: list[float] = Field(min_length=1)
    spinflip_p: float = 0.0
    brownian_steps: int = Field(20, ge=1)


class TrainingModel(_Strict):
    rounds: int = Field(200, ge=1)
    lr: float = Field(0.01, gt=0)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    init_scale: float = Field(0.5, gt=0)


class RunConfig(_Strict):
    schema_version: Literal[1]
    name: str
    topology: TopologyModel
    ghz_qubits: int = Field(ge=2)
    train_phases: list[PhaseCount] = Field(min_length=1)
    tests: TestsModel
    noise: NoiseModel
    training: TrainingModel = TrainingModel()
    seeds: list[int] = Field([0, 1, 2, 3, 4], min_length=1)
    filter_max_flips: int = Field(1, ge=0)

    def experiment(self) -> ExperimentConfig:
        t = self.training
        return ExperimentConfig(
            topology=TopologySpec(self.topology.kind, tuple(self.topology.widths), self.topology.stack),
            num_qubits=self.ghz_qubits,
            train_phases=tuple((pc.phase, pc.count) for pc in self.train_phases),
            noise_kind=self.noise.kind,
            rounds=t.rounds,
            seeds=tuple(self.seeds),
            test_rule=self.tests.rule,
            test_phases=tuple((pc.phase, pc.count) for pc in self.tests.phases),
            random_tests=self.tests.count,
            spinflip_p=self.noise.spinflip_p,
            brownian_steps=self.noise.brownian_steps,
            lr=t.lr,
            beta1=t.beta1,
            beta2=t.beta2,
            eps=t.eps,
            init_scale=t.init_scale,
            filter_max_flips=self.filter_max_flips,
        )


def load_config(path: str | Path, seed_override: int | None = None) -> tuple[RunConfig, ExperimentConfig]:
    """Parse and validate a config file; raises UsageError with a located message."""
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise UsageError(f"{path}: malformed JSON at line {e.lineno}, column {e.colno}: {e.msg}") from None
    try:
        cfg = RunConfig.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(x) for x in first["loc"]) or "<root>"
        raise UsageError(f"{path}: invalid key '{key}': {first['msg']}") from None
    if seed_override is not None:
        cfg = cfg.model_copy(update={"seeds": [seed_override]})
    try:
        exp = cfg.experiment()
    except ValueError as e:
        raise UsageError(f"{path}: {e}") from None
    return cfg, exp


# --- commands ---------------------------------------------------------------


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def cmd_run(args) -> int:
    cfg, exp = load_config(args.config, args.seed_override)
    out = Path(args.out)
    records = run_sweep(exp, cfg.noise.grid, threads=args.threads)
    for k, rec in enumerate(records):
        for s in rec.seeds:
            lines = ["round,cost"] + [f"{r},{c!r}" for r, c in enumerate(s.history)]
            _write(out / f"cost_{k}_{s.seed}.csv", "\n".join(lines) + "\n")
            save_network(s.network, out / f"params_{k}_{s.seed}.txt")
    _write(out / "metrics.csv", metrics_csv(records))
    manifest = {
        "tool": "qae",
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "points": {str(k): v for k, v in enumerate(cfg.noise.grid)},
        "config": cfg.model_dump(mode="json"),
    }
    _write(out / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    for rec in records:
        print(f"{rec.noise_kind}={rec.noise_value:g}: median F_bar {rec.F_bar:.4f}  median F_val_bar {rec.F_val_bar:.4f}")
    return EXIT_OK


def cmd_dataset(args) -> int:
    cfg, exp = load_config(args.config, args.seed_override)
    seed = exp.seeds[0]
    noise = noise_for(exp, cfg.noise.grid[0])
    pairs = build_pairs([(GhzSpec(exp.num_qubits, ph), n) for ph, n in exp.train_phases], noise, seed)
    tests = build_tests(exp.test_targets(seed), noise, seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(Dataset(exp.num_qubits, noise, seed, tuple(pairs), tuple(tests)), out)
    return EXIT_OK


def cmd_denoise(args) -> int:
    try:
        net = load_network(args.params)
    except ValueError as e:
        raise UsageError(f"{args.params}: {e}") from None
    try:
        header, blocks = load_states(args.states)
    except ValueError as e:
        raise UsageError(f"{args.states}: {e}") from None
    tag = "noisy" if blocks.get("noisy") else "input"
    states = blocks.get(tag) or {}
    if not states:
        raise UsageError(f"{args.states}: no states to denoise")
    idx = sorted(states)
    psis = np.stack([states[i][0] for i in idx])
    width = net.topology.widths[0]
    if psis.shape[1] != 1 << width:
        raise UsageError(f"states have dimension {psis.shape[1]} but the network expects {width} qubits")
    times = args.stack
    if times > 1 and not net.topology.is_square:
        raise UsageError("only square networks can be stacked")
    outs = forward(net, projector(psis), times=times)
    ideal = blocks.get("ideal", {}) if tag == "noisy" else {}
    fids = batch_fidelities(outs, np.stack([ideal[i][0] for i in idx])) if ideal and all(i in ideal for i in idx) else None
    d = outs.shape[-1]
    lines = [
        f"# qae-denoised v1 stack={times} dim={d}",
        "# index, then re,im of each output density-matrix entry in row-major order, then fidelity with the ideal state",
    ]
    for k, i in enumerate(idx):
        entries = ",".join(f"{z.real!r},{z.imag!r}" for z in outs[k].reshape(-1).tolist())
        fid = "" if fids is None else repr(float(fids[k]))
        lines.append(f"{i},{entries},{fid}")
    _write(Path(args.out), "\n".join(lines) + "\n")
    if fids is not None:
        print(f"mean fidelity {float(np.mean(fids)):.4f} over {len(idx)} states")
    return EXIT_OK


REQUIRED_COLUMNS = ("noise_value", "F_bar", "dF", "F_val_bar", "dF_val", "F_inf", "dF_inf")


def cmd_plotdata(args) -> int:
    with open(args.metrics, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in REQUIRED_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise UsageError(f"{args.metrics}: missing columns {', '.join(missing)}")
        rows = list(reader)
    if not rows:
        raise UsageError(f"{args.metrics}: no data rows")
    points: OrderedDict[str, list[dict]] = OrderedDict()
    for r in rows:
        points.setdefault(r["noise_value"], []).append(r)
    with_baseline = all(r["F_inf"] != "" for r in rows)
    cols = ["noise_value", "F_bar", "dF", "F_val_bar", "dF_val"] + (["F_inf", "dF_inf"] if with_baseline else [])
    lines = [
        f"# {len(cols)} columns: " + " ".join(cols),
        "# medians over seeds; F_bar/dF before denoising, F_val_bar/dF_val after"
        + ("; F_inf/dF_inf analytic baseline and its error bar" if with_baseline else ""),
    ]
    for value, group in points.items():
        cells = [value]
        for c in cols[1:]:
            cells.append(repr(float(statistics.median(float(r[c]) for r in group))))
        lines.append(" ".join(cells))
    _write(Path(args.out), "\n".join(lines) + "\n")
    return EXIT_OK


# --- entry point ------------------------------------------------------------


def _configure_logging() -> None:
    level = {"off": None, "info": logging.INFO, "debug": logging.DEBUG}.get(os.environ.get("QAE_LOG", "off").lower())
    if level is None:
        log.disabled = True
        return
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qae",
        description="Train quantum autoencoders to denoise GHZ states and evaluate them.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--version", action="version", version=f"qae {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a noise sweep from a config file", epilog=EPILOG,
                         formatter_class=argparse.RawDescriptionHelpFormatter)
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--threads", type=int, default=1, help="worker processes (results do not depend on it)")
    run.add_argument("--seed-override", type=int, default=None, help="run only this seed")
    run.set_defaults(func=cmd_run)

    ds = sub.add_parser("dataset", help="write the dataset of the first grid value and seed", epilog=EPILOG,
                        formatter_class=argparse.RawDescriptionHelpFormatter)
    ds.add_argument("--config", required=True)
    ds.add_argument("--out", required=True, help="output file")
    ds.add_argument("--seed-override", type=int, default=None)
    ds.set_defaults(func=cmd_dataset)

    dn = sub.add_parser("denoise", help="apply a trained network to serialized states", epilog=EPILOG,
                        formatter_class=argparse.RawDescriptionHelpFormatter)
    dn.add_argument("--params", required=True, help="network parameter file")
    dn.add_argument("--states", required=True, help="dataset file; 'noisy' states are used if present, else 'input'")
    dn.add_argument("--out", required=True)
    dn.add_argument("--stack", type=int, default=1, help="apply the network this many times")
    dn.set_defaults(func=cmd_denoise)

    pd = sub.add_parser("plotdata", help="turn metrics.csv into whitespace-separated plot columns", epilog=EPILOG,
                        formatter_class=argparse.RawDescriptionHelpFormatter)
    pd.add_argument("--metrics", required=True)
    pd.add_argument("--out", required=True)
    pd.set_defaults(func=cmd_plotdata)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging()
    if getattr(args, "threads", 1) < 1:
        print("qae: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except UsageError as e:
        print(f"qae: error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"qae: I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except Exception as e:  # invariant violations inside the library
        log.debug("internal error", exc_info=True)
        print(f"qae: internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
