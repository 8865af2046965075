"""Experiment points and sweeps: dataset, training, validation and baselines.

One *point* is a single noise value. For every seed of a point a fresh dataset
is drawn from that seed, a network is trained on the pairs and evaluated on the
labelled test states. Seeds are independent jobs and may run in worker
processes; results are always assembled in (grid, seed) order.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .noise import Brownian, NoiseSpec, SpinFlip
from .qnn import Network, Topology, dense_topology, sparse_topology_4_2_1_2_4
from .states import GhzSpec, LabeledTestState, build_pairs, build_tests, random_test_phases
from .train import TrainConfig, _mean, spread, train, validation

__all__ = [
    "TopologySpec",
    "ExperimentConfig",
    "SeedResult",
    "MetricsRecord",
    "METRICS_HEADER",
    "analytic_baseline",
    "filter_by_flip_count",
    "noise_for",
    "run_seed",
    "run_point",
    "run_sweep",
    "metrics_rows",
    "metrics_csv",
]

log = logging.getLogger(__name__)

NoiseKind = Literal["spinflip", "brownian", "combined"]


def _in_pi_z(phase: float, tol: float = 1e-12) -> bool:
    r = math.remainder(phase, math.pi)
    return abs(r) < tol


@dataclass(frozen=True)
class TopologySpec:
    """``kind`` is "dense" (any widths) or "sparse" (the locally connected [4,2,1,2,4])."""

    kind: Literal["dense", "sparse"] = "dense"
    widths: tuple[int, ...] = (4, 2, 1, 2, 4)
    stack: int = 1

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if self.kind not in ("dense", "sparse"):
            raise ValueError(f"unknown topology kind {self.kind!r}")
        if self.kind == "sparse" and self.widths != (4, 2, 1, 2, 4):
            raise ValueError("the sparse topology is only defined for widths [4, 2, 1, 2, 4]")
        if self.stack < 1:
            raise ValueError("stack count must be >= 1")

    def build(self) -> Topology:
        top = sparse_topology_4_2_1_2_4() if self.kind == "sparse" else dense_topology(self.widths)
        if self.stack > 1 and not top.is_square:
            raise ValueError("only square networks can be stacked")
        return top


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one sweep.

    ``train_phases`` lists ``(phase, pair_count)``. Test states follow either
    ``test_phases`` (fixed ``(phase, count)`` blocks, in order) or, with
    ``test_rule="random"``, ``random_tests`` phases drawn from (0, pi).
    For ``noise_kind="combined"`` the swept value is the Brownian strength and
    every state first sees spin flips with ``spinflip_p``.
    """

    topology: TopologySpec
    num_qubits: int
    train_phases: tuple[tuple[float, int], ...]
    noise_kind: NoiseKind
    rounds: int = 200
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    test_rule: Literal["fixed", "random"] = "fixed"
    test_phases: tuple[tuple[float, int], ...] = ()
    random_tests: int = 0
    spinflip_p: float = 0.0
    brownian_steps: int = 20
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    init_scale: float = 0.5
    filter_max_flips: int = 1

    def __post_init__(self):
        object.__setattr__(self, "train_phases", tuple((float(a), int(n)) for a, n in self.train_phases))
        object.__setattr__(self, "test_phases", tuple((float(a), int(n)) for a, n in self.test_phases))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        for phase, n in self.train_phases + self.test_phases:
            if not 0 <= phase < 2 * math.pi:
                raise ValueError(f"phase {phase} outside [0, 2pi)")
            if n < 1:
                raise ValueError("counts must be >= 1")
        if not self.train_phases:
            raise ValueError("at least one training phase is required")
        if self.rounds < 1 or not self.seeds:
            raise ValueError("rounds and seeds must be non-empty")
        if self.test_rule == "fixed" and not self.test_phases:
            raise ValueError("fixed test rule needs test_phases")
        if self.test_rule == "random" and self.random_tests < 1:
            raise ValueError("random test rule needs random_tests >= 1")
        if self.noise_kind not in ("spinflip", "brownian", "combined"):
            raise ValueError(f"unknown noise kind {self.noise_kind!r}")
        top = self.topology.build()
        if top.widths[0] != self.num_qubits or top.widths[-1] != self.num_qubits:
            raise ValueError("network input/output width must equal the GHZ size")

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            rounds=self.rounds,
            seed=seed,
            init_scale=self.init_scale,
            lr=self.lr,
            beta1=self.beta1,
            beta2=self.beta2,
            eps=self.eps,
        )

    def test_targets(self, seed: int) -> list[GhzSpec]:
        if self.test_rule == "random":
            return [GhzSpec(self.num_qubits, ph) for ph in random_test_phases(self.random_tests, seed)]
        return [GhzSpec(self.num_qubits, ph) for ph, n in self.test_phases for _ in range(n)]

    def baseline_defined(self) -> bool:
        """The closed-form baseline needs pure spin flips and phases in pi*Z."""
        return (
            self.noise_kind == "spinflip"
            and self.test_rule == "fixed"
            and all(_in_pi_z(ph) for ph, _ in self.test_phases)
        )

    @property
    def num_tests(self) -> int:
        return self.random_tests if self.test_rule == "random" else sum(n for _, n in self.test_phases)


def noise_for(config: ExperimentConfig, value: float) -> NoiseSpec:
    if config.noise_kind == "spinflip":
        return NoiseSpec.of(SpinFlip(value))
    if config.noise_kind == "brownian":
        return NoiseSpec.of(Brownian(value, config.brownian_steps))
    return NoiseSpec.of(SpinFlip(config.spinflip_p), Brownian(value, config.brownian_steps))


def analytic_baseline(p: float, m: int, L: int, phases: Sequence[float] = (0.0,)) -> tuple[float, float]:
    """Mean input fidelity of spin-flipped GHZ states and its standard error over ``L`` states.

    Returns ``((1-p)^m + p^m, sqrt(F(1-F)/L))``. Only valid for GHZ phases in
    pi*Z, where every flipped state is either the target or orthogonal to it.
    """
    if not 0 <= p <= 1 or m < 1 or L < 1:
        raise ValueError("need 0 <= p <= 1, m >= 1, L >= 1")
    if not all(_in_pi_z(ph) for ph in phases):
        raise ValueError("closed form requires GHZ phases in pi*Z")
    f = (1 - p) ** m + p**m
    return f, math.sqrt(f * (1 - f) / L)


def filter_by_flip_count(tests: Sequence[LabeledTestState], max_flips: int) -> list[int]:
    """Indices of the test states with at most ``max_flips`` flipped qubits."""
    if any(t.flip_count is None for t in tests):
        raise ValueError("test states carry no flip labels (unitary noise)")
    return [i for i, t in enumerate(tests) if t.flip_count <= max_flips]


@dataclass
class SeedResult:
    seed: int
    F_bar: float
    dF: float
    F_val_bar: float
    dF_val: float
    F_val_bar_filtered: float | None
    n_tests_filtered: int | None
    history: list[float]
    network: Network
    F: np.ndarray = field(repr=False)
    F_val: np.ndarray = field(repr=False)


@dataclass
class MetricsRecord:
    noise_kind: str
    noise_value: float
    seeds: list[SeedResult]
    F_inf: float | None = None
    dF_inf: float | None = None

    def median(self, name: str) -> float | None:
        vals = [getattr(s, name) for s in self.seeds]
        if any(v is None for v in vals):
            return None
        return float(statistics.median(vals))

    @property
    def F_bar(self) -> float:
        return self.median("F_bar")

    @property
    def F_val_bar(self) -> float:
        return self.median("F_val_bar")


def run_seed(config: ExperimentConfig, value: float, seed: int) -> SeedResult:
    """Draw data from ``seed``, train, validate; deterministic in its arguments."""
    noise = noise_for(config, value)
    m = config.num_qubits
    pairs = build_pairs([(GhzSpec(m, ph), n) for ph, n in config.train_phases], noise, seed)
    tests = build_tests(config.test_targets(seed), noise, seed)
    net, history = train(config.topology.build(), pairs, config.train_config(seed))
    rep = validation(net, tests, stack_times=config.topology.stack)
    f_filt = n_filt = None
    if noise.tracks_flips:
        idx = filter_by_flip_count(tests, config.filter_max_flips)
        n_filt = len(idx)
        f_filt = _mean(rep.F_val[idx]) if idx else None
    log.info("%s=%g seed %d: F_bar %.4f F_val_bar %.4f", config.noise_kind, value, seed, rep.F_bar, rep.F_val_bar)
    return SeedResult(seed, rep.F_bar, rep.dF, rep.F_val_bar, rep.dF_val, f_filt, n_filt, history, net, rep.F, rep.F_val)


def _run_job(args):
    return run_seed(*args)


def _run_jobs(jobs: list[tuple], threads: int) -> list[SeedResult]:
    if threads <= 1 or len(jobs) <= 1:
        return [_run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        # map preserves submission order
        return list(pool.map(_run_job, jobs))


def _record(config: ExperimentConfig, value: float, seeds: list[SeedResult]) -> MetricsRecord:
    rec = MetricsRecord(config.noise_kind, float(value), seeds)
    if config.baseline_defined():
        rec.F_inf, rec.dF_inf = analytic_baseline(value, config.num_qubits, config.num_tests, [ph for ph, _ in config.test_phases])
    return rec


def run_point(config: ExperimentConfig, noise_value: float, threads: int = 1) -> MetricsRecord:
    jobs = [(config, noise_value, s) for s in config.seeds]
    return _record(config, noise_value, _run_jobs(jobs, threads))


def run_sweep(config: ExperimentConfig, noise_grid: Sequence[float], threads: int = 1) -> list[MetricsRecord]:
    grid = [float(v) for v in noise_grid]
    if not grid:
        raise ValueError("noise grid is empty")
    jobs = [(config, v, s) for v in grid for s in config.seeds]
    results = _run_jobs(jobs, threads)
    k = len(config.seeds)
    return [_record(config, v, results[i * k : (i + 1) * k]) for i, v in enumerate(grid)]


METRICS_HEADER = (
    "noise_kind,noise_value,seed,F_bar,dF,F_val_bar,dF_val,F_inf,dF_inf,F_val_bar_Jle1,n_tests_Jle1"
).split(",")


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def metrics_rows(records: Sequence[MetricsRecord]) -> list[list[str]]:
    rows = []
    for rec in records:
        for s in rec.seeds:
            vals = [rec.noise_kind, rec.noise_value, s.seed, s.F_bar, s.dF, s.F_val_bar, s.dF_val,
                    rec.F_inf, rec.dF_inf, s.F_val_bar_filtered, s.n_tests_filtered]
            rows.append([_cell(v) for v in vals])
    return rows


def metrics_csv(records: Sequence[MetricsRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_HEADER)
    w.writerows(metrics_rows(records))
    return buf.getvalue()
