"""GHZ targets and datasets of independently noised pairs."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .noise import NoiseSpec, flip_state, noisy_shot

__all__ = [
    "GhzSpec",
    "TrainingPair",
    "LabeledTestState",
    "Dataset",
    "ghz",
    "apply_flips",
    "random_test_phases",
    "build_pairs",
    "build_tests",
    "build_dataset",
    "save_dataset",
    "load_dataset",
]

TWO_PI = 2.0 * math.pi

# Independent random sub-streams, keyed by purpose and item index.
STREAM_PAIRS = 0
STREAM_TESTS = 1
STREAM_PHASES = 2


def _stream(seed: int, purpose: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, purpose, index])


@dataclass(frozen=True)
class GhzSpec:
    num_qubits: int
    phase: float = 0.0

    def __post_init__(self):
        if self.num_qubits < 2:
            raise ValueError(f"GHZ states need at least 2 qubits, got {self.num_qubits}")
        object.__setattr__(self, "phase", float(self.phase) % TWO_PI)


@dataclass(frozen=True)
class TrainingPair:
    input: np.ndarray
    reference: np.ndarray

    def __post_init__(self):
        if self.input.shape != self.reference.shape:
            raise ValueError("input and reference differ in size")


@dataclass(frozen=True)
class LabeledTestState:
    noisy: np.ndarray
    ideal: np.ndarray
    flip_count: int | None = None

    def __post_init__(self):
        if self.noisy.shape != self.ideal.shape:
            raise ValueError("noisy and ideal states differ in size")


@dataclass(frozen=True)
class Dataset:
    num_qubits: int
    noise: NoiseSpec
    seed: int
    pairs: tuple[TrainingPair, ...]
    tests: tuple[LabeledTestState, ...]


def ghz(spec: GhzSpec) -> np.ndarray:
    """``(|up...up> + e^{i phase} |down...down>) / sqrt(2)``."""
    v = np.zeros(2**spec.num_qubits, dtype=complex)
    v[0] = 1 / math.sqrt(2)
    v[-1] = np.exp(1j * spec.phase) / math.sqrt(2)
    return v


def apply_flips(psi: np.ndarray, flipped) -> np.ndarray:
    return flip_state(psi, flipped)


def random_test_phases(count: int, seed: int) -> list[float]:
    """Phases drawn uniformly from the open interval (0, pi)."""
    out = []
    for i in range(count):
        rng = _stream(seed, STREAM_PHASES, i)
        phi = 0.0
        while phi == 0.0:
            phi = rng.uniform(0.0, math.pi)
        out.append(phi)
    return out


def build_pairs(targets: Sequence[tuple[GhzSpec, int]], noise: NoiseSpec, seed: int) -> list[TrainingPair]:
    """Two independent noise draws of the same ideal target per pair, target by target."""
    pairs = []
    for spec, count in targets:
        if count < 1:
            raise ValueError("pair counts must be >= 1")
        ideal = ghz(spec)
        for _ in range(count):
            rng = _stream(seed, STREAM_PAIRS, len(pairs))
            a, _ = noisy_shot(noise, ideal, rng)
            b, _ = noisy_shot(noise, ideal, rng)
            pairs.append(TrainingPair(a, b))
    return pairs


def build_tests(targets: Sequence[GhzSpec], noise: NoiseSpec, seed: int) -> list[LabeledTestState]:
    """One noisy state per listed target, labelled with its ideal state and flip count."""
    tests = []
    for i, spec in enumerate(targets):
        ideal = ghz(spec)
        noisy, flips = noisy_shot(noise, ideal, _stream(seed, STREAM_TESTS, i))
        tests.append(LabeledTestState(noisy, ideal, flips))
    return tests


def build_dataset(
    targets: Sequence[tuple[GhzSpec, int]],
    noise: NoiseSpec,
    seed: int,
    test_targets: Sequence[GhzSpec] = (),
) -> tuple[list[TrainingPair], list[LabeledTestState]]:
    """Training pairs for ``targets`` and labelled test states for ``test_targets``."""
    return build_pairs(targets, noise, seed), build_tests(test_targets, noise, seed)


# --- text format ------------------------------------------------------------
#
#   # qae-dataset v1 {"num_qubits": m, "seed": s, "noise": [...]}
#   input,<i>,,<re>,<im>,<re>,<im>,...
#   reference,<i>,,...
#   noisy,<i>,<flip count or empty>,...
#   ideal,<i>,,...

DATASET_MAGIC = "# qae-dataset v1 "


def _amps_to_text(psi: np.ndarray) -> str:
    return ",".join(f"{repr(float(z.real))},{repr(float(z.imag))}" for z in psi)


def _text_to_amps(fields: Sequence[str]) -> np.ndarray:
    vals = np.array([float(x) for x in fields])
    if vals.size % 2:
        raise ValueError("odd number of amplitude fields")
    return vals[0::2] + 1j * vals[1::2]


def save_dataset(ds: Dataset, path: str | Path) -> None:
    header = {"num_qubits": ds.num_qubits, "seed": ds.seed, "noise": ds.noise.to_list()}
    lines = [DATASET_MAGIC + json.dumps(header, sort_keys=True)]
    for i, p in enumerate(ds.pairs):
        lines.append(f"input,{i},," + _amps_to_text(p.input))
        lines.append(f"reference,{i},," + _amps_to_text(p.reference))
    for i, t in enumerate(ds.tests):
        flips = "" if t.flip_count is None else str(t.flip_count)
        lines.append(f"noisy,{i},{flips}," + _amps_to_text(t.noisy))
        lines.append(f"ideal,{i},," + _amps_to_text(t.ideal))
    Path(path).write_text("\n".join(lines) + "\n")


def load_states(path: str | Path) -> tuple[dict, dict[str, dict[int, tuple[np.ndarray, int | None]]]]:
    """Parse a dataset file into its header and ``{tag: {index: (amplitudes, flips)}}``."""
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith(DATASET_MAGIC):
        raise ValueError(f"{path}: missing dataset header")
    header = json.loads(text[0][len(DATASET_MAGIC):])
    dim = 2 ** header["num_qubits"]
    rows: dict[str, dict[int, tuple[np.ndarray, int | None]]] = {}
    for lineno, line in enumerate(text[1:], start=2):
        if not line.strip():
            continue
        tag, idx, flips, *amps = line.split(",")
        psi = _text_to_amps(amps)
        if psi.size != dim:
            raise ValueError(f"{path}:{lineno}: expected {dim} amplitudes, got {psi.size}")
        rows.setdefault(tag, {})[int(idx)] = (psi, int(flips) if flips else None)
    return header, rows


def load_dataset(path: str | Path) -> Dataset:
    header, rows = load_states(path)
    inputs, refs = rows.get("input", {}), rows.get("reference", {})
    noisy, ideal = rows.get("noisy", {}), rows.get("ideal", {})
    pairs = tuple(TrainingPair(inputs[i][0], refs[i][0]) for i in sorted(inputs))
    tests = tuple(LabeledTestState(noisy[i][0], ideal[i][0], noisy[i][1]) for i in sorted(noisy))
    return Dataset(header["num_qubits"], NoiseSpec.from_list(header["noise"]), header["seed"], pairs, tests)
