"""Noise processes acting on qubit registers.

Channels act on density matrices; samplers draw single-shot pure-state
transformations (flip subsets, Brownian unitaries) from an explicit
``numpy.random.Generator``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .linops import expi_hermitian, num_qubits, partial_trace

__all__ = [
    "SpinFlip",
    "Brownian",
    "Depolarizing",
    "NoiseSpec",
    "flip_probability",
    "spinflip_channel",
    "depolarizing_channel",
    "apply_channel",
    "sample_flip_subset",
    "flip_state",
    "random_hermitian",
    "sample_brownian_unitary",
    "noisy_shot",
    "apply_noise_to_pure",
]


@dataclass(frozen=True)
class SpinFlip:
    """Independent sigma-x flip of every qubit with probability ``p``."""

    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 0.5:
            raise ValueError(f"spin-flip probability must lie in [0, 0.5], got {self.p}")


@dataclass(frozen=True)
class Brownian:
    """Random unitary built from ``n`` Gaussian Hermitian steps of total strength ``q``."""

    q: float
    n: int = 20

    def __post_init__(self):
        if self.q < 0:
            raise ValueError(f"noise strength q must be >= 0, got {self.q}")
        if self.n < 1:
            raise ValueError(f"number of Brownian steps must be >= 1, got {self.n}")


@dataclass(frozen=True)
class Depolarizing:
    """Per-qubit replacement by the maximally mixed state with probability ``p_u``."""

    p_u: float

    def __post_init__(self):
        if not 0.0 <= self.p_u <= 1.0:
            raise ValueError(f"depolarizing probability must lie in [0, 1], got {self.p_u}")


Stage = Union[SpinFlip, Brownian, Depolarizing]

_STAGE_KINDS = {"spinflip": SpinFlip, "brownian": Brownian, "depolarizing": Depolarizing}


@dataclass(frozen=True)
class NoiseSpec:
    """Ordered sequence of noise stages, applied first to last."""

    stages: tuple[Stage, ...]

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        if not self.stages:
            raise ValueError("a noise spec needs at least one stage")

    @classmethod
    def of(cls, *stages: Stage) -> "NoiseSpec":
        return cls(stages)

    def to_list(self) -> list[dict]:
        out = []
        for s in self.stages:
            kind = next(k for k, t in _STAGE_KINDS.items() if isinstance(s, t))
            out.append({"kind": kind, **s.__dict__})
        return out

    @classmethod
    def from_list(cls, items: list[dict]) -> "NoiseSpec":
        stages = []
        for item in items:
            item = dict(item)
            kind = item.pop("kind")
            stages.append(_STAGE_KINDS[kind](**item))
        return cls(tuple(stages))

    def spin_flip_p(self) -> float | None:
        """Flip probability if the noise sequence contains exactly one spin-flip stage and nothing else."""
        if len(self.stages) == 1 and isinstance(self.stages[0], SpinFlip):
            return self.stages[0].p
        return None

    @property
    def tracks_flips(self) -> bool:
        return any(isinstance(s, SpinFlip) for s in self.stages)


def flip_probability(gamma_t: float) -> float:
    """Probability that a qubit ends up flipped after flipping at rate Gamma for time T."""
    if gamma_t < 0:
        raise ValueError("Gamma*T must be non-negative")
    return (1.0 - math.exp(-2.0 * gamma_t)) / 2.0


def _conjugate_flip(rho: np.ndarray, j: int, m: int) -> np.ndarray:
    """sigma^x_j rho sigma^x_j as an index permutation."""
    t = rho.reshape((2,) * (2 * m))
    return np.flip(t, axis=(j, m + j)).reshape(rho.shape)


def spinflip_channel(p: float, rho: np.ndarray) -> np.ndarray:
    """Concatenation over all qubits of ``rho -> p X_j rho X_j + (1-p) rho``."""
    rho = np.asarray(rho, dtype=complex)
    m = num_qubits(rho.shape[0])
    for j in range(m):
        rho = p * _conjugate_flip(rho, j, m) + (1 - p) * rho
    return rho


def depolarizing_channel(p_u: float, rho: np.ndarray) -> np.ndarray:
    """Concatenation over all qubits of ``rho -> p_u (tr_j rho) (x) Id_j/2 + (1-p_u) rho``."""
    rho = np.asarray(rho, dtype=complex)
    m = num_qubits(rho.shape[0])
    for j in range(m):
        rest = [q for q in range(m) if q != j]
        if rest:
            reduced = partial_trace(rho, rest)
            replaced = np.kron(reduced, np.eye(2) / 2)
            # move the fresh qubit from the last position back to j
            t = replaced.reshape((2,) * (2 * m))
            order = list(range(m - 1))
            order.insert(j, m - 1)
            t = t.transpose(order + [m + i for i in order])
            replaced = t.reshape(rho.shape)
        else:
            replaced = np.trace(rho) * np.eye(2) / 2
        rho = p_u * replaced + (1 - p_u) * rho
    return rho


def apply_channel(spec: NoiseSpec, rho: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
    """Apply each stage's channel in order.

    Brownian stages have no closed-form channel here; they act as one sampled
    unitary drawn from ``rng``.
    """
    m = num_qubits(np.asarray(rho).shape[0])
    for s in spec.stages:
        if isinstance(s, SpinFlip):
            rho = spinflip_channel(s.p, rho)
        elif isinstance(s, Depolarizing):
            rho = depolarizing_channel(s.p_u, rho)
        else:
            if rng is None:
                raise ValueError("a Brownian stage needs a random generator")
            u = sample_brownian_unitary(s, m, rng)
            rho = u @ rho @ u.conj().T
    return rho


def sample_flip_subset(p: float, m: int, rng: np.random.Generator) -> tuple[int, ...]:
    """Draw the set of flipped qubits; each qubit independently with probability ``p``."""
    SpinFlip(p)
    hits = rng.random(m) < p
    return tuple(int(j) for j in np.flatnonzero(hits))


def flip_state(psi: np.ndarray, flipped) -> np.ndarray:
    """Apply sigma-x to every qubit in ``flipped`` (0-based) of a pure state."""
    psi = np.asarray(psi, dtype=complex)
    m = num_qubits(psi.shape[0])
    flipped = tuple(flipped)
    if any(j < 0 or j >= m for j in flipped):
        raise ValueError(f"flip index out of range for {m} qubits: {flipped}")
    if not flipped:
        return psi.copy()
    return np.flip(psi.reshape((2,) * m), axis=flipped).reshape(-1).copy()


def random_hermitian(dim: int, sigma: float, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Gaussian Hermitian matrix whose every entry has standard deviation ``sigma``.

    Diagonal entries are real; off-diagonal real and imaginary parts each have
    standard deviation ``sigma / sqrt(2)``.
    """
    shape = (dim, dim) if size is None else (size, dim, dim)
    a = rng.normal(scale=sigma / math.sqrt(2), size=shape) + 1j * rng.normal(scale=sigma / math.sqrt(2), size=shape)
    upper = np.triu(a, 1)
    diag = rng.normal(scale=sigma, size=shape[:-1])
    h = upper + upper.conj().swapaxes(-1, -2)
    idx = np.arange(dim)
    h[..., idx, idx] = diag
    return h


def brownian_step_sigma(spec: Brownian, m: int) -> float:
    """Entry standard deviation of each step generator, chosen so total variance is independent of n."""
    return 2.0 * math.pi * spec.q / math.sqrt((2**m) * spec.n)


def sample_brownian_unitary(spec: Brownian, m: int, rng: np.random.Generator) -> np.ndarray:
    """Product of ``n`` exponentials ``exp(i G_j)`` of independent Gaussian Hermitian generators."""
    if m < 1:
        raise ValueError("need at least one qubit")
    d = 2**m
    if spec.q == 0:
        return np.eye(d, dtype=complex)
    gens = random_hermitian(d, brownian_step_sigma(spec, m), rng, size=spec.n)
    steps = expi_hermitian(gens)[0]
    u = steps[0]
    for s in steps[1:]:
        u = u @ s
    return u


def noisy_shot(spec: NoiseSpec, psi: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, int | None]:
    """One experimental shot of the noise on a pure state.

    Returns the noisy state and the total number of flipped qubits, or
    ``None`` when the noise sequence has no spin-flip stage.
    """
    psi = np.asarray(psi, dtype=complex)
    m = num_qubits(psi.shape[0])
    flips = None
    for s in spec.stages:
        if isinstance(s, SpinFlip):
            j = sample_flip_subset(s.p, m, rng)
            psi = flip_state(psi, j)
            flips = (flips or 0) + len(j)
        elif isinstance(s, Brownian):
            psi = sample_brownian_unitary(s, m, rng) @ psi
        else:
            raise ValueError("depolarizing noise has no pure-state shot model")
    if any(isinstance(s, Brownian) for s in spec.stages):
        psi = psi / np.linalg.norm(psi)
    return psi, flips


def apply_noise_to_pure(spec: NoiseSpec, psi: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return noisy_shot(spec, psi, rng)[0]
