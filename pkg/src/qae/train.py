"""Cost, validation and gradient-based training of quantum autoencoders."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from . import linops
from .qnn import (
    Network,
    Topology,
    attach_fresh_factor,
    compress_factor,
    forward,
    neuron_unitaries,
    random_network,
    trace_out_previous,
)
from .states import LabeledTestState, TrainingPair

log = logging.getLogger(__name__)

__all__ = [
    "CostReport",
    "ValidationReport",
    "OptimizerState",
    "TrainConfig",
    "batch_fidelities",
    "cost",
    "spread",
    "validation",
    "gradient",
    "nadam_step",
    "train",
]

STREAM_INIT = 3


@dataclass(frozen=True)
class CostReport:
    cost: float
    mean_fidelity: float
    per_sample_fidelities: np.ndarray


@dataclass(frozen=True)
class ValidationReport:
    """Fidelities with the ideal targets before (``F``) and after (``F_val``) denoising."""

    F_bar: float
    dF: float
    F: np.ndarray
    F_val_bar: float
    dF_val: float
    F_val: np.ndarray


@dataclass
class OptimizerState:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None


@dataclass(frozen=True)
class TrainConfig:
    rounds: int = 200
    seed: int = 0
    init_scale: float = 0.5
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    gradient: Literal["analytic", "finite-difference"] = "analytic"

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")


def _stack_states(states: Sequence[np.ndarray]) -> np.ndarray:
    return np.stack([np.asarray(s, dtype=complex) for s in states])


def batch_fidelities(rhos: np.ndarray, psis: np.ndarray) -> np.ndarray:
    """``<psi_i|rho_i|psi_i>`` for stacks of density matrices and states, clamped to [0, 1]."""
    vals = np.einsum("ia,iab,ib->i", psis.conj(), rhos, psis).real
    return np.clip(vals, 0.0, 1.0)


def _mean(values: np.ndarray) -> float:
    # fixed sequential order keeps reductions bit-reproducible
    total = 0.0
    for x in values:
        total += float(x)
    return total / len(values)


def spread(values: np.ndarray, mean: float | None = None) -> float:
    """``sqrt(sum_i (x_i - mean)^2)`` without the 1/L normalization."""
    mean = _mean(values) if mean is None else mean
    return math.sqrt(sum((float(x) - mean) ** 2 for x in values))


def cost(net: Network, data: Sequence[TrainingPair]) -> CostReport:
    """One minus the mean fidelity of the network outputs with the reference states."""
    if not data:
        raise ValueError("cost needs at least one training pair")
    rho_in = linops.projector(_stack_states([p.input for p in data]))
    refs = _stack_states([p.reference for p in data])
    f = batch_fidelities(forward(net, rho_in), refs)
    mean = _mean(f)
    return CostReport(1.0 - mean, mean, f)


def validation(net: Network, tests: Sequence[LabeledTestState], stack_times: int = 1) -> ValidationReport:
    """Fidelities of noisy inputs and of network outputs with the ideal targets."""
    if not tests:
        raise ValueError("validation needs at least one test state")
    noisy = _stack_states([t.noisy for t in tests])
    ideal = _stack_states([t.ideal for t in tests])
    rho_in = linops.projector(noisy)
    f_in = batch_fidelities(rho_in, ideal)
    f_out = batch_fidelities(forward(net, rho_in, times=stack_times), ideal)
    m_in, m_out = _mean(f_in), _mean(f_out)
    return ValidationReport(m_in, spread(f_in, m_in), f_in, m_out, spread(f_out, m_out), f_out)


def _cost_and_gradient(net: Network, data: Sequence[TrainingPair]) -> tuple[float, np.ndarray]:
    """Cost and its analytic gradient.

    States are carried as factors ``rho = X X^+``. For a neuron unitary ``U``
    between the state ``A = X X^+`` before it and the back-propagated
    observable ``B`` after it, the fidelity is ``tr(B U A U^+)`` and its
    differential ``2 Re tr(Z dU)`` with ``Z = X (B U X)^+``. The cotangent
    ``Y = B U X`` is carried backwards as ``Y <- U^+ Y``, so no full
    observable matrix is ever conjugated.
    """
    top = net.topology
    L = len(data)
    x = _stack_states([p.input for p in data])[..., None]
    refs = _stack_states([p.reference for p in data])

    layers = []
    for l in range(1, top.depth):
        a, b = top.widths[l - 1], top.widths[l]
        units = neuron_unitaries(net, l, with_eig=True)
        factors = [attach_fresh_factor(x, b)]
        for u, _, _ in units:
            factors.append(np.matmul(u, factors[-1]))
        x = compress_factor(trace_out_previous(factors[-1], a, b))
        layers.append((units, factors))

    # <ref| X X^+ |ref> = |X^+ ref|^2
    overlaps = np.einsum("lar,la->lr", x.conj(), refs)
    fid = np.clip(np.sum(np.abs(overlaps) ** 2, axis=-1), 0.0, 1.0)
    c = 1.0 - _mean(fid)

    per_layer: dict[int, list[np.ndarray]] = {}
    sigma = linops.projector(refs)
    for l in range(top.depth - 1, 0, -1):
        a, b = top.widths[l - 1], top.widths[l]
        n = a + b
        units, factors = layers[l - 1]
        r = factors[-1].shape[-1]
        # Y = (Id (x) sigma) X on the final factor of this layer
        xf = factors[-1].reshape(L, 1 << a, 1 << b, r)
        y = np.einsum("lcd,ladr->lacr", sigma, xf).reshape(L, 1 << n, r)
        layer_grads = []
        for j in range(len(units) - 1, -1, -1):
            u, evals, evecs = units[j]
            targets = top.neuron_targets(l, j)
            zr = _reduced_outer(factors[j], y, n, targets)
            g = linops.exp_hermitian_pullback(evals, evecs, len(targets), zr)
            layer_grads.append(-2.0 / L * g)
            y = np.matmul(u.conj().T, y)
        per_layer[l] = layer_grads[::-1]
        if l > 1:
            # observable seen by the previous layer: <down..| W^+ (Id (x) sigma) W |..down>
            w = units[0][0]
            for u, _, _ in units[1:]:
                w = u @ w
            wc = w[:, (1 << b) - 1 :: 1 << b].reshape(1 << a, 1 << b, 1 << a)
            t = np.einsum("lcd,adx->lacx", sigma, wc)
            sigma = np.einsum("acy,lacx->lyx", wc.conj(), t)
    return c, np.concatenate([g for l in sorted(per_layer) for g in per_layer[l]])


def _reduced_outer(x: np.ndarray, y: np.ndarray, n: int, targets: list[int]) -> np.ndarray:
    """``sum_l tr_rest(X_l Y_l^+)`` with the result's qubits in ``targets`` order."""
    L, _, r = x.shape
    rest = [q for q in range(n) if q not in targets]
    perm = [0] + [1 + q for q in targets] + [1 + q for q in rest] + [n + 1]
    shape = (L, 1 << len(targets), 1 << len(rest), r)
    xp = x.reshape((L,) + (2,) * n + (r,)).transpose(perm).reshape(shape)
    yp = y.reshape((L,) + (2,) * n + (r,)).transpose(perm).reshape(shape)
    return np.tensordot(xp, yp.conj(), axes=([0, 2, 3], [0, 2, 3]))


def _fd_gradient(net: Network, data: Sequence[TrainingPair], h: float = 1e-5) -> np.ndarray:
    theta = net.flat()
    g = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        plus = cost(Network.from_flat(net.topology, theta + e), data).cost
        minus = cost(Network.from_flat(net.topology, theta - e), data).cost
        g[i] = (plus - minus) / (2 * h)
    return g


def gradient(net: Network, data: Sequence[TrainingPair], mode: str = "analytic") -> np.ndarray:
    """Gradient of the cost with respect to all coefficients, flattened in neuron order."""
    if not data:
        raise ValueError("gradient needs at least one training pair")
    if mode == "analytic":
        return _cost_and_gradient(net, data)[1]
    if mode == "finite-difference":
        return _fd_gradient(net, data)
    raise ValueError(f"unknown gradient mode {mode!r}")


def nadam_step(state: OptimizerState, params: np.ndarray, grad: np.ndarray) -> tuple[OptimizerState, np.ndarray]:
    """One Nesterov-accelerated Adam update; returns a new state and new parameters."""
    params = np.asarray(params, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if params.shape != grad.shape:
        raise ValueError(f"parameter/gradient length mismatch: {params.shape} vs {grad.shape}")
    m = np.zeros_like(params) if state.m is None else state.m
    v = np.zeros_like(params) if state.v is None else state.v
    if m.shape != params.shape:
        raise ValueError("optimizer moments do not match the parameter vector")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    m = b1 * m + (1 - b1) * grad
    v = b2 * v + (1 - b2) * grad * grad
    m_hat = m / (1 - b1**t)
    v_hat = v / (1 - b2**t)
    step = state.lr * (b1 * m_hat + (1 - b1) * grad / (1 - b1**t)) / (np.sqrt(v_hat) + state.eps)
    new_state = OptimizerState(state.lr, b1, b2, state.eps, t, m, v)
    return new_state, params - step


def train(
    topology: Topology,
    data: Sequence[TrainingPair],
    config: TrainConfig,
    init: Network | None = None,
) -> tuple[Network, list[float]]:
    """Full-batch Nadam training; returns the final network and the cost before each round."""
    if not data:
        raise ValueError("training needs at least one pair")
    if data[0].input.shape[0] != 1 << topology.widths[0]:
        raise ValueError("training states do not match the network input width")
    if init is None:
        init = random_network(topology, np.random.default_rng([config.seed, STREAM_INIT]), config.init_scale)
    net = init
    opt = OptimizerState(config.lr, config.beta1, config.beta2, config.eps)
    theta = net.flat()
    history = []
    for r in range(config.rounds):
        if config.gradient == "analytic":
            c, g = _cost_and_gradient(net, data)
        else:
            c, g = cost(net, data).cost, _fd_gradient(net, data)
        history.append(c)
        opt, theta = nadam_step(opt, theta, g)
        net = Network.from_flat(topology, theta)
        if r % 25 == 0:
            log.debug("round %d cost %.6f", r, c)
    return net, history
