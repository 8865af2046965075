"""Feed-forward quantum neural networks built from layer channels.

A layer maps the state of the previous layer to a fresh register: every new
qubit starts in ``|down>``, the neuron unitaries act one after the other
(neuron 0 first), and the previous layer is traced out. Each neuron unitary is
``exp(iK)`` with ``K`` expanded in non-identity Pauli strings on the neuron's
input connections followed by its own output qubit.

All functions accept a single density matrix or a stack with leading batch axes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import linops

__all__ = [
    "Topology",
    "Network",
    "dense_topology",
    "sparse_topology_4_2_1_2_4",
    "random_network",
    "neuron_unitaries",
    "layer_unitary",
    "attach_fresh",
    "layer_channel",
    "forward",
    "attach_fresh_factor",
    "compress_factor",
    "forward_factors",
    "stack",
    "save_network",
    "load_network",
]


@dataclass(frozen=True)
class Topology:
    """Layer widths plus, for every non-input neuron, the previous-layer qubits it reads.

    ``connections[l - 1][j]`` lists the qubits of layer ``l - 1`` that neuron
    ``j`` of layer ``l`` acts on.
    """

    widths: tuple[int, ...]
    connections: tuple[tuple[tuple[int, ...], ...], ...]

    def __post_init__(self):
        widths = tuple(int(w) for w in self.widths)
        conns = tuple(tuple(tuple(int(q) for q in c) for c in layer) for layer in self.connections)
        object.__setattr__(self, "widths", widths)
        object.__setattr__(self, "connections", conns)
        if len(widths) < 2 or min(widths) < 1:
            raise ValueError(f"need at least two non-empty layers, got {widths}")
        if len(conns) != len(widths) - 1:
            raise ValueError("one connection list per non-input layer is required")
        for l, layer in enumerate(conns, start=1):
            if len(layer) != widths[l]:
                raise ValueError(f"layer {l} has {widths[l]} neurons but {len(layer)} connection lists")
            for c in layer:
                if len(set(c)) != len(c) or any(q < 0 or q >= widths[l - 1] for q in c):
                    raise ValueError(f"invalid connections {c} into layer {l}")

    @property
    def depth(self) -> int:
        return len(self.widths)

    def neuron_qubits(self, layer: int, j: int) -> int:
        """Number of qubits a neuron unitary acts on (inputs plus its own)."""
        return len(self.connections[layer - 1][j]) + 1

    def neuron_targets(self, layer: int, j: int) -> list[int]:
        """Register positions of a neuron inside the (previous + current) layer register."""
        return list(self.connections[layer - 1][j]) + [self.widths[layer - 1] + j]

    def neurons(self):
        for l in range(1, self.depth):
            for j in range(self.widths[l]):
                yield l, j

    def param_sizes(self) -> list[int]:
        return [4 ** self.neuron_qubits(l, j) - 1 for l, j in self.neurons()]

    @property
    def num_params(self) -> int:
        return sum(self.param_sizes())

    @property
    def is_square(self) -> bool:
        return self.widths[0] == self.widths[-1]

    def check_autoencoder(self) -> None:
        if not self.is_square:
            raise ValueError(f"input and output widths differ: {self.widths}")
        if len(self.widths) < 3 or min(self.widths[1:-1]) >= self.widths[0]:
            raise ValueError(f"no bottleneck in {self.widths}")

    def to_dict(self) -> dict:
        return {"widths": list(self.widths), "connections": [[list(c) for c in layer] for layer in self.connections]}

    @classmethod
    def from_dict(cls, d: dict) -> "Topology":
        return cls(tuple(d["widths"]), tuple(tuple(tuple(c) for c in layer) for layer in d["connections"]))


def dense_topology(widths: Sequence[int]) -> Topology:
    """Every neuron connected to every qubit of the previous layer."""
    widths = tuple(widths)
    conns = tuple(tuple(tuple(range(widths[l - 1])) for _ in range(widths[l])) for l in range(1, len(widths)))
    return Topology(widths, conns)


def sparse_topology_4_2_1_2_4() -> Topology:
    """Locally connected [4, 2, 1, 2, 4] autoencoder: each neuron reads adjacent qubits only."""
    return Topology(
        (4, 2, 1, 2, 4),
        (
            ((0, 1), (2, 3)),
            ((0, 1),),
            ((0,), (0,)),
            ((0,), (0,), (1,), (1,)),
        ),
    )


@dataclass(frozen=True)
class Network:
    """A topology with one Pauli coefficient vector per neuron (in ``Topology.neurons`` order)."""

    topology: Topology
    params: tuple[np.ndarray, ...]

    def __post_init__(self):
        params = tuple(np.array(p, dtype=float) for p in self.params)
        sizes = self.topology.param_sizes()
        if [p.shape for p in params] != [(s,) for s in sizes]:
            raise ValueError("parameter vectors do not match topology fan-ins")
        for p in params:
            p.setflags(write=False)
        object.__setattr__(self, "params", params)

    def flat(self) -> np.ndarray:
        return np.concatenate(self.params)

    @classmethod
    def from_flat(cls, topology: Topology, vec: np.ndarray) -> "Network":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (topology.num_params,):
            raise ValueError(f"expected {topology.num_params} parameters, got {vec.shape}")
        cuts = np.cumsum(topology.param_sizes())[:-1]
        return cls(topology, tuple(np.split(vec, cuts)))

    def neuron_params(self, layer: int, j: int) -> np.ndarray:
        idx = sum(self.topology.widths[1:layer]) + j
        return self.params[idx]


def random_network(topology: Topology, rng: np.random.Generator, scale: float = 0.5) -> Network:
    """Coefficients drawn i.i.d. from N(0, scale^2)."""
    return Network.from_flat(topology, rng.normal(scale=scale, size=topology.num_params))


def neuron_unitaries(net: Network, layer: int, with_eig: bool = False):
    """Embedded neuron unitaries of one layer on its (previous + current) register.

    With ``with_eig`` the eigendecomposition of each generator is returned too,
    as ``(U_embedded, evals, evecs)`` tuples.
    """
    top = net.topology
    total = top.widths[layer - 1] + top.widths[layer]
    out = []
    for j in range(top.widths[layer]):
        f = top.neuron_qubits(layer, j)
        u, evals, evecs = linops.expi_hermitian(linops.generator_matrix(net.neuron_params(layer, j), f))
        big = linops.embed_unitary(u, top.neuron_targets(layer, j), total)
        out.append((big, evals, evecs) if with_eig else big)
    return out


def layer_unitary(net: Network, layer: int) -> np.ndarray:
    """Product ``U_last ... U_0`` of a layer's embedded neuron unitaries."""
    us = neuron_unitaries(net, layer)
    total = us[0]
    for u in us[1:]:
        total = u @ total
    return total


def attach_fresh(rho: np.ndarray, width: int) -> np.ndarray:
    """``rho (x) |down..down><down..down|`` on ``width`` appended qubits."""
    b = 1 << width
    a = rho.shape[-1]
    out = np.zeros(rho.shape[:-2] + (a * b, a * b), dtype=complex)
    out[..., b - 1 :: b, b - 1 :: b] = rho
    return out


def _check_width(rho: np.ndarray, width: int) -> None:
    if rho.shape[-1] != 1 << width or rho.shape[-2] != rho.shape[-1]:
        raise ValueError(f"state of shape {rho.shape} does not have {width} qubits")


def _conjugate(u: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return u @ rho @ u.conj().T


def layer_channel(net: Network, layer: int, rho: np.ndarray, unitary: np.ndarray | None = None) -> np.ndarray:
    """Apply layer ``layer`` (1 .. depth-1) to the state of layer ``layer - 1``."""
    top = net.topology
    a, b = top.widths[layer - 1], top.widths[layer]
    rho = np.asarray(rho, dtype=complex)
    _check_width(rho, a)
    u = layer_unitary(net, layer) if unitary is None else unitary
    full = _conjugate(u, attach_fresh(rho, b))
    return linops.reduce_operator(full, a + b, list(range(a, a + b)))


def forward(net: Network, rho: np.ndarray, times: int = 1) -> np.ndarray:
    """The full network channel, applied ``times`` times in sequence."""
    top = net.topology
    if times < 1:
        raise ValueError("times must be >= 1")
    if times > 1 and not top.is_square:
        raise ValueError("only networks with equal input and output widths can be stacked")
    rho = np.asarray(rho, dtype=complex)
    _check_width(rho, top.widths[0])
    unitaries = [layer_unitary(net, l) for l in range(1, top.depth)]
    for _ in range(times):
        for l, u in enumerate(unitaries, start=1):
            rho = layer_channel(net, l, rho, unitary=u)
    return rho


def attach_fresh_factor(x: np.ndarray, width: int) -> np.ndarray:
    """Factor of ``X X^+ (x) |down..down><down..down|`` for a stack of factors ``X``."""
    b = 1 << width
    out = np.zeros(x.shape[:-2] + (x.shape[-2] * b, x.shape[-1]), dtype=complex)
    out[..., b - 1 :: b, :] = x
    return out


def trace_out_previous(x: np.ndarray, a: int, b: int) -> np.ndarray:
    """Factor of the reduced state on the last ``b`` qubits of a factor on ``a + b`` qubits."""
    batch = x.shape[:-2]
    r = x.shape[-1]
    t = x.reshape(batch + (1 << a, 1 << b, r))
    t = np.swapaxes(t, -3, -2)
    return t.reshape(batch + (1 << b, (1 << a) * r))


def compress_factor(x: np.ndarray) -> np.ndarray:
    """Equivalent square factor (same ``X X^+``) when ``X`` has more columns than rows."""
    d, k = x.shape[-2:]
    if k <= d:
        return x
    # X^+ = Q R  =>  X X^+ = R^+ R
    r = np.linalg.qr(np.swapaxes(x, -1, -2).conj(), mode="r")
    return np.swapaxes(r, -1, -2).conj()


def forward_factors(net: Network, x: np.ndarray, times: int = 1) -> np.ndarray:
    """The network channel acting on states given as factors ``rho = X X^+``.

    ``x`` has shape ``(..., 2**w_in, r)``; a stack of pure states is
    ``psi[..., None]``. Agrees with :func:`forward` on ``X X^+``.
    """
    top = net.topology
    if times > 1 and not top.is_square:
        raise ValueError("only networks with equal input and output widths can be stacked")
    if x.shape[-2] != 1 << top.widths[0]:
        raise ValueError(f"factor of shape {x.shape} does not match input width {top.widths[0]}")
    unitaries = [layer_unitary(net, l) for l in range(1, top.depth)]
    for _ in range(times):
        for l, u in enumerate(unitaries, start=1):
            a, b = top.widths[l - 1], top.widths[l]
            x = np.matmul(u, attach_fresh_factor(x, b))
            x = compress_factor(trace_out_previous(x, a, b))
    return x


def stack(net: Network, times: int) -> Callable[[np.ndarray], np.ndarray]:
    """A trained square network applied ``times`` times, as a callable channel."""
    if times < 1:
        raise ValueError("times must be >= 1")
    if not net.topology.is_square:
        raise ValueError("only networks with equal input and output widths can be stacked")
    return partial(forward, net, times=times)


# --- text format ------------------------------------------------------------
#
#   # qae-network v1
#   topology {"widths": [...], "connections": [...]}
#   <coefficients of neuron 0 of layer 1, comma separated>
#   ...

NETWORK_MAGIC = "# qae-network v1"


def save_network(net: Network, path: str | Path) -> None:
    lines = [NETWORK_MAGIC, "topology " + json.dumps(net.topology.to_dict())]
    lines += [",".join(repr(float(x)) for x in p) for p in net.params]
    Path(path).write_text("\n".join(lines) + "\n")


def load_network(path: str | Path) -> Network:
    lines = Path(path).read_text().splitlines()
    if len(lines) < 2 or lines[0] != NETWORK_MAGIC or not lines[1].startswith("topology "):
        raise ValueError(f"{path}: not a qae network file")
    top = Topology.from_dict(json.loads(lines[1][len("topology "):]))
    params = [np.array([float(x) for x in line.split(",")]) for line in lines[2:] if line.strip()]
    return Network(top, tuple(params))
