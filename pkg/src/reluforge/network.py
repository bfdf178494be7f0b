"""Feed-forward ReLU networks: representation, evaluation, combinators, text I/O.

A network is a tuple of affine layers. Every layer but the last applies a ReLU;
the last layer is purely linear with zero bias. Depth counts weight layers
(including the output layer) and width is the largest layer size.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._io import write_atomic

__all__ = [
    "Layer",
    "Network",
    "NetworkFormatError",
    "evaluate",
    "stack",
    "parallel",
    "propagate_pad",
    "affine_pre",
    "affine_post",
    "identity_network",
    "save",
    "load",
    "dumps",
    "loads",
]


class NetworkFormatError(ValueError):
    """Malformed network file. ``lineno`` is 1-based, or None for structural errors."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Layer:
    weight: np.ndarray  # (n_out, n_in)
    bias: np.ndarray  # (n_out,)
    relu: bool

    def __post_init__(self):
        w = _frozen(self.weight)
        b = _frozen(self.bias)
        if w.ndim != 2:
            raise ValueError(f"weight must be 2-D, got shape {w.shape}")
        if b.shape != (w.shape[0],):
            raise ValueError(f"bias shape {b.shape} does not match weight rows {w.shape[0]}")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def n_in(self) -> int:
        return self.weight.shape[1]

    @property
    def n_out(self) -> int:
        return self.weight.shape[0]


@dataclass(frozen=True)
class Network:
    layers: tuple[Layer, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("a network needs at least one layer")
        for i, (prev, nxt) in enumerate(zip(layers, layers[1:])):
            if prev.n_out != nxt.n_in:
                raise ValueError(
                    f"layer {i + 1} has {nxt.n_in} inputs but layer {i} has {prev.n_out} outputs"
                )
        for i, layer in enumerate(layers[:-1]):
            if not layer.relu:
                raise ValueError(f"interior layer {i} must use relu")
        last = layers[-1]
        if last.relu:
            raise ValueError("the output layer must be linear")
        if np.any(last.bias != 0.0):
            raise ValueError("the output layer must have zero bias")
        object.__setattr__(self, "layers", layers)

    @classmethod
    def from_arrays(cls, weights: Sequence, biases: Sequence | None = None) -> "Network":
        """Build from per-layer weights; all but the last layer get ReLU."""
        if biases is None:
            biases = [np.zeros(np.shape(w)[0]) for w in weights]
        n = len(weights)
        return cls(tuple(Layer(w, b, i < n - 1) for i, (w, b) in enumerate(zip(weights, biases))))

    @property
    def input_dim(self) -> int:
        return self.layers[0].n_in

    @property
    def output_dim(self) -> int:
        return self.layers[-1].n_out

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def width(self) -> int:
        return max(layer.n_out for layer in self.layers)

    @property
    def hidden_widths(self) -> list[int]:
        return [layer.n_out for layer in self.layers[:-1]]

    @property
    def n_params(self) -> int:
        return sum(layer.weight.size + layer.bias.size for layer in self.layers)

    def __call__(self, x):
        return evaluate(self, x)


def evaluate(net: Network, x) -> np.ndarray:
    """Forward pass. ``x`` is a vector of length input_dim or a batch (N, input_dim)."""
    h = np.asarray(x, dtype=np.float64)
    single = h.ndim <= 1
    if single:
        h = h.reshape(1, -1)
    if h.ndim != 2 or h.shape[1] != net.input_dim:
        raise ValueError(f"expected input of dimension {net.input_dim}, got shape {np.shape(x)}")
    for layer in net.layers:
        h = h @ layer.weight.T
        if layer.relu:
            h += layer.bias
            np.maximum(h, 0.0, out=h)
    return h[0] if single else h


def identity_network(dim: int) -> Network:
    """Depth-1 linear network computing x -> x."""
    return Network((Layer(np.eye(dim), np.zeros(dim), False),))


def stack(first: Network, second: Network) -> Network:
    """Network computing second(first(x)); the boundary linear layer is merged."""
    if first.output_dim != second.input_dim:
        raise ValueError(
            f"cannot stack: first has {first.output_dim} outputs, second expects {second.input_dim}"
        )
    head = second.layers[0]
    merged = Layer(head.weight @ first.layers[-1].weight, head.bias, head.relu)
    return Network(first.layers[:-1] + (merged,) + second.layers[1:])


def propagate_pad(net: Network, target_depth: int, *, nonnegative: bool = False) -> Network:
    """Extend ``net`` to exactly ``target_depth`` layers without changing its values.

    Each output v is carried as [v]+ - [-v]+ (two neurons per signal per layer).
    With ``nonnegative=True`` the caller promises v >= 0 and one neuron [v]+ is used.
    """
    if target_depth < net.depth:
        raise ValueError(f"target depth {target_depth} is below the network depth {net.depth}")
    extra = target_depth - net.depth
    if extra == 0:
        return net
    out = net.output_dim
    last = net.layers[-1]
    if nonnegative:
        lift = Layer(last.weight, np.zeros(out), True)
        carry = Layer(np.eye(out), np.zeros(out), True)
        final = Layer(np.eye(out), np.zeros(out), False)
    else:
        lift = Layer(np.vstack([last.weight, -last.weight]), np.zeros(2 * out), True)
        eye = np.eye(out)
        carry = Layer(np.block([[eye, -eye], [-eye, eye]]), np.zeros(2 * out), True)
        final = Layer(np.hstack([eye, -eye]), np.zeros(out), False)
    return Network(net.layers[:-1] + (lift,) + (carry,) * (extra - 1) + (final,))


def _block_diag(blocks: Sequence[np.ndarray]) -> np.ndarray:
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols))
    r = c = 0
    for b in blocks:
        out[r : r + b.shape[0], c : c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


def parallel(
    nets: Sequence[Network],
    slices: Sequence[Sequence[int]] | None = None,
    input_dim: int | None = None,
) -> Network:
    """Run networks side by side and concatenate their outputs.

    Without ``slices`` every network reads the whole (shared) input. With
    ``slices``, network k reads the coordinates ``slices[k]`` of an input of
    dimension ``input_dim`` (default: one past the largest index). Shorter
    networks are padded with identity-carry pairs to the common depth.
    """
    nets = list(nets)
    if not nets:
        raise ValueError("parallel needs at least one network")
    depth = max(n.depth for n in nets)
    nets = [propagate_pad(n, depth) for n in nets]

    if slices is None:
        dim = nets[0].input_dim
        if any(n.input_dim != dim for n in nets):
            raise ValueError("networks sharing an input must have the same input dimension")
        first_w = np.vstack([n.layers[0].weight for n in nets])
    else:
        if len(slices) != len(nets):
            raise ValueError("one slice per network is required")
        dim = input_dim if input_dim is not None else 1 + max(max(s) for s in slices if len(s))
        first_w = np.zeros((sum(n.layers[0].n_out for n in nets), dim))
        row = 0
        for n, sl in zip(nets, slices):
            if len(sl) != n.input_dim:
                raise ValueError(f"slice {list(sl)} does not match input dimension {n.input_dim}")
            w = n.layers[0].weight
            # accumulate so repeated indices in a slice still work
            for j, col in enumerate(sl):
                first_w[row : row + w.shape[0], col] += w[:, j]
            row += w.shape[0]

    layers = [Layer(first_w, np.concatenate([n.layers[0].bias for n in nets]), nets[0].layers[0].relu)]
    for i in range(1, depth):
        layers.append(
            Layer(
                _block_diag([n.layers[i].weight for n in nets]),
                np.concatenate([n.layers[i].bias for n in nets]),
                nets[0].layers[i].relu,
            )
        )
    return Network(tuple(layers))


def affine_pre(net: Network, A, b=None) -> Network:
    """Network computing net(A x + b), same depth."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    if A.shape[0] != net.input_dim:
        raise ValueError(f"A has {A.shape[0]} rows, network expects {net.input_dim} inputs")
    b = np.zeros(net.input_dim) if b is None else np.atleast_1d(np.asarray(b, dtype=np.float64))
    if b.shape != (net.input_dim,):
        raise ValueError(f"b has shape {b.shape}, expected ({net.input_dim},)")
    head = net.layers[0]
    new_bias = head.bias + head.weight @ b
    if not head.relu and np.any(new_bias != 0.0):
        raise ValueError("a depth-1 network cannot absorb a nonzero input offset")
    merged = Layer(head.weight @ A, new_bias, head.relu)
    return Network((merged,) + net.layers[1:])


def affine_post(net: Network, C, d=None) -> Network:
    """Network computing C net(x) + d, same depth.

    The output layer has no bias, so a nonzero ``d`` is produced by one extra
    constant neuron [1]+ in the last hidden layer.
    """
    C = np.atleast_2d(np.asarray(C, dtype=np.float64))
    if C.shape[1] != net.output_dim:
        raise ValueError(f"C has {C.shape[1]} columns, network has {net.output_dim} outputs")
    d = np.zeros(C.shape[0]) if d is None else np.atleast_1d(np.asarray(d, dtype=np.float64))
    if d.shape != (C.shape[0],):
        raise ValueError(f"d has shape {d.shape}, expected ({C.shape[0]},)")
    last = net.layers[-1]
    out_w = C @ last.weight
    if not np.any(d != 0.0):
        return Network(net.layers[:-1] + (Layer(out_w, np.zeros(C.shape[0]), False),))
    if net.depth < 2:
        raise ValueError("a depth-1 network cannot produce a constant offset")
    hidden = net.layers[-2]
    const = Layer(
        np.vstack([hidden.weight, np.zeros((1, hidden.n_in))]),
        np.append(hidden.bias, 1.0),
        True,
    )
    out = Layer(np.hstack([out_w, d[:, None]]), np.zeros(C.shape[0]), False)
    return Network(net.layers[:-2] + (const, out))


# --- text format -----------------------------------------------------------------

_HEADER = "relunet v1"


def dumps(net: Network) -> str:
    lines = [f"{_HEADER} input={net.input_dim} layers={net.depth}"]
    for i, layer in enumerate(net.layers):
        act = "relu" if layer.relu else "id"
        lines.append(f"layer {i} out={layer.n_out} act={act}")
        for w_row, b in zip(layer.weight, layer.bias):
            lines.append(" ".join(f"{v:.17g}" for v in (*w_row, b)))
    return "\n".join(lines) + "\n"


def _kv(token: str, key: str, lineno: int) -> str:
    prefix = key + "="
    if not token.startswith(prefix):
        raise NetworkFormatError(f"expected '{prefix}...', got '{token}'", lineno)
    return token[len(prefix) :]


def _int(text: str, lineno: int) -> int:
    try:
        value = int(text)
    except ValueError:
        raise NetworkFormatError(f"not an integer: '{text}'", lineno) from None
    if value < 1:
        raise NetworkFormatError(f"expected a positive integer, got {value}", lineno)
    return value


def loads(text: str) -> Network:
    lines = text.splitlines()
    if not lines:
        raise NetworkFormatError("empty file", 1)
    head = lines[0].split()
    if len(head) != 4 or " ".join(head[:2]) != _HEADER:
        raise NetworkFormatError(f"expected header '{_HEADER} input=<d> layers=<l>'", 1)
    n_in = _int(_kv(head[2], "input", 1), 1)
    n_layers = _int(_kv(head[3], "layers", 1), 1)

    pos = 1
    layers = []
    for i in range(n_layers):
        if pos >= len(lines):
            raise NetworkFormatError(f"unexpected end of file, layer {i} missing", pos + 1)
        tok = lines[pos].split()
        lineno = pos + 1
        if len(tok) != 4 or tok[0] != "layer" or tok[1] != str(i):
            raise NetworkFormatError(f"expected 'layer {i} out=<n> act=<relu|id>'", lineno)
        n_out = _int(_kv(tok[2], "out", lineno), lineno)
        act = _kv(tok[3], "act", lineno)
        if act not in ("relu", "id"):
            raise NetworkFormatError(f"unknown activation '{act}'", lineno)
        pos += 1
        rows = []
        for _ in range(n_out):
            if pos >= len(lines):
                raise NetworkFormatError(f"unexpected end of file inside layer {i}", pos + 1)
            try:
                row = [float(v) for v in lines[pos].split()]
            except ValueError:
                raise NetworkFormatError("non-numeric entry", pos + 1) from None
            if len(row) != n_in + 1:
                raise NetworkFormatError(
                    f"expected {n_in + 1} numbers (weights then bias), got {len(row)}", pos + 1
                )
            rows.append(row)
            pos += 1
        mat = np.array(rows)
        layers.append(Layer(mat[:, :-1], mat[:, -1], act == "relu"))
        n_in = n_out
    if any(line.strip() for line in lines[pos:]):
        raise NetworkFormatError("trailing content after last layer", pos + 1)
    try:
        return Network(tuple(layers))
    except ValueError as exc:
        raise NetworkFormatError(str(exc)) from None


def save(net: Network, path) -> None:
    """Write atomically: temp file in the target directory, then rename."""
    write_atomic(path, dumps(net))


def load(path) -> Network:
    with open(path, encoding="ascii") as fh:
        return loads(fh.read())
