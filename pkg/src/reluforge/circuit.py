"""Arithmetic circuits over [0,1]^d and their compilation into ReLU networks."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .constructors import MultiplierPlan, affine_adder, build_multiplier
from .network import Layer, Network, affine_pre, evaluate, parallel, stack

__all__ = [
    "CircuitError",
    "CircuitBoundError",
    "Node",
    "Circuit",
    "CompiledCircuit",
    "parse_circuit",
    "compile_circuit",
]

_UNDERFLOW = 2.0**-52


class CircuitError(ValueError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}" if lineno is not None else message)


class CircuitBoundError(CircuitError):
    """An intermediate value can leave [-M, M]."""


@dataclass(frozen=True)
class Node:
    name: str
    kind: str  # input | const | add | mul
    args: tuple = ()

    @property
    def operands(self) -> tuple[str, ...]:
        if self.kind == "add":
            return (self.args[1], self.args[3])
        if self.kind == "mul":
            return self.args
        return ()


@dataclass(frozen=True)
class Circuit:
    """DAG of input / const / weighted-add / mul nodes, listed in definition order."""

    M: float
    nodes: tuple[Node, ...]
    output: str

    def __post_init__(self):
        if not (self.M > 0 and math.isfinite(self.M)):
            raise CircuitError(f"bound M must be positive and finite, got {self.M}")
        seen: dict[str, Node] = {}
        for node in self.nodes:
            if node.name in seen:
                raise CircuitError(f"node {node.name} defined twice")
            for op in node.operands:
                if op not in seen:
                    raise CircuitError(f"node {node.name} uses {op} before it is defined")
            seen[node.name] = node
        if self.output not in seen:
            raise CircuitError(f"output node {self.output} is not defined")
        self._check_bounds()

    @property
    def by_name(self) -> dict[str, Node]:
        return {n.name: n for n in self.nodes}

    @property
    def input_dim(self) -> int:
        idx = [n.args[0] for n in self.nodes if n.kind == "input"]
        return 1 + max(idx) if idx else 0

    def live_nodes(self) -> list[Node]:
        """Nodes the output depends on, in definition order."""
        need = {self.output}
        for node in reversed(self.nodes):
            if node.name in need:
                need.update(node.operands)
        return [n for n in self.nodes if n.name in need]

    @property
    def op_count(self) -> int:
        return sum(1 for n in self.live_nodes() if n.kind in ("add", "mul"))

    def intervals(self) -> dict[str, tuple[float, float]]:
        """Interval enclosure of every node for inputs in [0, 1]^d."""
        box: dict[str, tuple[float, float]] = {}
        for n in self.nodes:
            if n.kind == "input":
                box[n.name] = (0.0, 1.0)
            elif n.kind == "const":
                box[n.name] = (n.args[0], n.args[0])
            elif n.kind == "add":
                alpha, lhs, beta, rhs = n.args
                lo = hi = 0.0
                for w, (a, b) in ((alpha, box[lhs]), (beta, box[rhs])):
                    lo += min(w * a, w * b)
                    hi += max(w * a, w * b)
                box[n.name] = (lo, hi)
            else:
                (a, b), (c, d) = box[n.args[0]], box[n.args[1]]
                p = (a * c, a * d, b * c, b * d)
                box[n.name] = (min(p), max(p))
        return box

    def _check_bounds(self) -> None:
        tol = 1e-12 * self.M
        box = self.intervals()
        for n in self.live_nodes():
            lo, hi = box[n.name]
            if lo < -self.M - tol or hi > self.M + tol:
                raise CircuitBoundError(
                    f"node {n.name} ranges over [{lo:.6g}, {hi:.6g}], outside [-{self.M:g}, {self.M:g}]"
                )

    def evaluate(self, X) -> np.ndarray:
        """Exact (float64) circuit semantics on rows of X."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] < self.input_dim:
            raise ValueError(f"circuit reads {self.input_dim} inputs, got {X.shape[1]}")
        vals: dict[str, np.ndarray] = {}
        for n in self.live_nodes():
            if n.kind == "input":
                vals[n.name] = X[:, n.args[0]]
            elif n.kind == "const":
                vals[n.name] = np.full(X.shape[0], n.args[0])
            elif n.kind == "add":
                alpha, lhs, beta, rhs = n.args
                vals[n.name] = alpha * vals[lhs] + beta * vals[rhs]
            else:
                vals[n.name] = vals[n.args[0]] * vals[n.args[1]]
        return vals[self.output]


_NODE_RE = re.compile(r"^(n\w+)\s*=\s*(\w+)\s*(.*)$")


def _num(tok: str, lineno: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise CircuitError(f"expected a number, got {tok!r}", lineno) from None
    if not math.isfinite(v):
        raise CircuitError(f"non-finite number {tok!r}", lineno)
    return v


def _ref(tok: str, lineno: int) -> str:
    if not re.fullmatch(r"n\w+", tok):
        raise CircuitError(f"expected a node reference like n3, got {tok!r}", lineno)
    return tok


def parse_circuit(text: str) -> Circuit:
    """Parse the line format ``bound M=<v>`` / ``n<id> = ...`` / ``output n<id>``."""
    M = None
    nodes: list[Node] = []
    output = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if output is not None:
            raise CircuitError("nothing may follow the output line", lineno)
        if M is None:
            m = re.fullmatch(r"bound\s+M\s*=\s*(\S+)", line)
            if not m:
                raise CircuitError("first line must be 'bound M=<value>'", lineno)
            M = _num(m.group(1), lineno)
            continue
        if line.startswith("output"):
            parts = line.split()
            if len(parts) != 2:
                raise CircuitError("expected 'output n<id>'", lineno)
            output = _ref(parts[1], lineno)
            continue
        m = _NODE_RE.match(line)
        if not m:
            raise CircuitError(f"cannot parse {line!r}", lineno)
        name, kind, rest = m.group(1), m.group(2), m.group(3).split()
        if kind == "input":
            if len(rest) != 1 or not rest[0].isdigit():
                raise CircuitError("expected 'input <index>'", lineno)
            args: tuple = (int(rest[0]),)
        elif kind == "const":
            if len(rest) != 1:
                raise CircuitError("expected 'const <value>'", lineno)
            args = (_num(rest[0], lineno),)
        elif kind == "add":
            if len(rest) != 4:
                raise CircuitError("expected 'add <alpha> n<a> <beta> n<b>'", lineno)
            args = (_num(rest[0], lineno), _ref(rest[1], lineno), _num(rest[2], lineno), _ref(rest[3], lineno))
        elif kind == "mul":
            if len(rest) != 2:
                raise CircuitError("expected 'mul n<a> n<b>'", lineno)
            args = (_ref(rest[0], lineno), _ref(rest[1], lineno))
        else:
            raise CircuitError(f"unknown node kind {kind!r}", lineno)
        node = Node(name, kind, args)
        defined = {n.name for n in nodes}
        if name in defined:
            raise CircuitError(f"node {name} defined twice", lineno)
        for op in node.operands:
            if op not in defined:
                raise CircuitError(f"node {name} uses {op} before it is defined", lineno)
        nodes.append(node)
    if M is None:
        raise CircuitError("empty circuit file")
    if output is None:
        raise CircuitError("missing 'output n<id>' line")
    return Circuit(M, tuple(nodes), output)


@dataclass(frozen=True)
class Stage:
    node: str
    kind: str
    prefix: Network | None  # network whose outputs feed this stage (None: raw inputs)
    operand: tuple[str, int | None, float]  # x operand of a mul: (name, live index, constant)
    plan: MultiplierPlan | None


@dataclass(frozen=True)
class CompiledCircuit:
    network: Network
    circuit: Circuit
    eps: float
    delta: float
    predicted_error: float  # propagated worst case outside the bad set
    growth_budget: float  # (3M)^(t-1) delta
    node_errors: dict
    stages: tuple[Stage, ...]

    def bad_mask(self, X) -> np.ndarray:
        """Inputs on which some multiplier stage sees its x operand in its bad set."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        bad = np.zeros(X.shape[0], dtype=bool)
        for st in self.stages:
            if st.plan is None:
                continue
            _, idx, const = st.operand
            if idx is None:
                xv = np.full(X.shape[0], const)
            else:
                h = X if st.prefix is None else evaluate(st.prefix, X)
                xv = h[:, idx]
            bad |= st.plan.bad_mask(xv)
        return bad


def _selector(n_live: int, slots: list) -> tuple[np.ndarray, np.ndarray]:
    """Rows picking live values (index) or constants (None, value)."""
    A = np.zeros((len(slots), n_live))
    b = np.zeros(len(slots))
    for r, (idx, const) in enumerate(slots):
        if idx is None:
            b[r] = const
        else:
            A[r, idx] = 1.0
    return A, b


def _propagate(circuit: Circuit, delta: float) -> tuple[dict, dict]:
    err: dict[str, float] = {}
    margin: dict[str, float] = {}
    M = circuit.M
    for n in circuit.live_nodes():
        if n.kind in ("input", "const"):
            err[n.name] = 0.0
        elif n.kind == "add":
            alpha, lhs, beta, rhs = n.args
            err[n.name] = abs(alpha) * err[lhs] + abs(beta) * err[rhs]
        else:
            el, er = err[n.args[0]], err[n.args[1]]
            margin[n.name] = max(el, er)
            err[n.name] = M * (el + er) + el * er + delta
    return err, margin


def compile_circuit(circuit: Circuit, eps: float, *, max_bits: int | None = None) -> CompiledCircuit:
    """ReLU network within eps of the circuit on [0,1]^d, off the multiplier bad sets.

    The per-multiplication budget starts at delta = (3M)^(1-t) eps and is halved
    until the propagated worst case fits in eps.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    M = circuit.M
    live = circuit.live_nodes()
    t = circuit.op_count
    d = circuit.input_dim
    delta = min((3.0 * M) ** (1 - t) * eps, eps) if t else eps
    while True:
        err, margin = _propagate(circuit, delta)
        if err[circuit.output] <= eps:
            break
        delta /= 2.0
        if delta < _UNDERFLOW * M:
            raise ValueError(f"per-operation budget underflows (delta < 2^-52 M) for eps={eps}")
    if delta < _UNDERFLOW * M:
        raise ValueError(f"per-operation budget underflows (delta < 2^-52 M) for eps={eps}")

    by_name = circuit.by_name
    consts = {n.name: n.args[0] for n in live if n.kind == "const"}
    last_use: dict[str, int] = {}
    ops = [n for n in live if n.kind in ("add", "mul")]
    for k, n in enumerate(ops):
        for o in n.operands:
            last_use[o] = k
    last_use[circuit.output] = len(ops)

    out_node = by_name[circuit.output]
    if not ops:
        if out_node.kind == "input":
            w = np.zeros((1, max(d, 1)))
            w[0, out_node.args[0]] = 1.0
            net = Network((Layer(w, np.zeros(1), False),))
        else:
            net = Network.from_arrays([np.zeros((1, max(d, 1))), [[out_node.args[0]]]], [[1.0], [0.0]])
        return CompiledCircuit(net, circuit, eps, delta, 0.0, 0.0, {circuit.output: 0.0}, ())

    # live values: inputs first, in index order
    index = {n.name: n.args[0] for n in live if n.kind == "input"}
    n_live = d
    net: Network | None = None
    stages = []
    for k, n in enumerate(ops):
        slots = [(index.get(o), consts.get(o, 0.0)) for o in n.operands]
        A, b = _selector(n_live, slots)
        plan = None
        if n.kind == "add":
            op_net = affine_adder(n.args[0], n.args[2])
        else:
            kw = {} if max_bits is None else {"max_bits": max_bits}
            op_net, plan = build_multiplier(M + margin[n.name], delta, **kw)
        parts = [affine_pre(op_net, A, b)]
        carried = [name for name, j in sorted(index.items(), key=lambda kv: kv[1]) if last_use.get(name, -1) > k]
        for name in carried:
            w = np.zeros((1, n_live))
            w[0, index[name]] = 1.0
            parts.append(Network((Layer(w, np.zeros(1), False),)))
        stage = parallel(parts)
        x_name = n.operands[0]
        stages.append(Stage(n.name, n.kind, net, (x_name, index.get(x_name), consts.get(x_name, 0.0)), plan))
        net = stage if net is None else stack(net, stage)
        index = {n.name: 0}
        index.update({name: j + 1 for j, name in enumerate(carried)})
        n_live = 1 + len(carried)

    assert index == {circuit.output: 0}, index
    growth = (3.0 * M) ** (t - 1) * delta
    return CompiledCircuit(net, circuit, eps, delta, err[circuit.output], growth, err, tuple(stages))
