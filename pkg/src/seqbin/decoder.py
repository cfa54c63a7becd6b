"""Biased stack-algorithm sequential decoder (SI and JSC modes).

The stack holds tree nodes; each node keeps a parent pointer so a full path
is only materialized on request.  Ordering is by metric, then depth (deeper
first), then lexicographically smaller path.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .models import Channel, JointSource, sample_channel_many
from .treecode import TreeCode

NEG_INF = -math.inf


class CapExceeded(RuntimeError):
    """A per-step pop cap or the stack-size cap was hit."""


class Node:
    __slots__ = ("parent", "sym", "depth", "metric", "key", "aux")

    def __init__(self, parent, sym, depth, metric, key):
        self.parent = parent
        self.sym = sym
        self.depth = depth
        self.metric = metric
        self.key = key
        # scratch slot for measurement code (e.g. first-error depth); never read here
        self.aux = None

    def path(self) -> list[int]:
        out = []
        node = self
        while node.parent is not None:
            out.append(node.sym)
            node = node.parent
        out.reverse()
        return out

    def ancestor(self, depth: int) -> "Node":
        node = self
        while node.depth > depth:
            node = node.parent
        return node

    def __lt__(self, other: "Node") -> bool:
        # only reached on (metric, depth) ties: lexicographic order of equal-length paths
        a, b = self, other
        while a.depth > b.depth:
            a = a.parent
        while b.depth > a.depth:
            b = b.parent
        if a is b:
            return self.depth < other.depth
        while a.parent is not b.parent:
            a, b = a.parent, b.parent
        return a.sym < b.sym

    def __repr__(self):
        return f"Node(depth={self.depth}, metric={self.metric:.4f}, path={self.path()})"


StackEntry = Node


@dataclass
class DecoderConfig:
    bias: float
    mode: str = "si"
    max_pops_per_step: int = 10**6
    max_stack: int = 10**7

    def __post_init__(self):
        if self.mode not in ("si", "jsc"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.max_pops_per_step < 1 or self.max_stack < 1:
            raise ValueError("caps must be positive")


@dataclass
class ComputationLedger:
    pops_per_step: list[int] = field(default_factory=list)
    visits_total: int = 0
    cap_hit: bool = False


@dataclass
class DecodeResult:
    estimates: list[Node]
    ledger: ComputationLedger
    status: str  # "completed" | "cap-aborted"

    def estimate(self, m: int) -> list[int]:
        """The path emitted at time m (1-based)."""
        return self.estimates[m - 1].path()


def branch_metric_si(u: int, v: int, source: JointSource, bias: float) -> float:
    q = float(source.cond[u, v])
    if q <= 0:
        return NEG_INF
    return bias + math.log2(q)


def channel_term(x: int, y: int, channel: Channel) -> float:
    """log2 W(y|x)/P(y), or -inf when W(y|x) = 0."""
    w = float(channel.transition[x, y])
    if w <= 0:
        return NEG_INF
    return math.log2(w) - math.log2(float(channel.output_dist[y]))


def branch_metric_jsc(u, v, xs, ys, source: JointSource, channel: Channel, bias: float) -> float:
    total = branch_metric_si(u, v, source, bias)
    for x, y in zip(xs, ys):
        total += channel_term(x, y, channel)
    return total


class StackDecoder:
    """Streaming stack decoder.

    Call :meth:`step` once per time t with that step's received data; it
    returns the node emitted as the depth-t estimate.
    """

    def __init__(
        self,
        source: JointSource,
        code: TreeCode,
        config: DecoderConfig,
        channel: Channel | None = None,
    ):
        if config.mode != code.mode:
            raise ValueError(f"decoder mode {config.mode!r} does not match code mode {code.mode!r}")
        if config.mode == "jsc" and channel is None:
            raise ValueError("JSC mode needs a channel")
        self.source = source
        self.code = code
        self.config = config
        self.channel = channel
        self.ledger = ComputationLedger()
        self.t = 0
        # sym_metric[v][u] = G + log2 Q(u|v); ch_metric[x][y] = log2 W(y|x)/P(y)
        self._sym_metric = [
            [branch_metric_si(u, v, source, config.bias) for u in range(source.n_u)] for v in range(source.n_v)
        ]
        if channel is not None:
            self._ch_metric = [[channel_term(x, y, channel) for y in range(channel.n_y)] for x in range(channel.n_x)]
        self._side: list[int] = []
        self._recv: list = []
        self._nbits: list[int] = []
        self.root = Node(None, -1, 0, 0.0, code.root_key)
        self._heap = [(-0.0, 0, self.root)]

    @property
    def stack_size(self) -> int:
        return len(self._heap)

    def top(self) -> Node:
        return self._heap[0][2]

    def stack_nodes(self) -> list[Node]:
        return [entry[2] for entry in self._heap]

    def children(self, node: Node) -> list[Node]:
        """Score and filter the |U| extensions of ``node``.

        Children with impossible symbols or, in SI mode, mismatching parities
        are dropped.  Data for depth ``node.depth + 1`` must already be loaded.
        """
        code = self.code
        depth = node.depth + 1
        v = self._side[depth - 1]
        sym_metric = self._sym_metric[v]
        out = []
        if self.config.mode == "si":
            target = self._recv[depth - 1]
            check = self._nbits[depth - 1] > 0
            for u, bm in enumerate(sym_metric):
                if bm == NEG_INF:
                    continue
                key = code.child_key(node.key, u)
                if check and code.branch_parity(key, depth) != target:
                    continue
                out.append(Node(node, u, depth, node.metric + bm, key))
        else:
            ys = self._recv[depth - 1]
            chm = self._ch_metric
            for u, bm in enumerate(sym_metric):
                if bm == NEG_INF:
                    continue
                key = code.child_key(node.key, u)
                xs = code.branch_inputs(key, depth)
                for x, y in zip(xs, ys):
                    bm += chm[x][y]
                if bm == NEG_INF:
                    continue
                out.append(Node(node, u, depth, node.metric + bm, key))
        return out

    def load(self, received, side: int) -> None:
        """Append one time step of received data without searching.

        ``received`` is the packed parity segment (SI) or the tuple of lam
        channel outputs (JSC); ``side`` is the side-information symbol.
        """
        self.t += 1
        self._side.append(int(side))
        if self.config.mode == "si":
            self._nbits.append(self.code.bits_at(self.t))
            self._recv.append(int(received))
        else:
            self._recv.append(tuple(int(y) for y in received))

    def step(self, received, side: int) -> Node:
        """Load time t's data, then search until the top of the stack has depth t."""
        self.load(received, side)
        t = self.t
        heap = self._heap
        n_u = self.source.n_u
        cap = self.config.max_pops_per_step
        max_stack = self.config.max_stack
        pops = 0
        while heap and heap[0][2].depth < t:
            node = heapq.heappop(heap)[2]
            pops += 1
            self.ledger.visits_total += n_u
            for child in self.children(node):
                heapq.heappush(heap, (-child.metric, -child.depth, child))
            if pops >= cap or len(heap) > max_stack:
                self.ledger.pops_per_step.append(pops)
                self.ledger.cap_hit = True
                raise CapExceeded(f"cap hit at t={t} after {pops} pops, stack size {len(heap)}")
        self.ledger.pops_per_step.append(pops)
        if not heap:
            self.ledger.cap_hit = True
            raise CapExceeded(f"stack emptied at t={t}: no path is consistent with the received data")
        return heap[0][2]


def encode_si(code: TreeCode, u: Sequence[int]) -> list[int]:
    """Packed parity segments for times 1..len(u)."""
    key = code.root_key
    out = []
    for t, s in enumerate(u, start=1):
        key = code.child_key(key, int(s))
        out.append(code.branch_parity(key, t))
    return out


def encode_jsc(code: TreeCode, u: Sequence[int]) -> list[tuple[int, ...]]:
    """Channel-input blocks for times 1..len(u)."""
    key = code.root_key
    out = []
    for t, s in enumerate(u, start=1):
        key = code.child_key(key, int(s))
        out.append(code.branch_inputs(key, t))
    return out


def run(
    source: JointSource,
    u: Sequence[int],
    v: Sequence[int],
    code: TreeCode,
    config: DecoderConfig,
    channel: Channel | None = None,
    rng: np.random.Generator | None = None,
    on_emit: Callable[[int, Node], None] | None = None,
) -> DecodeResult:
    """Encode ``u`` with ``code`` and decode it against side information ``v``.

    In JSC mode the encoder's channel inputs pass through ``channel`` using
    ``rng``.  ``on_emit(t, node)`` is called with every emitted estimate.
    """
    if len(u) != len(v):
        raise ValueError("source and side-information streams differ in length")
    if config.mode == "si":
        received = encode_si(code, u)
    else:
        if channel is None or rng is None:
            raise ValueError("JSC mode needs a channel and an rng")
        xs = np.array(encode_jsc(code, u), dtype=np.int64).reshape(len(u), code.lam)
        received = [tuple(row) for row in sample_channel_many(channel, xs, rng).tolist()]
    dec = StackDecoder(source, code, config, channel)
    estimates = []
    status = "completed"
    for t in range(1, len(u) + 1):
        try:
            node = dec.step(received[t - 1], v[t - 1])
        except CapExceeded:
            status = "cap-aborted"
            break
        estimates.append(node)
        if on_emit is not None:
            on_emit(t, node)
    return DecodeResult(estimates, dec.ledger, status)
