"""Brute-force references for small instances.

Both checks expand the tree with :meth:`StackDecoder.children`, so metrics
and parity tests are bit-identical to the decoder's and only the search
strategy differs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exponents import e_si, f_si
from .decoder import DecoderConfig, Node, StackDecoder, encode_jsc, encode_si
from .models import Channel, JointSource, sample_channel_many
from .treecode import TreeCode

MAX_LEAVES = 1 << 24


class InstanceTooLarge(ValueError):
    pass


@dataclass
class Transcript:
    """Everything the decoder saw in one trial, plus the true source path."""

    source: JointSource
    code: TreeCode
    bias: float
    u: list[int]
    v: list[int]
    received: list
    channel: Channel | None = None

    @classmethod
    def simulate(cls, source, code, bias, u, v, channel=None, rng=None) -> "Transcript":
        u = [int(s) for s in u]
        v = [int(s) for s in v]
        if code.mode == "si":
            received = encode_si(code, u)
        else:
            xs = np.array(encode_jsc(code, u), dtype=np.int64).reshape(len(u), code.lam)
            received = [tuple(r) for r in sample_channel_many(channel, xs, rng).tolist()]
        return cls(source, code, bias, u, v, received, channel)

    def loaded_decoder(self, horizon: int) -> StackDecoder:
        dec = StackDecoder(self.source, self.code, DecoderConfig(bias=self.bias, mode=self.code.mode), self.channel)
        for t in range(horizon):
            dec.load(self.received[t], self.v[t])
        return dec


def _check_size(n_u: int, n: int) -> None:
    if n_u**n > MAX_LEAVES:
        raise InstanceTooLarge(f"|U|^n = {n_u}^{n} exceeds {MAX_LEAVES}")


def _leaves(dec: StackDecoder, root: Node, depth: int):
    """All surviving depth-``depth`` descendants of ``root``, in lexicographic path order."""
    stack = [root]
    while stack:
        node = stack.pop()
        if node.depth == depth:
            yield node
            continue
        stack.extend(reversed(dec.children(node)))


def best_path_exhaustive(transcript: Transcript, horizon: int) -> tuple[list[int], float]:
    """Highest-metric surviving length-``horizon`` path; ties go to the lexicographically smaller path."""
    _check_size(transcript.source.n_u, horizon)
    dec = transcript.loaded_decoder(horizon)
    best = None
    for leaf in _leaves(dec, dec.root, horizon):
        if best is None or leaf.metric > best.metric:
            best = leaf
    if best is None:
        raise ValueError("no path survives parity filtering")
    return best.path(), best.metric


def path_metrics(transcript: Transcript, horizon: int) -> list[float]:
    """Cumulative metric of the true path at depths 1..horizon (-inf once impossible)."""
    dec = transcript.loaded_decoder(horizon)
    node = dec.root
    out = []
    for t in range(horizon):
        nxt = [c for c in dec.children(node) if c.sym == transcript.u[t]]
        if not nxt:
            out.extend([-math.inf] * (horizon - t))
            break
        node = nxt[0]
        out.append(node.metric)
    return out


def depth_d_failure_check(transcript: Transcript, d: int) -> bool:
    """Whether some path with a wrong first symbol survives to depth d with
    metric at least the smallest true-path metric over depths 1..d."""
    _check_size(transcript.source.n_u, d)
    threshold = min(path_metrics(transcript, d))
    dec = transcript.loaded_decoder(d)
    u1 = transcript.u[0]
    for first in dec.children(dec.root):
        if first.sym == u1:
            continue
        for leaf in _leaves(dec, first, d):
            if leaf.metric >= threshold:
                return True
    return False


def failure_union_bound(source: JointSource, rate: int, bias: float, d: int, rho: float) -> float:
    """Union bound on P(F_d) at a fixed rho, valid for any bias and integer rate."""
    if rho == 0:
        return float(d)
    e, f = e_si(source, rho), f_si(source, rho)
    ks = np.arange(1, d + 1)
    expo = -d * rho * rate + (d - ks) * rho / (1 + rho) * bias + ks * e + (d - ks) * f
    return float(np.sum(np.exp2(expo)))


def failure_bound(source: JointSource, rate: int, bias: float, d: int, grid: Sequence[float] | None = None) -> float:
    grid = np.linspace(0.0, 1.0, 201) if grid is None else grid
    return min(failure_union_bound(source, rate, bias, d, float(r)) for r in grid)
