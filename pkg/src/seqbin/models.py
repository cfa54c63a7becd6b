"""Finite-alphabet probability models: joint IID source and DMC."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ATOL = 1e-12


class ModelError(ValueError):
    """Raised when a pmf or transition matrix is not a valid distribution."""


def _as_matrix(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 2 or arr.size == 0:
        raise ModelError(f"{name} must be a non-empty 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ModelError(f"{name} has non-finite entries")
    if np.any(arr < 0):
        r, c = np.argwhere(arr < 0)[0]
        raise ModelError(f"{name} has a negative entry at row {r}, column {c}")
    return arr


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class JointSource:
    """Joint pmf Q(u, v) indexed ``pmf[u, v]``.

    Marginals and the conditional Q(u|v) are derived once at construction.
    """

    pmf: np.ndarray
    q_u: np.ndarray = field(init=False, repr=False)
    q_v: np.ndarray = field(init=False, repr=False)
    cond: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pmf = _as_matrix(self.pmf, "pmf")
        total = pmf.sum()
        if abs(total - 1.0) > ATOL:
            raise ModelError(f"pmf entries sum to {float(total)!r}, expected 1")
        q_v = pmf.sum(axis=0)
        zero_cols = np.flatnonzero(q_v <= 0)
        if zero_cols.size:
            raise ModelError(f"side-information marginal Q(v) is zero for column {zero_cols[0]}")
        cond = pmf / q_v
        object.__setattr__(self, "pmf", _freeze(pmf))
        object.__setattr__(self, "q_u", _freeze(pmf.sum(axis=1)))
        object.__setattr__(self, "q_v", _freeze(q_v))
        object.__setattr__(self, "cond", _freeze(cond))

    @classmethod
    def from_conditional(cls, q_v, cond) -> "JointSource":
        """Build from a side-information marginal and columns Q(u|v)."""
        q_v = np.asarray(q_v, dtype=float)
        cond = np.asarray(cond, dtype=float)
        return cls(cond * q_v[None, :])

    @classmethod
    def binary_bsc(cls, eps: float) -> "JointSource":
        """Uniform binary U with V = U passed through a BSC(eps)."""
        return cls(np.array([[0.5 * (1 - eps), 0.5 * eps], [0.5 * eps, 0.5 * (1 - eps)]]))

    @classmethod
    def independent(cls, q_u, q_v=(1.0,)) -> "JointSource":
        return cls(np.outer(np.asarray(q_u, float), np.asarray(q_v, float)))

    @property
    def n_u(self) -> int:
        return self.pmf.shape[0]

    @property
    def n_v(self) -> int:
        return self.pmf.shape[1]

    def log2_cond(self) -> np.ndarray:
        """log2 Q(u|v), with -inf where Q(u|v) = 0."""
        with np.errstate(divide="ignore"):
            return np.log2(self.cond)

    def to_dict(self) -> dict:
        return {"pmf": self.pmf.tolist()}


@dataclass(frozen=True, eq=False)
class Channel:
    """DMC ``transition[x, y] = W(y|x)`` with input distribution beta(x)."""

    transition: np.ndarray
    input_dist: np.ndarray
    output_dist: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        w = _as_matrix(self.transition, "transition")
        rows = w.sum(axis=1)
        bad = np.flatnonzero(np.abs(rows - 1.0) > ATOL)
        if bad.size:
            raise ModelError(f"transition row {bad[0]} sums to {float(rows[bad[0]])!r}, expected 1")
        beta = np.array(self.input_dist, dtype=float)
        if beta.shape != (w.shape[0],):
            raise ModelError(f"input_dist has shape {beta.shape}, expected ({w.shape[0]},)")
        if np.any(beta < 0) or not np.all(np.isfinite(beta)):
            raise ModelError("input_dist has negative or non-finite entries")
        if abs(beta.sum() - 1.0) > ATOL:
            raise ModelError(f"input_dist sums to {float(beta.sum())!r}, expected 1")
        p_y = beta @ w
        if abs(p_y.sum() - 1.0) > ATOL:
            raise ModelError("output marginal does not sum to 1")
        object.__setattr__(self, "transition", _freeze(w))
        object.__setattr__(self, "input_dist", _freeze(beta))
        object.__setattr__(self, "output_dist", _freeze(p_y))

    @classmethod
    def bsc(cls, eps: float, beta=(0.5, 0.5)) -> "Channel":
        return cls(np.array([[1 - eps, eps], [eps, 1 - eps]]), np.asarray(beta, float))

    @classmethod
    def noiseless(cls, size: int = 2) -> "Channel":
        return cls(np.eye(size), np.full(size, 1.0 / size))

    @property
    def n_x(self) -> int:
        return self.transition.shape[0]

    @property
    def n_y(self) -> int:
        return self.transition.shape[1]

    def log2_ratio(self) -> np.ndarray:
        """log2 W(y|x)/P(y) indexed [x, y]; -inf where W(y|x) = 0.

        Outputs with P(y) = 0 can never be received; their column is -inf.
        """
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.log2(self.transition) - np.log2(self.output_dist)[None, :]
        out[:, self.output_dist <= 0] = -np.inf
        return out

    def to_dict(self) -> dict:
        return {"W": self.transition.tolist(), "beta": self.input_dist.tolist()}


def conditional_entropy(source: JointSource) -> float:
    """H(U|V) in bits."""
    pmf = source.pmf
    mask = pmf > 0
    return float(-np.sum(pmf[mask] * np.log2(source.cond[mask])))


def mutual_information(channel: Channel) -> float:
    """I(X;Y) in bits under the channel's input distribution."""
    joint = channel.input_dist[:, None] * channel.transition
    mask = joint > 0
    return float(np.sum(joint[mask] * channel.log2_ratio()[mask]))


def sample_pair(source: JointSource, rng: np.random.Generator) -> tuple[int, int]:
    """Draw one (u, v) index pair from Q(u, v)."""
    flat = int(rng.choice(source.pmf.size, p=source.pmf.ravel()))
    return divmod(flat, source.n_v)


def sample_pairs(source: JointSource, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``sample_pair``: returns (u, v) index arrays of length n."""
    flat = rng.choice(source.pmf.size, size=n, p=source.pmf.ravel())
    return np.divmod(flat, source.n_v)


def sample_channel(channel: Channel, x: int, rng: np.random.Generator) -> int:
    return int(rng.choice(channel.n_y, p=channel.transition[x]))


def sample_channel_many(channel: Channel, xs, rng: np.random.Generator) -> np.ndarray:
    """Pass a sequence of inputs through the channel; one uniform per use."""
    xs = np.asarray(xs, dtype=np.int64)
    cdf = np.cumsum(channel.transition, axis=1)
    draws = rng.random(xs.shape)
    ys = (draws[..., None] >= cdf[xs]).sum(axis=-1)
    return np.minimum(ys, channel.n_y - 1)
