"""Gallager-style source/channel functions, delay exponents and bias ranges.

All logs are base 2.  Source functions take a :class:`JointSource`; the
point-to-point variants take a plain marginal pmf over U.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .models import Channel, JointSource, conditional_entropy

UNBOUNDED = math.inf
"""Marker for caps and roots that are unbounded (e.g. division by rho = 0)."""

GRID_STEP = 1e-3
GOLDEN_TOL = 1e-9
PARETO_GAMMA_MAX = 10.0

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ExponentReport:
    rho_star: float
    exponent: float
    feasible: bool


@dataclass(frozen=True)
class BiasInterval:
    lower: float
    upper: float
    feasible: bool  # the rate/moment condition (gamma R > E_si(gamma), or its JSC analogue)

    @property
    def nonempty(self) -> bool:
        return self.lower < self.upper

    def contains(self, g: float) -> bool:
        return self.lower < g < self.upper


# -- source functions ------------------------------------------------------


def _source_inner(source: JointSource, rho: float) -> np.ndarray:
    """sum_u Q(u|v)^(1/(1+rho)) for every v."""
    return np.sum(source.cond ** (1.0 / (1.0 + rho)), axis=0)


def _source_fn(source: JointSource, rho: float, power: float) -> float:
    inner = _source_inner(source, rho)
    return float(np.log2(np.dot(source.q_v, inner**power)))


def e_si(source: JointSource, rho: float) -> float:
    return _source_fn(source, rho, 1.0 + rho)


def f_si(source: JointSource, rho: float) -> float:
    return _source_fn(source, rho, rho)


def g_si(source: JointSource, rho: float) -> float:
    return _source_fn(source, rho, 1.0)


def _marginal_sum(marginal, rho: float) -> float:
    q = np.asarray(marginal, dtype=float)
    return float(np.log2(np.sum(q ** (1.0 / (1.0 + rho)))))


def e_s(marginal, rho: float) -> float:
    return (1.0 + rho) * _marginal_sum(marginal, rho)


def f_s(marginal, rho: float) -> float:
    return rho * _marginal_sum(marginal, rho)


def g_s(marginal, rho: float) -> float:
    return _marginal_sum(marginal, rho)


# -- channel functions -----------------------------------------------------


def _channel_inner(channel: Channel, rho: float) -> tuple[np.ndarray, np.ndarray]:
    """(P(y), sum_x beta(x) (W(y|x)/P(y))^(1/(1+rho))) over outputs with P(y) > 0."""
    p = channel.output_dist
    live = p > 0
    ratio = channel.transition[:, live] / p[live]
    inner = channel.input_dist @ ratio ** (1.0 / (1.0 + rho))
    return p[live], inner


def _channel_fn(channel: Channel, rho: float, power: float) -> float:
    p, inner = _channel_inner(channel, rho)
    return float(-np.log2(np.dot(p, inner**power)))


def e0(channel: Channel, rho: float) -> float:
    return _channel_fn(channel, rho, 1.0 + rho)


def f_ch(channel: Channel, rho: float) -> float:
    return _channel_fn(channel, rho, rho)


def g_ch(channel: Channel, rho: float) -> float:
    return _channel_fn(channel, rho, 1.0)


# -- optimization ----------------------------------------------------------


def golden_section_max(fn: Callable[[float], float], lo: float, hi: float, tol: float = GOLDEN_TOL) -> float:
    """Argmax of a unimodal ``fn`` on [lo, hi], to bracket width ``tol``."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def maximize_on_unit_interval(fn: Callable[[float], float], step: float = GRID_STEP) -> tuple[float, float]:
    """Coarse grid over [0, 1] followed by golden-section refinement around the best cell."""
    n = int(round(1.0 / step))
    grid = np.linspace(0.0, 1.0, n + 1)
    values = np.array([fn(float(r)) for r in grid])
    i = int(np.argmax(values))
    lo = float(grid[max(i - 1, 0)])
    hi = float(grid[min(i + 1, n)])
    r = golden_section_max(fn, lo, hi)
    best_r, best_v = float(grid[i]), float(values[i])
    v = fn(r)
    if v > best_v:
        best_r, best_v = r, v
    return best_r, best_v


def _report(fn: Callable[[float], float]) -> ExponentReport:
    rho, value = maximize_on_unit_interval(fn)
    value = max(value, 0.0)
    if value == 0.0:
        rho = 0.0
    return ExponentReport(rho_star=rho, exponent=value, feasible=value > 0.0)


def random_coding_exponent_si(source: JointSource, rate: float) -> ExponentReport:
    """sup over rho in [0, 1] of rho R - E_si(rho)."""
    if rate < 0:
        raise ValueError("rate must be non-negative")
    return _report(lambda r: r * rate - e_si(source, r))


def random_coding_exponent_jsc(source: JointSource, channel: Channel, lam: int) -> ExponentReport:
    """sup over rho in [0, 1] of lam E0(rho) - E_si(rho)."""
    _check_lambda(lam)
    return _report(lambda r: lam * e0(channel, r) - e_si(source, r))


# -- bias conditions -------------------------------------------------------


def _check_lambda(lam) -> None:
    if int(lam) != lam or lam < 1:
        raise ValueError(f"lambda must be a positive integer, got {lam!r}")


def _check_gamma(gamma: float) -> None:
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma!r}")


def bias_cap_error_si(source: JointSource, rho: float) -> float:
    """Largest bias for which the error-exponent guarantee at this rho applies."""
    if rho == 0:
        return UNBOUNDED
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must lie in (0, 1], got {rho!r}")
    return (1.0 + rho) / rho * (e_si(source, rho) - f_si(source, rho))


def bias_cap_error_jsc(source: JointSource, channel: Channel, lam: int, rho: float) -> float:
    _check_lambda(lam)
    if rho == 0:
        return UNBOUNDED
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must lie in (0, 1], got {rho!r}")
    src = e_si(source, rho) - f_si(source, rho)
    ch = lam * (f_ch(channel, rho) - e0(channel, rho))
    return (1.0 + rho) / rho * (src + ch)


def bias_range_comp_si(source: JointSource, rate: float, gamma: float) -> BiasInterval:
    """Open bias interval giving a finite gamma-th moment of computation."""
    _check_gamma(gamma)
    k = (1.0 + gamma) / gamma
    return BiasInterval(
        lower=k * g_si(source, gamma),
        upper=k * (gamma * rate - f_si(source, gamma)),
        feasible=gamma * rate > e_si(source, gamma),
    )


def bias_range_comp_jsc(source: JointSource, channel: Channel, lam: int, gamma: float) -> BiasInterval:
    _check_gamma(gamma)
    _check_lambda(lam)
    k = (1.0 + gamma) / gamma
    return BiasInterval(
        lower=k * (g_si(source, gamma) - lam * g_ch(channel, gamma)),
        upper=k * (lam * f_ch(channel, gamma) - f_si(source, gamma)),
        feasible=lam * e0(channel, gamma) > e_si(source, gamma),
    )


def default_bias(source: JointSource, gamma: float, channel: Channel | None = None, lam: int | None = None) -> float:
    """Bias that meets both the error cap at rho = gamma and, when feasible, the computation interval."""
    _check_gamma(gamma)
    if channel is None:
        return bias_cap_error_si(source, gamma)
    return bias_cap_error_jsc(source, channel, lam, gamma)


def pareto_root(source: JointSource, rate: float, gamma_max: float = PARETO_GAMMA_MAX, tol: float = 1e-13) -> float:
    """Smallest positive gamma with gamma R = E_si(gamma); UNBOUNDED if none on (0, gamma_max]."""
    h_entropy = conditional_entropy(source)
    if rate <= h_entropy:
        raise ValueError(f"rate {rate} does not exceed H(U|V) = {h_entropy:.6f}: no positive root")

    def h(g: float) -> float:
        return g * rate - e_si(source, g)

    # h is concave with h(0) = 0 and h'(0) > 0, so scan for the first sign change
    grid = np.linspace(0.0, gamma_max, 1001)[1:]
    lo = 0.0
    hi = None
    for g in grid:
        if h(float(g)) < 0:
            hi = float(g)
            break
        lo = float(g)
    if hi is None:
        return UNBOUNDED
    if lo == 0.0:
        lo = hi / 1024
        while h(lo) < 0:
            lo /= 2
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if h(mid) >= 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
