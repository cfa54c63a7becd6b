"""Bounded randomized property suites behind the ``verify`` subcommand."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import exponents as ex
from .decoder import DecoderConfig, StackDecoder, encode_si
from .models import Channel, JointSource, conditional_entropy, mutual_information, sample_pairs
from .oracle import Transcript, best_path_exhaustive
from .treecode import TreeCode


@dataclass
class SuiteResult:
    name: str
    checks: int = 0
    violations: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def record(self, ok: bool, note: str) -> None:
        self.checks += 1
        if not ok:
            self.violations += 1
            self.notes.append(note)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.checks} checks, {self.violations} violations"


def random_source(rng: np.random.Generator, n_u: int | None = None, n_v: int | None = None) -> JointSource:
    n_u = n_u or int(rng.integers(2, 5))
    n_v = n_v or int(rng.integers(1, 4))
    pmf = rng.dirichlet(np.ones(n_u * n_v)).reshape(n_u, n_v)
    return JointSource(pmf / pmf.sum())


def random_channel(rng: np.random.Generator, n_x: int | None = None, n_y: int | None = None) -> Channel:
    n_x = n_x or int(rng.integers(2, 4))
    n_y = n_y or int(rng.integers(2, 4))
    w = rng.dirichlet(np.ones(n_y), size=n_x)
    w /= w.sum(axis=1, keepdims=True)
    beta = rng.dirichlet(np.ones(n_x))
    return Channel(w, beta / beta.sum())


def slope_at_zero(fn: Callable[[float], float], h: float = 1e-4) -> float:
    """One-sided second-order difference f'(0) ~ (4 f(h/2) - f(h) - 3 f(0)) / h."""
    return (4.0 * fn(h / 2) - fn(h) - 3.0 * fn(0.0)) / h


def oracle_suite(seed: int = 0, instances: int = 200, n: int = 12, decoder_cls=StackDecoder) -> SuiteResult:
    """Decoder output vs exhaustive argmax with non-positive branch metrics (bias 0)."""
    res = SuiteResult("oracle-equivalence")
    rng = np.random.default_rng([seed, 1])
    for i in range(instances):
        source = random_source(rng, 2, 2)
        u, v = sample_pairs(source, n, rng)
        code = TreeCode(seed=int(rng.integers(1 << 62)), alphabet_size=2, rate=1)
        received = encode_si(code, u.tolist())
        dec = decoder_cls(source, code, DecoderConfig(bias=0.0))
        for t in range(n):
            node = dec.step(received[t], int(v[t]))
        transcript = Transcript(source, code, 0.0, u.tolist(), v.tolist(), received)
        path, metric = best_path_exhaustive(transcript, n)
        res.record(node.path() == path, f"instance {i}: decoder {node.path()} vs oracle {path}")
    return res


def slope_suite(seed: int = 0, models: int = 20, tol: float = 1e-4) -> SuiteResult:
    res = SuiteResult("slope-identities")
    rng = np.random.default_rng([seed, 2])
    for i in range(models):
        src = random_source(rng)
        ch = random_channel(rng)
        s_src = slope_at_zero(lambda r: ex.e_si(src, r))
        s_ch = slope_at_zero(lambda r: ex.e0(ch, r))
        h, mi = conditional_entropy(src), mutual_information(ch)
        res.record(abs(s_src - h) <= tol, f"model {i}: E_si'(0)={s_src:.8f} vs H(U|V)={h:.8f}")
        res.record(abs(s_ch - mi) <= tol, f"model {i}: E0'(0)={s_ch:.8f} vs I(X;Y)={mi:.8f}")
    return res


def jensen_suite(seed: int = 0, draws: int = 100) -> SuiteResult:
    """Jensen inequalities and non-emptiness of the computation bias intervals."""
    res = SuiteResult("jensen-feasibility")
    rng = np.random.default_rng([seed, 3])
    eps = 1e-12
    for i in range(draws):
        src = random_source(rng)
        ch = random_channel(rng)
        g = float(rng.uniform(1e-3, 1.0))
        e, f, gg = ex.e_si(src, g), ex.f_si(src, g), ex.g_si(src, g)
        res.record(e >= f + gg - eps, f"draw {i}: E_si < F_si + G_si at gamma={g}")
        e0, f0, g0 = ex.e0(ch, g), ex.f_ch(ch, g), ex.g_ch(ch, g)
        res.record(e0 <= f0 + g0 + eps, f"draw {i}: E0 > F + G at gamma={g}")

        rate = float(rng.uniform(0.0, 2.0 * np.log2(src.n_u)))
        iv = ex.bias_range_comp_si(src, rate, g)
        if iv.feasible:
            res.record(iv.nonempty, f"draw {i}: SI interval empty although feasible")
        lam = int(rng.integers(1, 4))
        iv = ex.bias_range_comp_jsc(src, ch, lam, g)
        if iv.feasible:
            res.record(iv.nonempty, f"draw {i}: JSC interval empty although feasible")
    return res


# G* is strictly above the interval's lower end only when sum_u Q(u|v)^(1/(1+gamma))
# varies with v; with |V| = 1 (or symmetric sources) the two coincide.


def feasible_si_instance(rng: np.random.Generator):
    src = random_source(rng, n_v=int(rng.integers(2, 4)))
    g = float(rng.uniform(0.05, 1.0))
    rate = ex.e_si(src, g) / g + float(rng.uniform(0.01, 1.0))
    return src, rate, g


def feasible_jsc_instance(rng: np.random.Generator):
    while True:
        src = random_source(rng, n_v=int(rng.integers(2, 4)))
        ch = random_channel(rng)
        g = float(rng.uniform(0.05, 1.0))
        e0 = ex.e0(ch, g)
        if e0 <= 1e-6:
            continue
        lam = int(np.floor(ex.e_si(src, g) / e0)) + 1
        if lam <= 50:
            return src, ch, lam, g


def default_bias_suite(seed: int = 0, draws: int = 100) -> SuiteResult:
    res = SuiteResult("default-bias")
    rng = np.random.default_rng([seed, 4])
    for i in range(draws):
        src, rate, g = feasible_si_instance(rng)
        gs = ex.default_bias(src, g)
        iv = ex.bias_range_comp_si(src, rate, g)
        cap = ex.bias_cap_error_si(src, g)
        res.record(iv.contains(gs), f"SI draw {i}: G*={gs} not in ({iv.lower}, {iv.upper})")
        res.record(gs <= cap, f"SI draw {i}: G*={gs} above cap {cap}")

        src, ch, lam, g = feasible_jsc_instance(rng)
        gs = ex.default_bias(src, g, ch, lam)
        iv = ex.bias_range_comp_jsc(src, ch, lam, g)
        cap = ex.bias_cap_error_jsc(src, ch, lam, g)
        res.record(iv.contains(gs), f"JSC draw {i}: G*={gs} not in ({iv.lower}, {iv.upper})")
        res.record(gs <= cap, f"JSC draw {i}: G*={gs} above cap {cap}")
    return res


SUITES = {
    "oracle": oracle_suite,
    "slopes": slope_suite,
    "jensen": jensen_suite,
    "default-bias": default_bias_suite,
}


def run_all(seed: int = 0, decoder_cls=StackDecoder) -> list[SuiteResult]:
    out = []
    for name, fn in SUITES.items():
        if name == "oracle":
            out.append(fn(seed, decoder_cls=decoder_cls))
        else:
            out.append(fn(seed))
    return out
