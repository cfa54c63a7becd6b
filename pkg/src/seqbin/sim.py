"""Monte-Carlo harness: error probability with delay and per-step computation.

Each trial draws its own source stream and tree-code seed from the master
seed, runs the streaming decoder, and returns integer counts.  Aggregation
is a plain sum over trials, so results do not depend on how trials are
split across workers.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .decoder import CapExceeded, DecoderConfig, Node, StackDecoder, encode_jsc, encode_si
from .models import Channel, JointSource, sample_channel_many, sample_pairs
from .treecode import TreeCode

NO_ERROR = 1 << 62

DEFAULT_DELAY_WINDOW = (8, 40)
DEFAULT_COMP_WINDOW = (8, 1 << 14)


class InsufficientData(ValueError):
    """Too few usable points for a regression."""


@dataclass
class SimConfig:
    source: JointSource
    bias: float
    mode: str = "si"
    rate: float | None = None
    lam: int | None = None
    channel: Channel | None = None
    trials: int = 1
    stream_len: int = 1000
    delays: tuple[int, ...] = tuple(range(1, 41))
    warmup: int | None = None
    master_seed: int = 0
    code_seeds: int | None = None  # distinct tree codes; trials cycle through them
    max_pops_per_step: int = 10**6
    max_stack: int = 10**7
    delay_window: tuple[int, int] = DEFAULT_DELAY_WINDOW
    comp_window: tuple[int, int] = DEFAULT_COMP_WINDOW

    def __post_init__(self):
        self.delays = tuple(sorted(set(int(d) for d in self.delays)))
        if not self.delays or self.delays[0] < 0:
            raise ValueError("delays must be a non-empty list of non-negative integers")
        if self.warmup is None:
            self.warmup = max(self.delays)
        if self.trials > 0 and max(self.delays) >= self.stream_len:
            raise ValueError("max delay must be below the stream length")
        if self.warmup >= self.stream_len:
            raise ValueError("warmup must be below the stream length")
        if self.mode == "si" and self.rate is None:
            raise ValueError("SI mode needs a rate")
        if self.mode == "jsc" and (self.lam is None or self.channel is None):
            raise ValueError("JSC mode needs lambda and a channel")

    @property
    def first_scored_time(self) -> int:
        return self.warmup + max(self.delays)

    def decoder_config(self) -> DecoderConfig:
        return DecoderConfig(
            bias=self.bias, mode=self.mode, max_pops_per_step=self.max_pops_per_step, max_stack=self.max_stack
        )


def trial_seeds(master_seed: int, trial: int, code_seeds: int | None = None) -> tuple[int, np.random.Generator]:
    """(128-bit tree-code seed, source/channel rng) for one trial."""
    code_index = trial if not code_seeds else trial % code_seeds
    words = np.random.SeedSequence(master_seed, spawn_key=(0, code_index)).generate_state(4, np.uint32)
    code_seed = 0
    for w in words:
        code_seed = (code_seed << 32) | int(w)
    stream = np.random.SeedSequence(master_seed, spawn_key=(1, trial))
    return code_seed, np.random.Generator(np.random.Philox(stream))


@dataclass
class TrialStats:
    completed: bool
    errors: np.ndarray  # per delay: error indicators summed over scored times
    samples: int  # scored times per delay
    errors_by_time: np.ndarray  # bool (len(delays), stream_len)
    comp: Counter = field(default_factory=Counter)  # pops-per-step histogram after warmup
    censored: int = 0
    steps: list[int] = field(default_factory=list)  # pops per step, all steps


def _first_error(node: Node, truth: list[int]) -> int:
    """Depth of the first wrong symbol on ``node``'s path (NO_ERROR if none), memoized in ``aux``."""
    chain = []
    while node.aux is None:
        if node.parent is None:
            node.aux = NO_ERROR
            break
        chain.append(node)
        node = node.parent
    fe = node.aux
    for n in reversed(chain):
        if fe == NO_ERROR and n.sym != truth[n.depth - 1]:
            fe = n.depth
        n.aux = fe
    return fe


def run_trial(cfg: SimConfig, trial: int) -> TrialStats:
    code_seed, rng = trial_seeds(cfg.master_seed, trial, cfg.code_seeds)
    T = cfg.stream_len
    u, v = sample_pairs(cfg.source, T, rng)
    u = u.tolist()
    v = v.tolist()
    if cfg.mode == "si":
        code = TreeCode(seed=code_seed, alphabet_size=cfg.source.n_u, rate=cfg.rate)
        received = encode_si(code, u)
    else:
        code = TreeCode(
            seed=code_seed, alphabet_size=cfg.source.n_u, lam=cfg.lam, input_dist=tuple(cfg.channel.input_dist)
        )
        xs = np.array(encode_jsc(code, u), dtype=np.int64).reshape(T, cfg.lam)
        received = [tuple(r) for r in sample_channel_many(cfg.channel, xs, rng).tolist()]

    dec = StackDecoder(cfg.source, code, cfg.decoder_config(), cfg.channel)
    delays = np.array(cfg.delays)
    errors_by_time = np.zeros((len(delays), T), dtype=bool)
    first_scored = cfg.first_scored_time
    completed = True
    for t in range(1, T + 1):
        try:
            node = dec.step(received[t - 1], v[t - 1])
        except CapExceeded:
            completed = False
            break
        if t >= first_scored:
            fe = _first_error(node, u)
            if fe != NO_ERROR:
                errors_by_time[:, t - 1] = fe <= t - delays

    steps = dec.ledger.pops_per_step
    after = steps[cfg.warmup:]
    comp = Counter(after)
    censored = 0 if completed or not after else 1
    samples = max(0, T - first_scored + 1)
    if not completed:
        errors_by_time[:] = 0
        samples = 0
    return TrialStats(completed, errors_by_time.sum(axis=1), samples, errors_by_time, comp, censored, list(steps))


# -- reporting -------------------------------------------------------------


@dataclass
class FitResult:
    exponent: float
    stderr: float
    n_points: int


def _linfit(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    n = len(x)
    xm = x - x.mean()
    sxx = float(np.dot(xm, xm))
    slope = float(np.dot(xm, y - y.mean())) / sxx
    resid = y - y.mean() - slope * xm
    stderr = math.sqrt(float(np.dot(resid, resid)) / (n - 2) / sxx) if n > 2 else math.nan
    return slope, stderr


def fit_loglinear(points, window: tuple[float, float] = DEFAULT_DELAY_WINDOW) -> FitResult:
    """Negated least-squares slope of log2 p against d over the window."""
    pts = [(float(d), float(p)) for d, p in points if window[0] <= d <= window[1] and p > 0]
    if len(pts) < 4:
        raise InsufficientData(f"need at least 4 positive points in {window}, got {len(pts)}")
    x, y = np.array(pts).T
    slope, se = _linfit(x, np.log2(y))
    return FitResult(-slope, se, len(pts))


def fit_pareto(points, window: tuple[float, float] = DEFAULT_COMP_WINDOW) -> FitResult:
    """Negated least-squares slope of log2 P(C >= n) against log2 n over the window."""
    pts = [(float(n), float(p)) for n, p in points if window[0] <= n <= window[1] and p > 0]
    if len(pts) < 4:
        raise InsufficientData(f"need at least 4 positive points in {window}, got {len(pts)}")
    x, y = np.array(pts).T
    slope, se = _linfit(np.log2(x), np.log2(y))
    return FitResult(-slope, se, len(pts))


def log_grid(n_max: int, per_octave: int = 4) -> list[int]:
    """Distinct integers near 2^(k/per_octave), from 1 up to n_max."""
    out = []
    k = 0
    while True:
        n = int(round(2 ** (k / per_octave)))
        if n > n_max:
            break
        if not out or n != out[-1]:
            out.append(n)
        k += 1
    return out


def ccdf_from_counts(comp: Counter) -> list[tuple[int, float]]:
    total = sum(comp.values())
    if total == 0:
        return []
    values = np.array(sorted(comp))
    counts = np.array([comp[c] for c in values])
    tail = np.cumsum(counts[::-1])[::-1]  # tail[i] = #obs >= values[i]
    out = []
    for n in log_grid(int(values[-1])):
        i = int(np.searchsorted(values, n, side="left"))
        out.append((n, float(tail[i]) / total if i < len(values) else 0.0))
    return out


@dataclass
class SimReport:
    delays: list[int]
    trials: int
    trials_observed: int
    cap_abort_count: int
    errors: list[int]
    samples: list[int]
    pe: list[float]
    pe_sup_over_n: list[float]
    comp_ccdf: list[tuple[int, float]]
    comp_observations: int
    censored_steps: int
    mean_computation: float
    mean_computation_halves: tuple[float, float]
    delay_fit: FitResult | None
    pareto_fit: FitResult | None
    code_seeds: list[int]

    @property
    def pe_curve(self) -> list[tuple[int, int, int, float]]:
        return list(zip(self.delays, [self.trials_observed] * len(self.delays), self.errors, self.pe))

    @property
    def fitted_delay_exponent(self) -> float | None:
        return None if self.delay_fit is None else self.delay_fit.exponent

    @property
    def fitted_pareto_exponent(self) -> float | None:
        return None if self.pareto_fit is None else self.pareto_fit.exponent


def _run_batch(args) -> list[TrialStats]:
    cfg, trials = args
    return [run_trial(cfg, i) for i in trials]


def run_trials(cfg: SimConfig, workers: int = 1) -> list[TrialStats]:
    idx = list(range(cfg.trials))
    if workers <= 1 or cfg.trials <= 1:
        return [run_trial(cfg, i) for i in idx]
    chunks = [idx[k::workers] for k in range(workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_batch, [(cfg, c) for c in chunks]))
    by_index = {}
    for chunk, stats in zip(chunks, parts):
        by_index.update(zip(chunk, stats))
    return [by_index[i] for i in idx]


def aggregate(cfg: SimConfig, stats: list[TrialStats]) -> SimReport:
    n_d = len(cfg.delays)
    errors = np.zeros(n_d, dtype=np.int64)
    samples = 0
    by_time = np.zeros((n_d, cfg.stream_len), dtype=np.int64)
    observed = 0
    comp = Counter()
    censored = 0
    first_half = []
    second_half = []
    mid = cfg.warmup + (cfg.stream_len - cfg.warmup) // 2
    for s in stats:
        comp.update(s.comp)
        censored += s.censored
        first_half.extend(s.steps[cfg.warmup:mid])
        second_half.extend(s.steps[mid:])
        if not s.completed:
            continue
        observed += 1
        errors += s.errors
        samples += s.samples
        by_time += s.errors_by_time
    pe = [float(e) / samples if samples else 0.0 for e in errors]
    if observed:
        scored = by_time[:, cfg.first_scored_time - 1 :] / observed
        sup = [float(row.max()) if row.size else 0.0 for row in scored]
    else:
        sup = [0.0] * n_d
    ccdf = ccdf_from_counts(comp)
    try:
        dfit = fit_loglinear(zip(cfg.delays, pe), cfg.delay_window)
    except InsufficientData:
        dfit = None
    try:
        pfit = fit_pareto(ccdf, cfg.comp_window)
    except InsufficientData:
        pfit = None
    n_obs = sum(comp.values())
    mean_c = sum(k * c for k, c in comp.items()) / n_obs if n_obs else 0.0
    halves = tuple(float(np.mean(h)) if h else 0.0 for h in (first_half, second_half))
    seeds = sorted({trial_seeds(cfg.master_seed, i, cfg.code_seeds)[0] for i in range(cfg.trials)})
    return SimReport(
        delays=list(cfg.delays),
        trials=cfg.trials,
        trials_observed=observed,
        cap_abort_count=cfg.trials - observed,
        errors=[int(e) for e in errors],
        samples=[samples] * n_d,
        pe=pe,
        pe_sup_over_n=sup,
        comp_ccdf=ccdf,
        comp_observations=n_obs,
        censored_steps=censored,
        mean_computation=mean_c,
        mean_computation_halves=halves,
        delay_fit=dfit,
        pareto_fit=pfit,
        code_seeds=seeds,
    )


def simulate(cfg: SimConfig, workers: int = 1) -> SimReport:
    return aggregate(cfg, run_trials(cfg, workers))


def estimate_pe(cfg: SimConfig, workers: int = 1) -> list[tuple[int, int, int, float]]:
    """(d, trials_observed, error_count, p_e(d)) rows."""
    return simulate(cfg, workers).pe_curve


def estimate_comp_ccdf(cfg: SimConfig, workers: int = 1) -> list[tuple[int, float]]:
    return simulate(cfg, workers).comp_ccdf
