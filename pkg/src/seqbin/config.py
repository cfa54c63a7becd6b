"""Run-configuration file: strict JSON schema, validation and hashing."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from . import exponents
from .models import Channel, JointSource, ModelError
from .sim import DEFAULT_COMP_WINDOW, DEFAULT_DELAY_WINDOW, SimConfig


class ConfigError(ValueError):
    pass


TOP_LEVEL = {
    "mode", "source", "rate", "lambda", "channel", "bias", "seeds", "trials",
    "stream_len", "delays", "warmup", "caps", "fit", "output_dir",
}
REQUIRED = {"mode", "source", "bias", "seeds", "trials", "stream_len", "delays"}
NESTED = {
    "source": {"pmf"},
    "channel": {"W", "beta"},
    "seeds": {"master", "count"},
    "caps": {"max_pops_per_step", "max_stack"},
    "fit": {"delay_window", "comp_window"},
}


def _reject_unknown(section: str, obj: Any, allowed: set[str]) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{section} must be an object")
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ConfigError(f"unknown field(s) in {section}: {', '.join(extra)}")


def _int(value, name: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return value


def _window(value, name: str) -> tuple[int, int]:
    if not (isinstance(value, list) and len(value) == 2 and all(isinstance(x, (int, float)) for x in value)):
        raise ConfigError(f"{name} must be a two-element list [lo, hi]")
    lo, hi = value
    if lo > hi:
        raise ConfigError(f"{name} has lo > hi")
    return (lo, hi)


def _check_pmf_rows(pmf) -> None:
    arr = np.asarray(pmf, dtype=float)
    total = arr.sum()
    if abs(total - 1.0) > 1e-12:
        rows = ", ".join(f"row {i}: {s:.6g}" for i, s in enumerate(arr.sum(axis=1)))
        raise ConfigError(f"source.pmf entries sum to {total:.12g}, expected 1 ({rows})")


@dataclass
class RunConfig:
    raw: dict
    mode: str
    source: JointSource
    rate: float | None
    lam: int | None
    channel: Channel | None
    bias_spec: Any
    master_seed: int
    seed_count: int | None
    trials: int
    stream_len: int
    delays: list[int]
    warmup: int | None
    max_pops_per_step: int
    max_stack: int
    delay_window: tuple[int, int]
    comp_window: tuple[int, int]
    output_dir: str | None

    @property
    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def resolve_bias(self) -> float:
        """Numeric bias; ``auto-error:rho`` takes the error-exponent cap at rho and
        ``auto-comp:gamma`` takes the default bias, which must lie in the
        computation interval."""
        spec = self.bias_spec
        if isinstance(spec, (int, float)) and not isinstance(spec, bool):
            return float(spec)
        kind, _, arg = str(spec).partition(":")
        try:
            param = float(arg)
        except ValueError:
            raise ConfigError(f"bad bias spec {spec!r}") from None
        if kind == "auto-error":
            if not 0.0 < param <= 1.0:
                raise ConfigError("auto-error rho must lie in (0, 1]")
            if self.mode == "si":
                return exponents.bias_cap_error_si(self.source, param)
            return exponents.bias_cap_error_jsc(self.source, self.channel, self.lam, param)
        if kind == "auto-comp":
            if not 0.0 < param <= 1.0:
                raise ConfigError("auto-comp gamma must lie in (0, 1]")
            if self.mode == "si":
                interval = exponents.bias_range_comp_si(self.source, self.rate, param)
                g = exponents.default_bias(self.source, param)
            else:
                interval = exponents.bias_range_comp_jsc(self.source, self.channel, self.lam, param)
                g = exponents.default_bias(self.source, param, self.channel, self.lam)
            if not interval.feasible:
                raise ConfigError(f"auto-comp:{arg}: moment condition fails, no admissible bias")
            return g
        raise ConfigError(f"bad bias spec {spec!r}; expected a number, 'auto-error:rho' or 'auto-comp:gamma'")

    def sim_config(self, master_seed: int | None = None) -> SimConfig:
        try:
            return SimConfig(
                source=self.source,
                bias=self.resolve_bias(),
                mode=self.mode,
                rate=self.rate,
                lam=self.lam,
                channel=self.channel,
                trials=self.trials,
                stream_len=self.stream_len,
                delays=tuple(self.delays),
                warmup=self.warmup,
                master_seed=self.master_seed if master_seed is None else master_seed,
                code_seeds=self.seed_count,
                max_pops_per_step=self.max_pops_per_step,
                max_stack=self.max_stack,
                delay_window=self.delay_window,
                comp_window=self.comp_window,
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc


def parse_config(doc: dict, seed_override: int | None = None) -> RunConfig:
    _reject_unknown("config", doc, TOP_LEVEL)
    missing = sorted(REQUIRED - set(doc))
    if missing:
        raise ConfigError(f"missing field(s): {', '.join(missing)}")
    for name, allowed in NESTED.items():
        if name in doc:
            _reject_unknown(name, doc[name], allowed)

    raw = json.loads(json.dumps(doc))
    if seed_override is not None:
        raw["seeds"] = dict(raw["seeds"], master=seed_override)

    mode = doc["mode"]
    if mode not in ("si", "jsc"):
        raise ConfigError(f"mode must be 'si' or 'jsc', got {mode!r}")
    if "pmf" not in doc["source"]:
        raise ConfigError("source.pmf is required")
    try:
        _check_pmf_rows(doc["source"]["pmf"])
        source = JointSource(doc["source"]["pmf"])
    except ModelError as exc:
        raise ConfigError(f"source.pmf: {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"source.pmf is not a numeric matrix: {exc}") from exc

    rate = lam = channel = None
    if mode == "si":
        if "rate" not in doc:
            raise ConfigError("SI mode requires 'rate'")
        if "lambda" in doc or "channel" in doc:
            raise ConfigError("'lambda' and 'channel' are only valid in JSC mode")
        rate = doc["rate"]
        if isinstance(rate, bool) or not isinstance(rate, (int, float)) or rate <= 0:
            raise ConfigError(f"rate must be a positive number, got {rate!r}")
    else:
        if "lambda" not in doc or "channel" not in doc:
            raise ConfigError("JSC mode requires 'lambda' and 'channel'")
        if "rate" in doc:
            raise ConfigError("'rate' is only valid in SI mode")
        lam = _int(doc["lambda"], "lambda", 1)
        ch = doc["channel"]
        if set(ch) != {"W", "beta"}:
            raise ConfigError("channel needs both 'W' and 'beta'")
        try:
            channel = Channel(ch["W"], ch["beta"])
        except ModelError as exc:
            raise ConfigError(f"channel: {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"channel is not numeric: {exc}") from exc

    seeds = doc["seeds"]
    if "master" not in seeds:
        raise ConfigError("seeds.master is required")
    master = _int(seeds["master"] if seed_override is None else seed_override, "seeds.master")
    count = _int(seeds["count"], "seeds.count", 1) if "count" in seeds else None

    delays = doc["delays"]
    if not isinstance(delays, list) or not delays:
        raise ConfigError("delays must be a non-empty list of integers")
    delays = [_int(d, "delays entry") for d in delays]

    caps = doc.get("caps", {})
    fit = doc.get("fit", {})
    out = doc.get("output_dir")
    if out is not None and not isinstance(out, str):
        raise ConfigError("output_dir must be a string")
    bias = doc["bias"]
    if isinstance(bias, bool) or not isinstance(bias, (int, float, str)):
        raise ConfigError(f"bias must be a number or an auto spec, got {bias!r}")

    cfg = RunConfig(
        raw=raw,
        mode=mode,
        source=source,
        rate=float(rate) if rate is not None else None,
        lam=lam,
        channel=channel,
        bias_spec=bias,
        master_seed=master,
        seed_count=count,
        trials=_int(doc["trials"], "trials"),
        stream_len=_int(doc["stream_len"], "stream_len", 1),
        delays=delays,
        warmup=_int(doc["warmup"], "warmup") if "warmup" in doc else None,
        max_pops_per_step=_int(caps.get("max_pops_per_step", 10**6), "caps.max_pops_per_step", 1),
        max_stack=_int(caps.get("max_stack", 10**7), "caps.max_stack", 1),
        delay_window=_window(fit.get("delay_window", list(DEFAULT_DELAY_WINDOW)), "fit.delay_window"),
        comp_window=_window(fit.get("comp_window", list(DEFAULT_COMP_WINDOW)), "fit.comp_window"),
        output_dir=out,
    )
    cfg.resolve_bias()
    return cfg


def load_config(path: str | Path, seed_override: int | None = None) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return parse_config(doc, seed_override)
