"""Automatic domain randomization with a single global increment counter.

All parameters move in tandem: the counter fraction n/n_total linearly
interpolates every range (and scalar schedule) between its initial and
terminal setting. Interpolation, not cumulative increments, so the terminal
values are attained exactly.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from importlib import resources

import numpy as np
import yaml


@dataclass(frozen=True)
class AdrParameter:
    name: str
    kind: str  # "uniform" or "scalar"
    init_lo: float
    init_hi: float
    terminal_lo: float
    terminal_hi: float

    def __post_init__(self):
        if self.kind == "uniform":
            if not (self.terminal_lo <= self.init_lo and self.init_hi <= self.terminal_hi):
                raise ValueError(
                    f"'{self.name}': initial range must lie inside the terminal range"
                )
        elif self.kind == "scalar":
            if self.init_lo != self.init_hi or self.terminal_lo != self.terminal_hi:
                raise ValueError(f"'{self.name}': scalar rows take single values")
            if self.init_lo == self.terminal_lo:
                raise ValueError(f"'{self.name}': scalar schedule endpoints must differ")
        else:
            raise ValueError(f"'{self.name}': unknown kind '{self.kind}'")


@dataclass(frozen=True)
class AdrState:
    params: tuple[AdrParameter, ...]
    n: int = 0
    n_total: int = 100

    def __post_init__(self):
        if not 0 <= self.n <= self.n_total:
            raise ValueError("increment counter out of range")

    @property
    def fraction(self) -> float:
        return self.n / self.n_total

    def names(self) -> list[str]:
        return [p.name for p in self.params]

    def _find(self, name: str) -> AdrParameter:
        for p in self.params:
            if p.name == name:
                return p
        raise KeyError(f"unknown ADR parameter '{name}'")


@dataclass(frozen=True)
class AdrGate:
    perf_threshold: float = 0.7
    window: int = 64

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("gate window must be >= 1")


def current_range(state: AdrState, name: str) -> tuple[float, float]:
    p = state._find(name)
    t = state.fraction
    # (1-t)*a + t*b is exact at both endpoints, unlike a + t*(b-a).
    lo = (1.0 - t) * p.init_lo + t * p.terminal_lo
    hi = (1.0 - t) * p.init_hi + t * p.terminal_hi
    return lo, hi


def current_value(state: AdrState, name: str) -> float:
    """Scalar-schedule value (or range midpoint for uniform rows)."""
    lo, hi = current_range(state, name)
    return 0.5 * (lo + hi)


def advance(state: AdrState, recent_perf: float, gate: AdrGate) -> AdrState:
    """Bump the global counter when performance clears the gate."""
    if recent_perf >= gate.perf_threshold and state.n < state.n_total:
        return replace(state, n=state.n + 1)
    return state


def sample(state: AdrState, rng_seed: int) -> dict[str, float]:
    """Draw one value per parameter from the current ranges; deterministic."""
    rng = np.random.default_rng(rng_seed)
    out: dict[str, float] = {}
    for p in state.params:
        lo, hi = current_range(state, p.name)
        if p.kind == "scalar" or lo == hi:
            out[p.name] = lo
        else:
            out[p.name] = float(rng.uniform(lo, hi))
    return out


class PerformanceWindow:
    """Trailing mean of episode successes used to drive the gate."""

    def __init__(self, window: int):
        self._buf: deque[float] = deque(maxlen=window)

    def record(self, success: bool) -> None:
        self._buf.append(1.0 if success else 0.0)

    @property
    def mean(self) -> float:
        return sum(self._buf) / len(self._buf) if self._buf else 0.0

    @property
    def full(self) -> bool:
        return len(self._buf) == self._buf.maxlen


# -- schedule loading ----------------------------------------------------------


def load_schedule(text: str) -> AdrState:
    doc = yaml.safe_load(text)
    params = []
    for entry in doc["parameters"]:
        if entry["kind"] == "scalar":
            init = [entry["init"], entry["init"]]
            terminal = [entry["terminal"], entry["terminal"]]
        else:
            init, terminal = entry["init"], entry["terminal"]
        params.append(
            AdrParameter(
                name=entry["name"],
                kind=entry["kind"],
                init_lo=float(init[0]),
                init_hi=float(init[1]),
                terminal_lo=float(terminal[0]),
                terminal_hi=float(terminal[1]),
            )
        )
    return AdrState(params=tuple(params), n=0, n_total=int(doc.get("n_total", 100)))


def reference_schedule() -> AdrState:
    text = resources.files("fabricgrasp.data").joinpath("adr_schedule.yaml").read_text()
    return load_schedule(text)


def dump_ranges(state: AdrState) -> list[dict]:
    """Tabular view of current ranges (CLI adr-dump)."""
    rows = []
    for p in state.params:
        lo, hi = current_range(state, p.name)
        rows.append({"name": p.name, "kind": p.kind, "lo": lo, "hi": hi})
    return rows
