"""Synthetic request populations drawn from token-length histograms."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from infersim.config import ConfigError, check_fields, load_json, load_preset
from infersim.scheduler import Request


@dataclass(frozen=True)
class HistogramSpec:
    """Token-length histogram; each bucket is an inclusive integer range ``[lo, hi]``."""

    buckets: tuple[tuple[int, int, float], ...]

    def __post_init__(self) -> None:
        if not self.buckets:
            raise ConfigError("histogram needs at least one bucket")
        prev_hi = None
        for lo, hi, p in self.buckets:
            if lo < 0 or hi < lo:
                raise ConfigError(f"histogram bucket [{lo}, {hi}] is empty or negative")
            if p < 0:
                raise ConfigError(f"histogram bucket [{lo}, {hi}] has negative probability")
            if prev_hi is not None and lo <= prev_hi:
                raise ConfigError("histogram buckets must be disjoint and in increasing order")
            prev_hi = hi
        total = math.fsum(p for _, _, p in self.buckets)
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"histogram probabilities sum to {total}, expected 1")

    @classmethod
    def point(cls, value: int) -> HistogramSpec:
        return cls(((value, value, 1.0),))

    @classmethod
    def from_list(cls, rows: Sequence[Sequence[float]]) -> HistogramSpec:
        try:
            return cls(tuple((int(lo), int(hi), float(p)) for lo, hi, p in rows))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"histogram rows must be [lo, hi, probability]: {exc}") from exc

    def to_list(self) -> list[list[float]]:
        return [[lo, hi, p] for lo, hi, p in self.buckets]

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        lo = np.array([b[0] for b in self.buckets], dtype=np.int64)
        hi = np.array([b[1] for b in self.buckets], dtype=np.int64)
        probs = np.array([b[2] for b in self.buckets])
        idx = rng.choice(len(self.buckets), size=n, p=probs / probs.sum())
        return rng.integers(lo[idx], hi[idx] + 1)


@dataclass(frozen=True)
class Arrival:
    kind: str = "batch"
    rate: float = 0.0  # requests/s, Poisson only

    def __post_init__(self) -> None:
        if self.kind not in ("batch", "poisson"):
            raise ConfigError(f"arrival kind must be 'batch' or 'poisson', got {self.kind!r}")
        if self.kind == "poisson" and not self.rate > 0:
            raise ConfigError("poisson arrival needs a positive rate")


@dataclass(frozen=True)
class WorkloadSpec:
    num_requests: int
    isl_hist: HistogramSpec
    osl_hist: HistogramSpec
    arrival: Arrival = field(default_factory=Arrival)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_requests < 1:
            raise ConfigError("workload: num_requests must be >= 1")

    @classmethod
    def fixed(cls, num_requests: int, isl: int, osl: int, seed: int = 0) -> WorkloadSpec:
        return cls(num_requests, HistogramSpec.point(isl), HistogramSpec.point(osl), seed=seed)

    def with_requests(self, num_requests: int) -> WorkloadSpec:
        return replace(self, num_requests=num_requests)


def sample_workload(spec: WorkloadSpec) -> list[Request]:
    """Draw requests: bucket by probability, then uniform within the bucket.

    Lengths are clipped to at least one token.
    """
    rng = np.random.default_rng(spec.seed)
    isl = np.maximum(spec.isl_hist.sample(rng, spec.num_requests), 1)
    osl = np.maximum(spec.osl_hist.sample(rng, spec.num_requests), 1)
    if spec.arrival.kind == "poisson":
        arrivals = np.cumsum(rng.exponential(1.0 / spec.arrival.rate, size=spec.num_requests))
    else:
        arrivals = np.zeros(spec.num_requests)
    return [
        Request(id=i, arrival_time=float(arrivals[i]), isl=int(isl[i]), osl=int(osl[i]))
        for i in range(spec.num_requests)
    ]


@dataclass(frozen=True)
class WorkloadStats:
    num_requests: int
    mean_isl: float
    mean_osl: float
    median_isl: float
    median_osl: float
    max_osl: int
    mean_footprint_sq: float  # E[(isl + osl)^2]
    isl_fractions: tuple[float, ...]
    osl_fractions: tuple[float, ...]
    isl_buckets: tuple[tuple[int, int], ...]
    osl_buckets: tuple[tuple[int, int], ...]

    @property
    def resident_footprint(self) -> float:
        """Mean final footprint of a request seen resident at a random instant.

        Residency time grows with output length, so the running set is
        length-biased: E[f^2] / E[f] rather than E[f].
        """
        return self.mean_footprint_sq / (self.mean_isl + self.mean_osl)

    @property
    def total_isl(self) -> float:
        return self.mean_isl * self.num_requests

    @property
    def total_osl(self) -> float:
        return self.mean_osl * self.num_requests


def _fractions(values: np.ndarray, hist: HistogramSpec) -> tuple[float, ...]:
    return tuple(float(np.mean((values >= lo) & (values <= hi))) for lo, hi, _ in hist.buckets)


def workload_stats(requests: Sequence[Request], spec: WorkloadSpec | None = None) -> WorkloadStats:
    if not requests:
        raise ValueError("workload_stats needs at least one request")
    if spec is None:
        spec = natural_reasoning()
    isl = np.array([r.isl for r in requests])
    osl = np.array([r.osl for r in requests])
    return WorkloadStats(
        num_requests=len(requests),
        mean_isl=float(isl.mean()),
        mean_osl=float(osl.mean()),
        median_isl=float(np.median(isl)),
        median_osl=float(np.median(osl)),
        max_osl=int(osl.max()),
        mean_footprint_sq=float(np.mean((isl + osl).astype(float) ** 2)),
        isl_fractions=_fractions(isl, spec.isl_hist),
        osl_fractions=_fractions(osl, spec.osl_hist),
        isl_buckets=tuple((lo, hi) for lo, hi, _ in spec.isl_hist.buckets),
        osl_buckets=tuple((lo, hi) for lo, hi, _ in spec.osl_hist.buckets),
    )


_WORKLOAD_FIELDS = {"preset", "num_requests", "isl_hist", "osl_hist", "arrival", "seed", "note"}


def workload_from_dict(table: dict, presets: dict | None = None) -> WorkloadSpec:
    """Build a workload from a table; ``preset`` names a base that other keys override."""
    check_fields(table, _WORKLOAD_FIELDS, "workload")
    merged: dict = {}
    if "preset" in table:
        presets = presets if presets is not None else load_preset("workloads.json")
        if table["preset"] not in presets:
            raise ConfigError(f"workload: unknown preset '{table['preset']}'")
        merged.update(presets[table["preset"]])
    merged.update({k: v for k, v in table.items() if k != "preset"})
    for key in ("isl_hist", "osl_hist"):
        if key not in merged:
            raise ConfigError(f"workload: missing field '{key}'")
    arrival = merged.get("arrival", {"kind": "batch"})
    if isinstance(arrival, str):
        arrival = {"kind": arrival}
    check_fields(arrival, {"kind", "rate"}, "workload.arrival")
    return WorkloadSpec(
        num_requests=int(merged.get("num_requests", 1)),
        isl_hist=HistogramSpec.from_list(merged["isl_hist"]),
        osl_hist=HistogramSpec.from_list(merged["osl_hist"]),
        arrival=Arrival(kind=arrival.get("kind", "batch"), rate=float(arrival.get("rate", 0.0))),
        seed=int(merged.get("seed", 0)),
    )


def workload_to_dict(spec: WorkloadSpec) -> dict:
    arrival = {"kind": spec.arrival.kind}
    if spec.arrival.kind == "poisson":
        arrival["rate"] = spec.arrival.rate
    return {
        "num_requests": spec.num_requests,
        "isl_hist": spec.isl_hist.to_list(),
        "osl_hist": spec.osl_hist.to_list(),
        "arrival": arrival,
        "seed": spec.seed,
    }


def load_workload(path: str | Path) -> WorkloadSpec:
    return workload_from_dict(load_json(path))


def bundled_workloads() -> dict:
    return load_preset("workloads.json")


def preset_workload(name: str, num_requests: int | None = None, seed: int | None = None) -> WorkloadSpec:
    table: dict = {"preset": name}
    if num_requests is not None:
        table["num_requests"] = num_requests
    if seed is not None:
        table["seed"] = seed
    return workload_from_dict(table)


def natural_reasoning(num_requests: int = 2000, seed: int = 0) -> WorkloadSpec:
    return preset_workload("natural-reasoning", num_requests, seed)


def write_requests_csv(requests: Sequence[Request], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "arrival", "isl", "osl"])
        for r in requests:
            writer.writerow([r.id, repr(r.arrival_time), r.isl, r.osl])
