"""PEV fleet scenarios, price series and their file formats.

Sampling uses numpy's Philox counter-based generator keyed by
``(seed, system index)``, so each vehicle's draw is independent of how many
others are sampled or in which order.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import LengthMismatch, ParseError
from .polytope import PeParams

PRNG_NAME = "numpy.random.Philox-4x64-10"
SCENARIO_VERSION = 1
PRICE_HEADER = ("step", "price_eur_per_kwh")


@dataclass(frozen=True)
class PevRanges:
    p_max: tuple = (3.0, 3.0)
    p_min: tuple = (-3.0, -3.0)
    capacity: tuple = (20.0, 40.0)
    soc0: tuple = (0.2, 0.8)

    def to_dict(self):
        return {k: list(getattr(self, k)) for k in ("p_max", "p_min", "capacity", "soc0")}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: tuple(v) for k, v in d.items()})


@dataclass(frozen=True)
class PevSpec:
    capacity: float
    p_min: float
    p_max: float
    soc0: float
    trips: tuple = ()

    def __post_init__(self):
        if not 0.0 <= self.soc0 <= 1.0:
            raise ValueError("soc0 must lie in [0, 1]")
        if self.p_min > self.p_max:
            raise ValueError("p_min must not exceed p_max")
        if self.capacity < 0:
            raise ValueError("capacity must be non-negative")
        trips = tuple(sorted((int(a), int(b)) for a, b in self.trips))
        for (a, b), nxt in zip(trips, trips[1:] + ((None, None),)):
            if a < 0 or b < a:
                raise ValueError(f"bad trip window ({a}, {b})")
            if nxt[0] is not None and nxt[0] <= b:
                raise ValueError("trip windows overlap")
        object.__setattr__(self, "trips", trips)

    def to_dict(self):
        return {"capacity": self.capacity, "p_min": self.p_min, "p_max": self.p_max,
                "soc0": self.soc0, "trips": [list(t) for t in self.trips]}

    @classmethod
    def from_dict(cls, d):
        return cls(d["capacity"], d["p_min"], d["p_max"], d["soc0"], tuple(map(tuple, d.get("trips", []))))


@dataclass(frozen=True)
class PriceSeries:
    values: np.ndarray
    source: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size == 0 or not np.all(np.isfinite(v)):
            raise ValueError("price series must be non-empty and finite")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class FleetScenario:
    N: int
    t_s: float
    seed: int
    specs: tuple
    ranges: PevRanges = field(default_factory=PevRanges)
    prices: PriceSeries | None = None

    def params(self) -> list[PeParams]:
        return [apply_trips(s, self.N, self.t_s) for s in self.specs]

    def to_dict(self):
        d = {
            "version": SCENARIO_VERSION,
            "prng": PRNG_NAME,
            "N": self.N, "t_s": self.t_s, "seed": self.seed,
            "ranges": self.ranges.to_dict(),
            "specs": [s.to_dict() for s in self.specs],
        }
        if self.prices is not None:
            d["prices"] = {"values": self.prices.values.tolist(), "source": self.prices.source}
        return d

    @classmethod
    def from_dict(cls, d):
        if d.get("version", SCENARIO_VERSION) != SCENARIO_VERSION:
            raise ValueError(f"unsupported scenario version {d.get('version')}")
        prices = d.get("prices")
        return cls(int(d["N"]), float(d["t_s"]), int(d["seed"]),
                   tuple(PevSpec.from_dict(s) for s in d["specs"]),
                   PevRanges.from_dict(d["ranges"]) if "ranges" in d else PevRanges(),
                   PriceSeries(prices["values"], prices.get("source", "")) if prices else None)


def system_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for system ``index``: Philox keyed by ``(seed, index)``."""
    return np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), index]))


def _draw(rng, lo_hi):
    lo, hi = lo_hi
    return float(lo) if lo == hi else float(rng.uniform(lo, hi))


def sample_trips(rng, N: int, max_trips: int = 2) -> tuple:
    """Up to ``max_trips`` non-overlapping windows of 1 to ``N // 4`` steps."""
    trips = []
    free = np.ones(N, dtype=bool)
    for _ in range(int(rng.integers(0, max_trips + 1))):
        length = int(rng.integers(1, max(2, N // 4 + 1)))
        start = int(rng.integers(0, max(1, N - length + 1)))
        end = min(N - 1, start + length - 1)
        if free[start:end + 1].all():
            free[start:end + 1] = False
            trips.append((start, end))
    return tuple(sorted(trips))


def sample_fleet(count: int, ranges: PevRanges = PevRanges(), N: int = 12, t_s: float = 2.0,
                 seed: int = 0, trips: bool = False, prices: PriceSeries | None = None) -> FleetScenario:
    """Uniform draws within ``ranges`` for ``count`` vehicles."""
    if count < 1:
        raise ValueError("count must be at least 1")
    specs = []
    for j in range(count):
        rng = system_rng(seed, j)
        cap = _draw(rng, ranges.capacity)
        soc = _draw(rng, ranges.soc0)
        pmax = _draw(rng, ranges.p_max)
        pmin = _draw(rng, ranges.p_min)
        tw = sample_trips(rng, N) if trips else ()
        specs.append(PevSpec(cap, pmin, pmax, soc, tw))
    return FleetScenario(N, t_s, seed, tuple(specs), ranges, prices)


def apply_trips(spec: PevSpec, N: int, t_s: float) -> PeParams:
    """PE parameters with power pinned to zero during trips."""
    p_lo = np.full(N, spec.p_min)
    p_hi = np.full(N, spec.p_max)
    for a, b in spec.trips:
        if b >= N:
            raise ValueError(f"trip window ({a}, {b}) exceeds the horizon")
        p_lo[a:b + 1] = 0.0
        p_hi[a:b + 1] = 0.0
    return PeParams(N, t_s, p_lo, p_hi, 0.0, spec.capacity, spec.soc0 * spec.capacity)


def load_prices(path, N: int | None = None) -> PriceSeries:
    """Read a ``step,price_eur_per_kwh`` CSV.

    With ``N`` given, a series whose length is a multiple ``m * N`` is
    averaged over consecutive blocks of ``m`` rows; any other length raises
    :class:`LengthMismatch`.
    """
    values = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != PRICE_HEADER:
            raise ParseError(f"expected header {','.join(PRICE_HEADER)}", 1)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 fields, got {len(row)}", lineno)
            try:
                step, price = int(row[0]), float(row[1])
            except ValueError:
                raise ParseError(f"malformed row {row!r}", lineno) from None
            if step != len(values) or not np.isfinite(price):
                raise ParseError(f"bad step index or price in row {row!r}", lineno)
            values.append(price)
    if not values:
        raise ParseError("no price rows", 2)
    v = np.array(values)
    if N is not None:
        if v.size < N or v.size % N:
            raise LengthMismatch(f"{v.size} price rows cannot be resampled to {N} steps")
        v = v.reshape(N, -1).mean(axis=1)
    return PriceSeries(v, str(path))


def sample_prices(N: int | None = None) -> PriceSeries:
    """The bundled synthetic hourly series (24 rows), optionally resampled."""
    ref = resources.files("flexpool") / "data" / "sample_prices.csv"
    with resources.as_file(ref) as path:
        series = load_prices(path, N)
    return PriceSeries(series.values, "flexpool/data/sample_prices.csv (synthetic)")


def save_scenario(path, scenario: FleetScenario) -> None:
    from .io import atomic_write_json

    atomic_write_json(path, scenario.to_dict())


def load_scenario(path) -> FleetScenario:
    with open(path) as fh:
        return FleetScenario.from_dict(json.load(fh))
