"""World model: stations, requests, time grid, file ingestion and synthetic scenarios."""

from __future__ import annotations

import copy
import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import yaml

from .rng import OUTAGE, PLACEMENT, STATIONS, derive_rng

DAY_MINUTES = 1440
EARTH_RADIUS_KM = 6371.0
SCENARIO_FORMAT = "decharge-scenario/1"


class ScenarioError(ValueError):
    """Raised for malformed input files, configs or scenario parameters."""


@dataclass(frozen=True)
class GeoPoint:
    x_km: float
    y_km: float

    def distance(self, other: "GeoPoint") -> float:
        return math.hypot(self.x_km - other.x_km, self.y_km - other.y_km)


def project(lat: float, lon: float, origin: tuple[float, float]) -> GeoPoint:
    """Equirectangular projection of ``(lat, lon)`` about ``origin`` in km."""
    lat0, lon0 = origin
    x = EARTH_RADIUS_KM * math.radians(lon - lon0) * math.cos(math.radians(lat0))
    y = EARTH_RADIUS_KM * math.radians(lat - lat0)
    return GeoPoint(x, y)


@dataclass
class ChargingStation:
    """A station with ``num_slots`` slots, some of which may be down for the day.

    ``slot_free_time`` holds the minute at which each slot next becomes free and
    ``window_queue_time`` the queuing accumulated by the most recent window update.
    """

    id: int
    location: GeoPoint
    num_slots: int
    weight: float = 1.0
    slot_free_time: list[float] = field(default_factory=list)
    enabled: list[bool] = field(default_factory=list)
    window_queue_time: float = 0.0

    def __post_init__(self):
        if self.num_slots < 1:
            raise ScenarioError(f"station {self.id}: slots must be >= 1, got {self.num_slots}")
        if self.weight < 0 or not math.isfinite(self.weight):
            raise ScenarioError(f"station {self.id}: weight must be finite and >= 0")
        if not self.slot_free_time:
            self.slot_free_time = [0.0] * self.num_slots
        if not self.enabled:
            self.enabled = [True] * self.num_slots
        if len(self.slot_free_time) != self.num_slots or len(self.enabled) != self.num_slots:
            raise ScenarioError(f"station {self.id}: per-slot state must have {self.num_slots} entries")

    @property
    def enabled_slots(self) -> list[int]:
        return [j for j, ok in enumerate(self.enabled) if ok]

    @property
    def has_capacity(self) -> bool:
        return any(self.enabled)


@dataclass(frozen=True)
class ChargingRequest:
    id: int
    request_time: float
    demand: float
    location: GeoPoint
    max_distance: float
    window: int = 0
    beta: float = 1.0

    def __post_init__(self):
        if not 0 <= self.request_time < DAY_MINUTES:
            raise ScenarioError(f"request {self.id}: request_time {self.request_time} outside the day")
        if self.demand <= 0:
            raise ScenarioError(f"request {self.id}: demand must be > 0")
        if self.max_distance <= 0:
            raise ScenarioError(f"request {self.id}: max_distance must be > 0")
        if not 0.0 <= self.beta <= 1.0:
            raise ScenarioError(f"request {self.id}: beta must lie in [0, 1]")


def window_length_for(num_windows: int) -> float:
    if num_windows < 1 or DAY_MINUTES % num_windows:
        raise ScenarioError(f"num_windows must be a positive divisor of {DAY_MINUTES}, got {num_windows}")
    return DAY_MINUTES / num_windows


@dataclass(frozen=True)
class Scenario:
    """One simulated day. Treat as immutable; runs work on ``fresh_stations()``."""

    stations: tuple[ChargingStation, ...]
    requests: tuple[ChargingRequest, ...]
    num_windows: int = 12
    speed_kmh: float = 30.0
    alpha1: float = 1.0
    alpha2: float = 1.0
    seed: int = 0
    day: int = 0
    availability_ratio: float = 1.0
    time_hist_bins: tuple[tuple[float, float, float], ...] = ()
    num_requests_expected: int = 0

    def __post_init__(self):
        window_length_for(self.num_windows)
        ids = [s.id for s in self.stations]
        if len(set(ids)) != len(ids):
            raise ScenarioError("duplicate station id")
        if len({s.num_slots for s in self.stations}) > 1:
            raise ScenarioError("all stations must have the same number of slots")
        rids = [r.id for r in self.requests]
        if len(set(rids)) != len(rids):
            raise ScenarioError("duplicate request id")
        for r in self.requests:
            if not 0 <= r.window < self.num_windows:
                raise ScenarioError(f"request {r.id}: window {r.window} outside [0, {self.num_windows})")

    @property
    def window_length(self) -> float:
        return window_length_for(self.num_windows)

    def fresh_stations(self) -> list[ChargingStation]:
        """Deep copies of the stations with clocks and accumulators at zero."""
        out = []
        for s in self.stations:
            s = copy.deepcopy(s)
            s.slot_free_time = [0.0] * s.num_slots
            s.window_queue_time = 0.0
            out.append(s)
        return out

    def with_windows(self, num_windows: int) -> "Scenario":
        """Re-bin the same requests into ``num_windows`` windows."""
        length = window_length_for(num_windows)
        requests = tuple(replace(r, window=int(r.request_time // length)) for r in self.requests)
        return replace(self, num_windows=num_windows, requests=requests)

    def with_availability(self, ratio: float) -> "Scenario":
        """Regenerate the outage mask for ``ratio`` from this scenario's seed."""
        stations = [copy.deepcopy(s) for s in self.stations]
        apply_availability(stations, ratio, self.seed)
        return replace(self, stations=tuple(stations), availability_ratio=ratio)


def requests_in_window(scenario: Scenario, t: int) -> list[ChargingRequest]:
    """Requests of window ``t`` in first-come order (request time, then id)."""
    if not 0 <= t < scenario.num_windows:
        raise ScenarioError(f"window {t} outside [0, {scenario.num_windows})")
    return sorted((r for r in scenario.requests if r.window == t), key=lambda r: (r.request_time, r.id))


def apply_availability(stations: Sequence[ChargingStation], ratio: float, seed: int) -> None:
    """Disable ``round((1 - ratio) * total_slots)`` slots, uniformly at random.

    The slot permutation depends only on ``seed``, so the masks for different
    ratios are nested: every slot down at ratio 0.5 is also down at 0.25.
    """
    if not 0.0 <= ratio <= 1.0:
        raise ScenarioError(f"availability ratio must lie in [0, 1], got {ratio}")
    slots = [(i, j) for i, s in enumerate(stations) for j in range(s.num_slots)]
    n_down = int(round((1.0 - ratio) * len(slots)))
    order = derive_rng(seed, OUTAGE).permutation(len(slots))
    for s in stations:
        s.enabled = [True] * s.num_slots
    for k in order[:n_down]:
        i, j = slots[k]
        stations[i].enabled[j] = False


# --- ingestion ------------------------------------------------------------------

STATION_HEADER = ["id", "lat", "lon", "slots", "weight"]
REQUEST_HEADER = ["id", "start_min", "demand_min", "lat", "lon", "max_km"]


def _read_rows(path, header: list[str]) -> list[tuple[int, dict]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            got = next(reader)
        except StopIteration:
            raise ScenarioError(f"{path}: empty file") from None
        if [h.strip() for h in got] != header:
            raise ScenarioError(f"{path}: expected header {','.join(header)}, got {','.join(got)}")
        rows = []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ScenarioError(f"{path}: line {reader.line_num}: expected {len(header)} fields, got {len(row)}")
            rows.append((reader.line_num, dict(zip(header, (c.strip() for c in row)))))
    return rows


def _parse(value: str, kind, path, line: int, name: str):
    try:
        out = kind(value)
    except ValueError:
        raise ScenarioError(f"{path}: line {line}: bad {name} {value!r}") from None
    if kind is float and not math.isfinite(out):
        raise ScenarioError(f"{path}: line {line}: {name} must be finite")
    return out


def read_station_rows(path) -> list[dict]:
    """Parse a station CSV into dicts with typed ``id, lat, lon, slots, weight``."""
    rows = []
    seen = set()
    for line, raw in _read_rows(path, STATION_HEADER):
        row = {
            "id": _parse(raw["id"], int, path, line, "id"),
            "lat": _parse(raw["lat"], float, path, line, "lat"),
            "lon": _parse(raw["lon"], float, path, line, "lon"),
            "slots": _parse(raw["slots"], int, path, line, "slots"),
            "weight": _parse(raw["weight"], float, path, line, "weight"),
        }
        if not -90 <= row["lat"] <= 90 or not -180 <= row["lon"] <= 180:
            raise ScenarioError(f"{path}: line {line}: lat/lon out of range")
        if row["slots"] < 1:
            raise ScenarioError(f"{path}: line {line}: slots must be >= 1")
        if row["weight"] < 0:
            raise ScenarioError(f"{path}: line {line}: weight must be >= 0")
        if row["id"] in seen:
            raise ScenarioError(f"{path}: line {line}: duplicate station id {row['id']}")
        seen.add(row["id"])
        rows.append(row)
    if not rows:
        raise ScenarioError(f"{path}: no stations")
    return rows


def centroid(rows: Iterable[dict]) -> tuple[float, float]:
    rows = list(rows)
    return (sum(r["lat"] for r in rows) / len(rows), sum(r["lon"] for r in rows) / len(rows))


def stations_from_rows(rows: list[dict], origin: tuple[float, float] | None = None) -> list[ChargingStation]:
    origin = origin or centroid(rows)
    return [
        ChargingStation(r["id"], project(r["lat"], r["lon"], origin), r["slots"], r["weight"])
        for r in rows
    ]


def load_stations(path) -> list[ChargingStation]:
    """Load stations from CSV, projected about their own centroid, all slots idle."""
    return stations_from_rows(read_station_rows(path))


def load_requests(path, origin: tuple[float, float], num_windows: int = 12) -> list[ChargingRequest]:
    """Load requests from CSV, projected about ``origin`` (normally the station centroid)."""
    length = window_length_for(num_windows)
    out = []
    seen = set()
    for line, raw in _read_rows(path, REQUEST_HEADER):
        rid = _parse(raw["id"], int, path, line, "id")
        if rid in seen:
            raise ScenarioError(f"{path}: line {line}: duplicate request id {rid}")
        seen.add(rid)
        start = _parse(raw["start_min"], float, path, line, "start_min")
        loc = project(_parse(raw["lat"], float, path, line, "lat"), _parse(raw["lon"], float, path, line, "lon"), origin)
        try:
            out.append(ChargingRequest(
                rid, start, _parse(raw["demand_min"], float, path, line, "demand_min"), loc,
                _parse(raw["max_km"], float, path, line, "max_km"), window=int(start // length),
            ))
        except ScenarioError as err:
            raise ScenarioError(f"{path}: line {line}: {err}") from None
    return out


# --- synthetic generation -------------------------------------------------------

PARIS_BBOX = (48.816, 48.902, 2.255, 2.415)

DEFAULT_TIME_BINS = (
    (0, 360, 3.0), (360, 600, 12.0), (600, 960, 22.0),
    (960, 1200, 45.0), (1200, 1440, 18.0),
)
DEFAULT_DEMAND_BINS = ((5, 30, 40.0), (30, 60, 35.0), (60, 120, 20.0), (120, 240, 5.0))


def synthetic_station_rows(num_stations: int, seed: int, slots: int = 3, bbox=PARIS_BBOX) -> list[dict]:
    """Stations scattered over a city-sized box with heavy-tailed, west-leaning usage weights."""
    rng = derive_rng(seed, STATIONS)
    lat_lo, lat_hi, lon_lo, lon_hi = bbox
    lat = rng.uniform(lat_lo, lat_hi, num_stations)
    lon = rng.uniform(lon_lo, lon_hi, num_stations)
    west = 1.0 + (lon_hi - lon) / (lon_hi - lon_lo)
    weight = rng.gamma(1.5, 100.0, num_stations) * west
    return [
        {"id": i, "lat": float(lat[i]), "lon": float(lon[i]), "slots": slots, "weight": round(float(weight[i]), 3)}
        for i in range(num_stations)
    ]


def write_station_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STATION_HEADER)
        for r in rows:
            w.writerow([r["id"], repr(r["lat"]), repr(r["lon"]), r["slots"], repr(r["weight"])])


@dataclass
class GeneratorConfig:
    num_requests: int = 180
    stations_file: str | None = None
    num_stations: int | None = None
    slots: int = 3
    availability_ratio: float = 1.0
    time_hist_bins: list = field(default_factory=lambda: [list(b) for b in DEFAULT_TIME_BINS])
    demand_hist_bins: list = field(default_factory=lambda: [list(b) for b in DEFAULT_DEMAND_BINS])
    max_km_range: tuple[float, float] = (3.0, 10.0)
    alpha1: float = 1.0
    alpha2: float = 1.0
    num_windows: int = 12
    speed_kmh: float = 30.0
    station_rows: list | None = None

    KEYS = (
        "stations_file", "num_stations", "slots", "num_requests", "availability_ratio",
        "time_hist_bins", "demand_hist_bins", "max_km_range", "alpha1", "alpha2",
        "num_windows", "speed_kmh",
    )

    @classmethod
    def from_file(cls, path) -> "GeneratorConfig":
        path = Path(path)
        try:
            doc = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except (OSError, yaml.YAMLError) as err:
            raise ScenarioError(f"{path}: cannot read config: {err}") from None
        if not isinstance(doc, dict):
            raise ScenarioError(f"{path}: config must be a key-value document")
        unknown = sorted(set(doc) - set(cls.KEYS))
        if unknown:
            raise ScenarioError(f"{path}: unknown config key(s): {', '.join(unknown)}")
        if doc.get("stations_file") is None and doc.get("num_stations") is None:
            raise ScenarioError(f"{path}: missing required key 'stations_file' (or 'num_stations')")
        if doc.get("stations_file") is not None:
            sf = Path(doc["stations_file"])
            doc["stations_file"] = str(sf if sf.is_absolute() else path.parent / sf)
        if "max_km_range" in doc:
            doc["max_km_range"] = tuple(doc["max_km_range"])
        cfg = cls(**doc)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.num_requests < 0:
            raise ScenarioError("num_requests must be >= 0")
        if not 0.0 <= self.availability_ratio <= 1.0:
            raise ScenarioError("availability_ratio must lie in [0, 1]")
        window_length_for(self.num_windows)
        _check_bins("time_hist_bins", self.time_hist_bins, 0.0, DAY_MINUTES)
        _check_bins("demand_hist_bins", self.demand_hist_bins, 0.0, math.inf)
        lo, hi = self.max_km_range
        if not 0 < lo <= hi:
            raise ScenarioError("max_km_range must satisfy 0 < low <= high")
        for name in ("alpha1", "alpha2"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ScenarioError(f"{name} must lie in [0, 1]")
        if self.speed_kmh <= 0:
            raise ScenarioError("speed_kmh must be > 0")

    def load_station_rows(self, seed: int) -> list[dict]:
        if self.station_rows is not None:
            return self.station_rows
        if self.stations_file is not None:
            return read_station_rows(self.stations_file)
        if self.num_stations is None:
            raise ScenarioError("missing required key 'stations_file' (or 'num_stations')")
        return synthetic_station_rows(self.num_stations, seed, self.slots)


def _check_bins(name: str, bins, lo: float, hi: float) -> None:
    if not bins:
        raise ScenarioError(f"{name}: at least one bin required")
    total = 0.0
    for b in bins:
        if len(b) != 3:
            raise ScenarioError(f"{name}: bins are [start, end, mass] triples")
        start, end, mass = (float(v) for v in b)
        if not lo <= start < end <= hi:
            raise ScenarioError(f"{name}: bin [{start}, {end}) must satisfy {lo} <= start < end <= {hi}")
        if mass < 0:
            raise ScenarioError(f"{name}: negative mass")
        total += mass
    if total <= 0:
        raise ScenarioError(f"{name}: histogram must have positive total mass")


def _sample_bins(rng: np.random.Generator, bins, n: int, closed_right: bool) -> np.ndarray:
    arr = np.asarray(bins, dtype=float)
    idx = rng.choice(len(arr), size=n, p=arr[:, 2] / arr[:, 2].sum())
    u = rng.random(n)
    start, end = arr[idx, 0], arr[idx, 1]
    if closed_right:
        return end - u * (end - start)
    return start + u * (end - start)


def generate_scenario(config: GeneratorConfig, seed: int, day: int = 0) -> Scenario:
    """Sample one day of requests over the configured stations.

    Each request is placed at a station drawn with probability proportional to
    the station weight; start time and demand come from the binned histograms.
    """
    config.validate()
    rows = config.load_station_rows(seed)
    stations = stations_from_rows(rows)
    if len({s.num_slots for s in stations}) > 1:
        raise ScenarioError("all stations must have the same number of slots")
    weights = np.array([s.weight for s in stations], dtype=float)
    if weights.sum() <= 0:
        raise ScenarioError("station weights must have positive total mass")
    apply_availability(stations, config.availability_ratio, seed)

    rng = derive_rng(seed, PLACEMENT, day)
    n = config.num_requests
    where = rng.choice(len(stations), size=n, p=weights / weights.sum())
    start = _sample_bins(rng, config.time_hist_bins, n, closed_right=False)
    demand = _sample_bins(rng, config.demand_hist_bins, n, closed_right=True)
    lo, hi = config.max_km_range
    max_km = rng.uniform(lo, hi, n)

    length = window_length_for(config.num_windows)
    order = np.lexsort((np.arange(n), start))
    requests = []
    for new_id, k in enumerate(order):
        t = float(start[k])
        requests.append(ChargingRequest(
            new_id, t, float(demand[k]), stations[int(where[k])].location, float(max_km[k]),
            window=int(t // length),
        ))
    return Scenario(
        stations=tuple(stations), requests=tuple(requests), num_windows=config.num_windows,
        speed_kmh=config.speed_kmh, alpha1=config.alpha1, alpha2=config.alpha2, seed=seed, day=day,
        availability_ratio=config.availability_ratio,
        time_hist_bins=tuple(tuple(float(v) for v in b) for b in config.time_hist_bins),
        num_requests_expected=n,
    )


# --- scenario documents -----------------------------------------------------------

class _Block(str):
    """String emitted as a YAML literal block."""


class _ScenarioDumper(yaml.SafeDumper):
    pass


_ScenarioDumper.add_representer(
    _Block, lambda dumper, data: dumper.represent_scalar("tag:yaml.org,2002:str", str(data), style="|")
)


def dump_scenario(scenario: Scenario) -> str:
    """Serialize to a YAML document with the station and request tables as CSV blocks."""
    st = io.StringIO()
    w = csv.writer(st, lineterminator="\n")
    w.writerow(["id", "x_km", "y_km", "slots", "enabled", "weight"])
    for s in scenario.stations:
        w.writerow([s.id, repr(s.location.x_km), repr(s.location.y_km), s.num_slots,
                    "".join("1" if e else "0" for e in s.enabled), repr(float(s.weight))])
    rq = io.StringIO()
    w = csv.writer(rq, lineterminator="\n")
    w.writerow(["id", "start_min", "demand_min", "x_km", "y_km", "max_km"])
    for r in scenario.requests:
        w.writerow([r.id, repr(r.request_time), repr(r.demand), repr(r.location.x_km),
                    repr(r.location.y_km), repr(r.max_distance)])
    doc = {
        "format": SCENARIO_FORMAT,
        "seed": scenario.seed,
        "day": scenario.day,
        "num_windows": scenario.num_windows,
        "speed_kmh": scenario.speed_kmh,
        "alpha1": scenario.alpha1,
        "alpha2": scenario.alpha2,
        "availability_ratio": scenario.availability_ratio,
        "num_requests_expected": scenario.num_requests_expected,
        "time_hist_bins": [list(b) for b in scenario.time_hist_bins],
        "stations": _Block(st.getvalue()),
        "requests": _Block(rq.getvalue()),
    }
    return yaml.dump(doc, Dumper=_ScenarioDumper, sort_keys=False, default_flow_style=None, width=1000)


def parse_scenario(text: str, source: str = "<scenario>") -> Scenario:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ScenarioError(f"{source}: {err}") from None
    if not isinstance(doc, dict) or doc.get("format") != SCENARIO_FORMAT:
        raise ScenarioError(f"{source}: not a {SCENARIO_FORMAT} document")
    try:
        return _scenario_from_doc(doc, source)
    except ScenarioError:
        raise
    except KeyError as err:
        raise ScenarioError(f"{source}: missing field {err}") from None
    except (TypeError, ValueError) as err:
        raise ScenarioError(f"{source}: {err}") from None


def _scenario_from_doc(doc: dict, source: str) -> Scenario:
    T = int(doc["num_windows"])
    length = window_length_for(T)
    stations = []
    for row in csv.DictReader(io.StringIO(doc["stations"])):
        st = ChargingStation(int(row["id"]), GeoPoint(float(row["x_km"]), float(row["y_km"])),
                             int(row["slots"]), float(row["weight"]))
        st.enabled = [c == "1" for c in row["enabled"]]
        if len(st.enabled) != st.num_slots:
            raise ScenarioError(f"{source}: station {st.id}: enabled mask length mismatch")
        stations.append(st)
    requests = []
    for row in csv.DictReader(io.StringIO(doc["requests"])):
        t = float(row["start_min"])
        requests.append(ChargingRequest(
            int(row["id"]), t, float(row["demand_min"]), GeoPoint(float(row["x_km"]), float(row["y_km"])),
            float(row["max_km"]), window=int(t // length),
        ))
    return Scenario(
        stations=tuple(stations), requests=tuple(requests), num_windows=T,
        speed_kmh=float(doc["speed_kmh"]), alpha1=float(doc["alpha1"]), alpha2=float(doc["alpha2"]),
        seed=int(doc["seed"]), day=int(doc.get("day", 0)),
        availability_ratio=float(doc.get("availability_ratio", 1.0)),
        time_hist_bins=tuple(tuple(float(v) for v in b) for b in doc.get("time_hist_bins") or ()),
        num_requests_expected=int(doc.get("num_requests_expected", len(requests))),
    )


def load_scenario(path) -> Scenario:
    return parse_scenario(Path(path).read_text(encoding="utf-8"), str(path))
