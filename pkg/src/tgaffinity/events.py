"""Event streams, node registration, affinity labels, and chronological splits.

An interaction stream is the only input the rest of the library consumes:
timestamped directed events ``src -> dst`` carrying a feature vector. Raw
node identifiers from input files are mapped to dense indices in order of
first appearance so that every downstream structure can be an array.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError


class IngestError(ValueError):
    """A CSV row could not be parsed; the message names the line."""


class NodeRegistry:
    """Maps opaque raw identifiers to dense indices 0, 1, 2, ...

    Assignment depends only on the sequence of raw ids seen so far: the
    first distinct id gets 0, the next distinct id gets 1, and repeats
    return their existing index.
    """

    def __init__(self):
        self._index: dict[str, int] = {}
        self._raw_ids: list[str] = []

    def register(self, raw_id) -> int:
        key = str(raw_id)
        existing = self._index.get(key)
        if existing is not None:
            return existing
        index = len(self._raw_ids)
        self._index[key] = index
        self._raw_ids.append(key)
        return index

    def index_of(self, raw_id) -> int:
        return self._index[str(raw_id)]

    @property
    def raw_ids(self) -> list[str]:
        return list(self._raw_ids)

    def __len__(self) -> int:
        return len(self._raw_ids)

    def __contains__(self, raw_id) -> bool:
        return str(raw_id) in self._index


@dataclass
class Event:
    """One directed interaction: ``src`` sent ``dst`` a feature vector at ``time``."""

    src: int
    dst: int
    time: float
    feature: np.ndarray

    def __post_init__(self):
        self.feature = np.atleast_1d(np.asarray(self.feature, dtype=np.float64))

    @property
    def value(self) -> float:
        """First feature component, the scalar interaction amount."""
        return float(self.feature[0])

    def __eq__(self, other):
        if not isinstance(other, Event):
            return NotImplemented
        return (
            self.src == other.src
            and self.dst == other.dst
            and self.time == other.time
            and np.array_equal(self.feature, other.feature)
        )


class EventStream:
    """A time-sorted sequence of events over a fixed node set.

    Events are sorted stably by timestamp at construction, so ties keep
    their ingestion order and replays are deterministic. ``raw_ids`` maps
    each dense index back to the external identifier it came from.
    """

    def __init__(self, events, num_nodes: int, raw_ids=None, feature_dim=None):
        events = list(events)
        events.sort(key=lambda e: e.time)  # stable
        if events:
            dims = {e.feature.shape[0] for e in events}
            if len(dims) != 1:
                raise ValueError(f"inconsistent feature dimensions: {sorted(dims)}")
            inferred_dim = dims.pop()
        else:
            inferred_dim = feature_dim if feature_dim is not None else 1
        if feature_dim is not None and feature_dim != inferred_dim:
            raise ValueError(
                f"feature_dim={feature_dim} but events carry dimension {inferred_dim}"
            )
        for e in events:
            if not (0 <= e.src < num_nodes and 0 <= e.dst < num_nodes):
                raise ValueError(f"event references node outside [0, {num_nodes}): {e}")
            if e.time < 0:
                raise ValueError(f"negative timestamp: {e.time}")
        self.events: list[Event] = events
        self.num_nodes = int(num_nodes)
        self.feature_dim = inferred_dim
        if raw_ids is None:
            raw_ids = [str(i) for i in range(num_nodes)]
        if len(raw_ids) != num_nodes:
            raise ValueError("raw_ids length must equal num_nodes")
        self.raw_ids = list(raw_ids)
        self._arrays = None

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def __getitem__(self, i):
        return self.events[i]

    def as_arrays(self):
        """(src, dst, time, value) as parallel NumPy arrays; cached."""
        if self._arrays is None:
            n = len(self.events)
            src = np.empty(n, dtype=np.int64)
            dst = np.empty(n, dtype=np.int64)
            t = np.empty(n, dtype=np.float64)
            val = np.empty(n, dtype=np.float64)
            for i, e in enumerate(self.events):
                src[i] = e.src
                dst[i] = e.dst
                t[i] = e.time
                val[i] = e.value
            self._arrays = (src, dst, t, val)
        return self._arrays

    @property
    def min_time(self) -> float:
        return self.events[0].time

    @property
    def max_time(self) -> float:
        return self.events[-1].time


@dataclass
class StaticNodeFeatures:
    """Per-node constant feature vectors; defaults to all-zero."""

    vectors: np.ndarray  # shape (num_nodes, dim)

    @classmethod
    def zeros(cls, num_nodes: int, dim: int = 1) -> "StaticNodeFeatures":
        return cls(np.zeros((num_nodes, dim), dtype=np.float64))

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2:
            raise ValueError("vectors must be a (num_nodes, dim) array")


@dataclass
class AffinityLabel:
    """Ground-truth affinity of ``source`` toward every destination over one window.

    ``affinity[v]`` sums the interaction amounts of source->v events with
    timestamps in [window_start, window_end). When ``normalized`` the
    vector was divided by its L1 mass (an all-zero vector stays zero).
    """

    source: int
    window_start: float
    window_end: float
    affinity: np.ndarray
    normalized: bool = False
    window_index: int = 0

    def __post_init__(self):
        self.affinity = np.asarray(self.affinity, dtype=np.float64)
        if self.window_end <= self.window_start:
            raise ValueError("window_end must exceed window_start")


# ---------------------------------------------------------------------------
# CSV ingestion and serialization


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for event CSV files.

    Defaults to the header ``src,dst,time,weight``; any column may be
    renamed through a key=value config with keys ``src``, ``dst``,
    ``time`` and either ``weight`` (single feature column) or
    ``features`` (comma-separated list).
    """

    src: str = "src"
    dst: str = "dst"
    time: str = "time"
    features: tuple = ("weight",)

    @classmethod
    def from_config(cls, cfg: dict[str, str]) -> "CsvSchema":
        known = {"src", "dst", "time", "weight", "features"}
        unknown = set(cfg) - known
        if unknown:
            raise ConfigError(f"unknown schema keys: {sorted(unknown)}")
        if "features" in cfg and "weight" in cfg:
            raise ConfigError("give either 'weight' or 'features', not both")
        if "features" in cfg:
            feats = tuple(tok.strip() for tok in cfg["features"].split(",") if tok.strip())
            if not feats:
                raise ConfigError("'features' must name at least one column")
        elif "weight" in cfg:
            feats = (cfg["weight"],)
        else:
            feats = ("weight",)
        return cls(
            src=cfg.get("src", "src"),
            dst=cfg.get("dst", "dst"),
            time=cfg.get("time", "time"),
            features=feats,
        )


def ingest_csv(path, schema: CsvSchema | None = None) -> EventStream:
    """Read an event CSV (header row required) into a sorted EventStream.

    Nodes are registered in row order (src then dst per row), timestamps
    may arrive out of order and are sorted stably. A malformed row raises
    IngestError naming its 1-based line number (the header is line 1).
    """
    schema = schema or CsvSchema()
    registry = NodeRegistry()
    events: list[Event] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError("line 1: missing header row") from None
        header = [h.strip() for h in header]
        needed = [schema.src, schema.dst, schema.time, *schema.features]
        try:
            cols = {name: header.index(name) for name in needed}
        except ValueError as exc:
            raise IngestError(f"header is missing a required column: {exc}") from None
        width = len(header)
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != width:
                raise IngestError(
                    f"line {lineno}: expected {width} fields, got {len(row)}"
                )
            try:
                t = float(row[cols[schema.time]])
                feature = np.array(
                    [float(row[cols[name]]) for name in schema.features],
                    dtype=np.float64,
                )
            except ValueError:
                raise IngestError(f"line {lineno}: could not parse numeric field") from None
            if t < 0:
                raise IngestError(f"line {lineno}: negative timestamp {t}")
            src = registry.register(row[cols[schema.src]])
            dst = registry.register(row[cols[schema.dst]])
            events.append(Event(src=src, dst=dst, time=t, feature=feature))
    return EventStream(
        events,
        num_nodes=len(registry),
        raw_ids=registry.raw_ids,
        feature_dim=len(schema.features),
    )


def write_csv(stream: EventStream, path, schema: CsvSchema | None = None) -> None:
    """Serialize a stream back to the ingestion CSV format, in event order.

    Floats are written with repr so re-ingesting reproduces the stream
    exactly.
    """
    if schema is None:
        if stream.feature_dim == 1:
            feats = ("weight",)
        else:
            feats = ("weight",) + tuple(f"f{i}" for i in range(1, stream.feature_dim))
        schema = CsvSchema(features=feats)
    if len(schema.features) != stream.feature_dim:
        raise ValueError("schema feature columns do not match stream feature_dim")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([schema.src, schema.dst, schema.time, *schema.features])
        for e in stream.events:
            writer.writerow(
                [
                    stream.raw_ids[e.src],
                    stream.raw_ids[e.dst],
                    repr(e.time),
                    *[repr(float(x)) for x in e.feature],
                ]
            )


def labels_to_csv(labels, path) -> None:
    """Write labels as ``source,window_start,dst,value`` rows (nonzero entries only)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["source", "window_start", "dst", "value"])
        for label in labels:
            for dst in np.nonzero(label.affinity)[0]:
                writer.writerow(
                    [label.source, repr(label.window_start), int(dst), repr(float(label.affinity[dst]))]
                )


# ---------------------------------------------------------------------------
# Labels and splits


def assign_window(time: float, t0: float, period: float, num_windows: int) -> int:
    """Index of the half-open window [t0 + w*period, t0 + (w+1)*period) holding ``time``.

    Clamped to the last window so float round-up at the stream's maximum
    timestamp cannot fall outside the label range.
    """
    w = int(math.floor((time - t0) / period))
    return min(w, num_windows - 1)


def count_windows(stream: EventStream, period: float) -> int:
    return int(math.floor((stream.max_time - stream.min_time) / period)) + 1


def compute_affinity_labels(stream: EventStream, period: float, normalize: bool = False):
    """Aggregate a stream into per-window, per-source affinity vectors.

    The span [min_time, max_time] is cut into consecutive half-open
    windows [start, start + period); the trailing partial window is kept.
    For every window and every source with at least one outgoing event in
    it, the label's entry for destination v is the sum of interaction
    amounts (first feature component) of src->v events in the window.
    With ``normalize`` each vector is divided by its L1 mass.
    """
    if period <= 0:
        raise ValueError("period must be positive")
    if len(stream) == 0:
        return []
    t0 = stream.min_time
    num_windows = count_windows(stream, period)
    # {(window, src): vector}; dict order follows first touch, re-sorted below.
    acc: dict[tuple[int, int], np.ndarray] = {}
    for e in stream.events:
        w = assign_window(e.time, t0, period, num_windows)
        key = (w, e.src)
        vec = acc.get(key)
        if vec is None:
            vec = np.zeros(stream.num_nodes, dtype=np.float64)
            acc[key] = vec
        vec[e.dst] += e.value
    labels = []
    for (w, src) in sorted(acc):
        vec = acc[(w, src)]
        if normalize:
            mass = float(np.sum(np.abs(vec)))
            if mass > 0:
                vec = vec / mass
        labels.append(
            AffinityLabel(
                source=src,
                window_start=t0 + w * period,
                window_end=t0 + (w + 1) * period,
                affinity=vec,
                normalized=normalize,
                window_index=w,
            )
        )
    return labels


def chronological_split(labels, ratios=(0.7, 0.15, 0.15)):
    """Partition labels into train/val/test by window order, never shuffled.

    Window counts come from floor(W * ratio) per split with leftover
    windows assigned by largest fractional remainder (remainder ties go to
    the later split). Every training window precedes every validation
    window, which precedes every test window.
    """
    if len(ratios) != 3:
        raise ValueError("ratios must have exactly three entries")
    if any(r <= 0 for r in ratios):
        raise ValueError("ratios must be positive")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    if not labels:
        return [], [], []
    windows = sorted({label.window_index for label in labels})
    total = len(windows)
    quotas = [total * r for r in ratios]
    counts = [int(math.floor(q)) for q in quotas]
    leftover = total - sum(counts)
    by_remainder = sorted(range(3), key=lambda i: (quotas[i] - counts[i], i), reverse=True)
    for i in by_remainder[:leftover]:
        counts[i] += 1
    train_set = set(windows[: counts[0]])
    val_set = set(windows[counts[0] : counts[0] + counts[1]])
    train, val, test = [], [], []
    for label in labels:
        if label.window_index in train_set:
            train.append(label)
        elif label.window_index in val_set:
            val.append(label)
        else:
            test.append(label)
    return train, val, test
