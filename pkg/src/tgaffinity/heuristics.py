"""History-based baseline predictors over labels and raw messages.

Two families: label-history heuristics forecast a source's next affinity
vector from its past window labels (persistent carry-forward and a
moving average over the windows that exist so far), and the
message-history heuristic averages the last k interaction amounts per
(source, destination) pair, treating missing older slots as zero. The
message in the latter convention is deliberate: it makes the heuristic
agree exactly with the windowed moving-average machine.
"""

from __future__ import annotations

from collections import defaultdict, deque

import numpy as np


class LabelHistory:
    """Bounded per-source log of past window label vectors.

    Labels must be observed in window order; only the most recent ``cap``
    windows per source are retained.
    """

    def __init__(self, num_nodes: int, cap: int = 32):
        if cap < 1:
            raise ValueError("cap must be >= 1")
        self.num_nodes = int(num_nodes)
        self.cap = int(cap)
        self._per_source: dict[int, deque] = defaultdict(lambda: deque(maxlen=self.cap))

    def observe(self, label) -> None:
        self._per_source[label.source].append(np.asarray(label.affinity, dtype=np.float64))

    def recent(self, source: int, count: int) -> list[np.ndarray]:
        """Last ``count`` observed vectors for ``source``, oldest first."""
        history = self._per_source.get(source)
        if not history:
            return []
        return list(history)[-count:]

    def predict_persistent(self, source: int) -> np.ndarray:
        """Carry the most recent window's label forward; zeros with no history."""
        last = self.recent(source, 1)
        return last[0].copy() if last else np.zeros(self.num_nodes, dtype=np.float64)

    def predict_moving_average(self, source: int, k: int) -> np.ndarray:
        """Mean of the last k window labels, divided by how many actually exist."""
        if k < 1:
            raise ValueError("k must be >= 1")
        recent = self.recent(source, k)
        if not recent:
            return np.zeros(self.num_nodes, dtype=np.float64)
        return np.sum(recent, axis=0) / len(recent)


def _eligible_by_source(labels, t: float):
    """Group fully elapsed windows (window_end <= t) per source, window-ordered."""
    grouped: dict[int, list] = defaultdict(list)
    for label in labels:
        if label.window_end <= t:
            grouped[label.source].append(label)
    for source in grouped:
        grouped[source].sort(key=lambda lbl: lbl.window_index)
    return grouped


def persistent_forecast_labels(labels, t: float, query_sources, num_nodes: int) -> np.ndarray:
    """Predict each query source's next window as its latest completed label.

    Only windows fully elapsed by ``t`` count; a source with no history
    predicts all zeros. Returns a (len(query_sources), num_nodes) matrix.
    """
    grouped = _eligible_by_source(labels, t)
    out = np.zeros((len(query_sources), num_nodes), dtype=np.float64)
    for row, source in enumerate(query_sources):
        history = grouped.get(source)
        if history:
            out[row] = history[-1].affinity
    return out


def moving_average_labels(labels, t: float, query_sources, num_nodes: int, k: int) -> np.ndarray:
    """Mean of each source's last k completed window labels.

    Sources with fewer than k completed windows average over what exists;
    no history predicts zeros.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    grouped = _eligible_by_source(labels, t)
    out = np.zeros((len(query_sources), num_nodes), dtype=np.float64)
    for row, source in enumerate(query_sources):
        history = grouped.get(source)
        if history:
            recent = history[-k:]
            out[row] = np.sum([lbl.affinity for lbl in recent], axis=0) / len(recent)
    return out


class MessageHistory:
    """Bounded per-pair log of interaction amounts for the message heuristic."""

    def __init__(self, num_nodes: int, k: int):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.num_nodes = int(num_nodes)
        self.k = int(k)
        self._per_pair: dict[tuple[int, int], deque] = defaultdict(lambda: deque(maxlen=self.k))

    def observe(self, src: int, dst: int, value: float) -> None:
        self._per_pair[(src, dst)].append(float(value))

    def moving_average(self, source: int) -> np.ndarray:
        """Sum of the last k amounts per destination divided by k.

        Dividing by k rather than by the count treats absent older
        messages as zeros, the same convention as the windowed machine.
        """
        out = np.zeros(self.num_nodes, dtype=np.float64)
        for dst in range(self.num_nodes):
            values = self._per_pair.get((source, dst))
            if values:
                out[dst] = sum(values) / self.k
        return out


def moving_average_messages(events, t: float, query_sources, num_nodes: int, k: int) -> np.ndarray:
    """Moving average of the last k interaction amounts strictly before ``t``.

    Feeds every event with time < t into a fresh MessageHistory and reads
    the per-destination averages for each query source.
    """
    history = MessageHistory(num_nodes, k)
    for event in events:
        if event.time < t:
            history.observe(event.src, event.dst, event.value)
    out = np.zeros((len(query_sources), num_nodes), dtype=np.float64)
    for row, source in enumerate(query_sources):
        out[row] = history.moving_average(source)
    return out


class MessageAverageEngine:
    """Engine-shaped adapter over MessageHistory for causal stream evaluation."""

    def __init__(self, num_nodes: int, k: int):
        self.num_nodes = int(num_nodes)
        self.history = MessageHistory(num_nodes, k)
        self.now = 0.0

    def step(self, batch) -> None:
        for event in batch:
            self.history.observe(event.src, event.dst, event.value)
            self.now = max(self.now, event.time)

    def predict(self, query_sources, t: float | None = None) -> np.ndarray:
        out = np.zeros((len(query_sources), self.num_nodes), dtype=np.float64)
        for row, source in enumerate(query_sources):
            out[row] = self.history.moving_average(source)
        return out


class RandomScoreEngine:
    """Seeded uniform-random scores; the floor any useful predictor must beat."""

    def __init__(self, num_nodes: int, seed: int = 0):
        self.num_nodes = int(num_nodes)
        self._rng = np.random.default_rng(seed)

    def step(self, batch) -> None:
        pass

    def predict(self, query_sources, t: float | None = None) -> np.ndarray:
        return self._rng.random((len(query_sources), self.num_nodes))
