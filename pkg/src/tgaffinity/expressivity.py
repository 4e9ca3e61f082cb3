"""Machine-checkable expressivity results for the two message constructions.

The centerpiece is a family of paired streams over three nodes that any
pipeline built from anonymous messages plus permutation-invariant
aggregation and embedding cannot tell apart, while a fixed exact machine
(realizable once payloads carry node identities) separates them.

Stream A sends node 0's alpha values to node 1 and then its beta values
to node 2; stream B swaps the two recipients. The induced affinity
targets for node 0 differ between the streams whenever the alpha and
beta statistics differ, so collapsing the pair bounds what the anonymous
construction can express.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass

import numpy as np

from .events import Event, EventStream
from .exact import ExactEngine, ExactMachine
from .pipeline import FormulationError


def tail_statistic(values, weights) -> float:
    """Fixed-coefficient statistic of the last k values of a sequence.

    ``values`` is time-ordered (oldest first) and must hold at least
    k = len(weights) entries; weights[0] multiplies the newest value.
    """
    values = list(values)
    weights = np.atleast_1d(np.asarray(weights, dtype=np.float64))
    k = weights.shape[0]
    if len(values) < k:
        raise ValueError(f"need at least {k} values, got {len(values)}")
    return float(sum(weights[i] * float(values[-1 - i]) for i in range(k)))


class WindowedStatisticOracle:
    """Brute-force reference for the exact machines.

    Keeps the raw per-(source, destination) value lists and recomputes
    the windowed statistic directly from them, with no shared code or
    representation with the machine's block memory. Windows that are not
    yet full contribute zeros for the missing older slots, matching the
    machine's all-zero initial memory.
    """

    def __init__(self, num_nodes: int, weights):
        self.num_nodes = int(num_nodes)
        self.weights = [float(w) for w in np.atleast_1d(np.asarray(weights, dtype=np.float64))]
        self._history: dict[tuple[int, int], list[float]] = {}

    def observe(self, src: int, dst: int, value: float) -> None:
        self._history.setdefault((src, dst), []).append(float(value))

    def statistic(self, src: int, dst: int) -> float:
        values = self._history.get((src, dst), [])
        acc = 0.0
        for i, w in enumerate(self.weights):
            idx = len(values) - 1 - i
            if idx >= 0:
                acc += w * values[idx]
        return acc

    def statistics(self, src: int) -> np.ndarray:
        return np.array(
            [self.statistic(src, dst) for dst in range(self.num_nodes)], dtype=np.float64
        )


# ---------------------------------------------------------------------------
# The counterexample pair


@dataclass
class CounterexamplePair:
    """Two three-node streams identical up to swapping which node got what."""

    stream_a: EventStream
    stream_b: EventStream
    alphas: np.ndarray
    betas: np.ndarray

    @property
    def num_nodes(self) -> int:
        return 3


def build_counterexample(alphas, betas) -> CounterexamplePair:
    """Construct the recipient-swap pair from two value sequences.

    Stream A: node 0 sends alphas[i] to node 1 at times 1..len(alphas),
    then betas[i] to node 2 at the following integer times. Stream B is
    the same schedule with recipients 1 and 2 exchanged.
    """
    alphas = np.atleast_1d(np.asarray(alphas, dtype=np.float64))
    betas = np.atleast_1d(np.asarray(betas, dtype=np.float64))
    if alphas.size == 0 or betas.size == 0:
        raise ValueError("alphas and betas must be non-empty")

    def stream(first_dst: int, second_dst: int) -> EventStream:
        events = []
        t = 0.0
        for a in alphas:
            t += 1.0
            events.append(Event(src=0, dst=first_dst, time=t, feature=np.array([a])))
        for b in betas:
            t += 1.0
            events.append(Event(src=0, dst=second_dst, time=t, feature=np.array([b])))
        return EventStream(events, num_nodes=3)

    return CounterexamplePair(
        stream_a=stream(1, 2), stream_b=stream(2, 1), alphas=alphas, betas=betas
    )


# ---------------------------------------------------------------------------
# Collapse and separation checks


@dataclass
class CollapseReport:
    """Deviations measured when replaying a pair through one anonymous pipeline.

    The pipeline collapses the pair when node 0's state, embedding, and
    predicted affinity vector agree across the two streams and the states
    of nodes 1 and 2 agree after exchanging their roles.
    """

    source_state_dev: float
    swapped_state_dev: float
    embedding_dev: float
    prediction_dev: float

    @property
    def max_deviation(self) -> float:
        return max(
            self.source_state_dev,
            self.swapped_state_dev,
            self.embedding_dev,
            self.prediction_dev,
        )

    def collapsed(self, tol: float = 1e-12) -> bool:
        return self.max_deviation <= tol


def check_tgn_collapse(make_engine, pair: CounterexamplePair) -> CollapseReport:
    """Replay both streams of a pair through freshly built anonymous engines.

    ``make_engine`` must return a new engine with identical parameters on
    every call (same seeds); only engines using the anonymous message
    construction are accepted. Events are replayed one at a time and the
    measured deviations are returned for the caller to judge.
    """
    engine_a = make_engine()
    engine_b = make_engine()
    if engine_a.formulation.message_fn != "tgn":
        raise FormulationError(
            f"collapse check needs the anonymous construction, got {engine_a.formulation.message_fn!r}"
        )
    # No gradients are ever consumed here, so run under the engine's
    # inference context when it has one.
    inference = getattr(engine_a, "inference", contextlib.nullcontext)
    with inference():
        engine_a.replay(pair.stream_a, batch_size=1)
        engine_b.replay(pair.stream_b, batch_size=1)

        def dev(x, y):
            return float(np.max(np.abs(np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64))))

        states_a, states_b = engine_a.bank.states, engine_b.bank.states
        source_state_dev = dev(states_a[0], states_b[0])
        swapped_state_dev = max(dev(states_a[1], states_b[2]), dev(states_a[2], states_b[1]))
        z_a = engine_a._embed(0, engine_a.now)
        z_b = engine_b._embed(0, engine_b.now)
        embedding_dev = dev(np.asarray(z_a, dtype=np.float64), np.asarray(z_b, dtype=np.float64))
        prediction_dev = dev(engine_a.predict([0]), engine_b.predict([0]))
    return CollapseReport(
        source_state_dev=source_state_dev,
        swapped_state_dev=swapped_state_dev,
        embedding_dev=embedding_dev,
        prediction_dev=prediction_dev,
    )


@dataclass
class SeparationReport:
    """Machine predictions on a pair against the brute-force statistics."""

    prediction_a: np.ndarray
    prediction_b: np.ndarray
    expected_a: np.ndarray
    expected_b: np.ndarray

    @property
    def oracle_dev(self) -> float:
        return float(
            max(
                np.max(np.abs(self.prediction_a - self.expected_a)),
                np.max(np.abs(self.prediction_b - self.expected_b)),
            )
        )

    @property
    def gap(self) -> float:
        """How far apart the two streams' target vectors are."""
        return float(np.max(np.abs(self.expected_a - self.expected_b)))

    def separated(self, tol: float = 1e-9) -> bool:
        return self.oracle_dev <= tol and self.gap > 2 * tol


def check_tgnv2_separation(machine: ExactMachine, pair: CounterexamplePair) -> SeparationReport:
    """Replay both streams through an exact machine and compare to the oracle.

    The machine's predicted affinity vector for node 0 must match the
    brute-force windowed statistics of each stream; the two expectations
    differ whenever the alpha and beta statistics do, which is what
    separates the pair.
    """
    if machine.num_nodes != pair.num_nodes:
        raise ValueError("machine node count must match the pair (3 nodes)")

    def run(stream):
        engine = ExactEngine(machine, num_nodes=pair.num_nodes)
        engine.replay(stream, batch_size=1)
        oracle = WindowedStatisticOracle(pair.num_nodes, machine.weights)
        for event in stream:
            oracle.observe(event.src, event.dst, event.value)
        return engine.predict([0])[0], oracle.statistics(0)

    prediction_a, expected_a = run(pair.stream_a)
    prediction_b, expected_b = run(pair.stream_b)
    return SeparationReport(
        prediction_a=prediction_a,
        prediction_b=prediction_b,
        expected_a=expected_a,
        expected_b=expected_b,
    )
