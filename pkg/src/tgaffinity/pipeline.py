"""The five-stage event pipeline: message, aggregate, memory update, embed, decode.

The engine is parameterized by a Formulation naming the variant of each
stage. Two message constructions are supported for learnable pipelines:
the anonymous one (payloads carry states, a time encoding, and the event
feature, but no identities) and the source-target-identified one, which
additionally appends node-index encodings of both endpoints. A third
construction feeds the exact statistic machines with ``[value, dst, tag]``
triples.

Concrete memory/embedding/decoding stages live in subclasses: the exact
machines in :mod:`tgaffinity.exact` and the trainable GRU/attention/MLP
stack in :mod:`tgaffinity.nn.training`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, get_int
from .events import Event

SOURCE_SIDE = "src"
DEST_SIDE = "dst"

_MESSAGE_FNS = ("tgn", "tgnv2", "exact")
_AGGREGATORS = ("last", "concat", "identity")
_MEMORY_UPDATERS = ("gru", "exact-linear")
_EMBEDDINGS = ("identity-readout", "attention")
_DECODERS = ("mlp", "exact-readout")


class OutOfOrderError(ValueError):
    """An event arrived older than already-processed state allows."""


class FormulationError(ValueError):
    """Inconsistent or unsupported stage combination."""


# ---------------------------------------------------------------------------
# Encoders


def time_encode(delta_t: float, w_t: np.ndarray) -> np.ndarray:
    """Elementwise cosine of the frequency vector scaled by the time gap."""
    return np.cos(np.asarray(w_t, dtype=np.float64) * float(delta_t))


def node_encode(index: int, w_n: np.ndarray | None, mode: str = "cosine") -> np.ndarray:
    """Encode a node index as a vector.

    Modes: ``cosine`` is cos(w_n * i); ``identity`` returns the raw index
    as a 1-vector (used by the exact machines); ``zero`` returns a zero
    vector of w_n's length, which switches identification off entirely.
    """
    if mode == "identity":
        return np.array([float(index)], dtype=np.float64)
    if w_n is None:
        raise ValueError(f"node encoder mode {mode!r} requires frequencies w_n")
    w_n = np.asarray(w_n, dtype=np.float64)
    if mode == "cosine":
        return np.cos(w_n * float(index))
    if mode == "zero":
        return np.zeros(w_n.shape[0], dtype=np.float64)
    raise ValueError(f"unknown node encoder mode {mode!r}")


@dataclass
class Encoders:
    """Frequency vectors of the time and node-index encoders.

    Fixed once constructed for exact machines; the trainable pipeline
    owns live copies inside its parameter store and mirrors them here.
    """

    w_t: np.ndarray
    w_n: np.ndarray | None = None
    node_mode: str = "cosine"

    def __post_init__(self):
        self.w_t = np.atleast_1d(np.asarray(self.w_t, dtype=np.float64))
        if self.w_n is not None:
            self.w_n = np.atleast_1d(np.asarray(self.w_n, dtype=np.float64))

    def time(self, delta_t: float) -> np.ndarray:
        return time_encode(delta_t, self.w_t)

    def node(self, index: int) -> np.ndarray:
        return node_encode(index, self.w_n, self.node_mode)

    @property
    def node_dim(self) -> int:
        if self.node_mode == "identity":
            return 1
        return 0 if self.w_n is None else self.w_n.shape[0]


# ---------------------------------------------------------------------------
# Core pipeline types


class MemoryBank:
    """Per-node state vectors plus the time each node was last updated.

    States start as zero vectors at time 0.
    """

    def __init__(self, num_nodes: int, dim: int):
        self.states = np.zeros((num_nodes, dim), dtype=np.float64)
        self.last_update = np.zeros(num_nodes, dtype=np.float64)

    @property
    def num_nodes(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def copy(self) -> "MemoryBank":
        bank = MemoryBank(self.num_nodes, self.dim)
        bank.states[:] = self.states
        bank.last_update[:] = self.last_update
        return bank


@dataclass
class RawMessage:
    """One payload addressed to ``recipient``, tagged with which side built it."""

    recipient: int
    time: float
    payload: np.ndarray
    origin: str  # SOURCE_SIDE or DEST_SIDE

    def __post_init__(self):
        if self.origin not in (SOURCE_SIDE, DEST_SIDE):
            raise ValueError(f"unknown origin tag {self.origin!r}")


@dataclass
class AggregatedMessage:
    """Aggregator output: one payload with per-message boundaries kept recoverable."""

    payload: np.ndarray
    boundaries: list[int]  # cumulative end offsets of the packed messages
    time: float

    def unpack(self):
        start = 0
        for end in self.boundaries:
            yield self.payload[start:end]
            start = end


@dataclass
class Formulation:
    """Names the variant used at every pipeline stage, plus shared dimensions.

    ``num_layers`` is the message-passing depth of the embedding stage and
    ``neighbor_cap`` bounds how many recent partners each hop considers.
    Stage combinations and dimensions are validated at construction.
    """

    message_fn: str
    aggregator: str
    memory_updater: str
    embedding: str
    decoder: str
    num_layers: int = 1
    neighbor_cap: int = 10
    d_mem: int = 0
    d_time: int = 0
    d_node: int = 0
    d_event: int = 1
    d_embed: int = 0

    def __post_init__(self):
        def expect(value, allowed, label):
            if value not in allowed:
                raise FormulationError(f"{label} must be one of {allowed}, got {value!r}")

        expect(self.message_fn, _MESSAGE_FNS, "message_fn")
        expect(self.aggregator, _AGGREGATORS, "aggregator")
        expect(self.memory_updater, _MEMORY_UPDATERS, "memory_updater")
        expect(self.embedding, _EMBEDDINGS, "embedding")
        expect(self.decoder, _DECODERS, "decoder")
        if self.num_layers < 1:
            raise FormulationError("num_layers must be >= 1")
        if self.neighbor_cap < 1:
            raise FormulationError("neighbor_cap must be >= 1")
        if self.message_fn == "exact":
            if self.memory_updater != "exact-linear":
                raise FormulationError("exact messages require the exact-linear memory")
            if self.embedding != "identity-readout" or self.decoder != "exact-readout":
                raise FormulationError("exact machines read memory out directly")
            if self.aggregator not in ("concat", "identity"):
                raise FormulationError("exact messages aggregate by concat or identity")
        else:
            if self.memory_updater != "gru":
                raise FormulationError(f"{self.message_fn} requires the gru memory updater")
            if self.decoder != "mlp":
                raise FormulationError(f"{self.message_fn} decodes with the mlp")
            if self.aggregator != "last":
                raise FormulationError("the gru memory consumes last-message aggregation")
            if self.d_mem < 1 or self.d_time < 1 or self.d_event < 1:
                raise FormulationError("d_mem, d_time, d_event must be positive")
            if self.embedding == "attention" and self.d_embed < 1:
                raise FormulationError("attention embedding needs d_embed >= 1")
            if self.message_fn == "tgnv2" and self.d_node < 1:
                raise FormulationError("tgnv2 needs d_node >= 1")
            if self.message_fn == "tgn" and self.d_node != 0:
                raise FormulationError("tgn payloads carry no node encoding; set d_node=0")

    @property
    def payload_dim(self) -> int:
        if self.message_fn == "exact":
            return 3  # value, destination index, origin tag
        base = 2 * self.d_mem + self.d_time + self.d_event
        if self.message_fn == "tgnv2":
            base += 2 * self.d_node
        return base

    @classmethod
    def tgn(cls, d: int, d_event: int = 1, neighbor_cap: int = 10, num_layers: int = 1):
        return cls(
            message_fn="tgn",
            aggregator="last",
            memory_updater="gru",
            embedding="attention",
            decoder="mlp",
            num_layers=num_layers,
            neighbor_cap=neighbor_cap,
            d_mem=d,
            d_time=d,
            d_node=0,
            d_event=d_event,
            d_embed=d,
        )

    @classmethod
    def tgnv2(cls, d: int, d_event: int = 1, neighbor_cap: int = 10, num_layers: int = 1):
        f = cls.tgn(d, d_event=d_event, neighbor_cap=neighbor_cap, num_layers=num_layers)
        f.message_fn = "tgnv2"
        f.d_node = d
        f.__post_init__()
        return f

    @classmethod
    def exact(cls, d_mem: int, aggregator: str = "concat"):
        return cls(
            message_fn="exact",
            aggregator=aggregator,
            memory_updater="exact-linear",
            embedding="identity-readout",
            decoder="exact-readout",
            d_mem=d_mem,
        )

    def to_config(self) -> dict[str, str]:
        return {
            "message_fn": self.message_fn,
            "aggregator": self.aggregator,
            "memory": self.memory_updater,
            "embedding": self.embedding,
            "decoder": self.decoder,
            "num_layers": str(self.num_layers),
            "neighbor_cap": str(self.neighbor_cap),
            "d_mem": str(self.d_mem),
            "d_time": str(self.d_time),
            "d_node": str(self.d_node),
            "d_event": str(self.d_event),
            "d_embed": str(self.d_embed),
        }

    @classmethod
    def from_config(cls, cfg: dict[str, str]) -> "Formulation":
        known = {
            "message_fn", "aggregator", "memory", "embedding", "decoder",
            "num_layers", "neighbor_cap", "d_mem", "d_time", "d_node",
            "d_event", "d_embed",
        }
        unknown = set(cfg) - known
        if unknown:
            raise ConfigError(f"unknown formulation keys: {sorted(unknown)}")
        return cls(
            message_fn=cfg.get("message_fn", "tgn"),
            aggregator=cfg.get("aggregator", "last"),
            memory_updater=cfg.get("memory", "gru"),
            embedding=cfg.get("embedding", "attention"),
            decoder=cfg.get("decoder", "mlp"),
            num_layers=get_int(cfg, "num_layers", 1),
            neighbor_cap=get_int(cfg, "neighbor_cap", 10),
            d_mem=get_int(cfg, "d_mem", 0),
            d_time=get_int(cfg, "d_time", 0),
            d_node=get_int(cfg, "d_node", 0),
            d_event=get_int(cfg, "d_event", 1),
            d_embed=get_int(cfg, "d_embed", 0),
        )


# ---------------------------------------------------------------------------
# Message construction


def build_messages_tgn(event: Event, bank: MemoryBank, encoders: Encoders):
    """Anonymous message pair for one interaction.

    Source side packs (s_src, s_dst, time_enc, feature); the destination
    side swaps the two states. Neither payload contains any function of
    the endpoint identities, so swapping which nodes interact while
    keeping states and features fixed leaves the payload multiset
    unchanged.
    """
    i, j, t = event.src, event.dst, event.time
    t_i, t_j = bank.last_update[i], bank.last_update[j]
    if t < t_i or t < t_j:
        raise OutOfOrderError(
            f"event at t={t} predates a recipient's last update ({max(t_i, t_j)})"
        )
    s_i, s_j = bank.states[i], bank.states[j]
    src_payload = np.concatenate([s_i, s_j, encoders.time(t - t_i), event.feature])
    dst_payload = np.concatenate([s_j, s_i, encoders.time(t - t_j), event.feature])
    return (
        RawMessage(recipient=i, time=t, payload=src_payload, origin=SOURCE_SIDE),
        RawMessage(recipient=j, time=t, payload=dst_payload, origin=DEST_SIDE),
    )


def build_messages_tgnv2(event: Event, bank: MemoryBank, encoders: Encoders):
    """Source-target-identified message pair.

    Same as the anonymous construction, with each payload additionally
    carrying the encoded index of its recipient followed by the encoded
    index of the counterparty.
    """
    src_msg, dst_msg = build_messages_tgn(event, bank, encoders)
    phi_src = encoders.node(event.src)
    phi_dst = encoders.node(event.dst)
    src_msg.payload = np.concatenate([src_msg.payload, phi_src, phi_dst])
    dst_msg.payload = np.concatenate([dst_msg.payload, phi_dst, phi_src])
    return src_msg, dst_msg


def build_messages_exact(event: Event, bank: MemoryBank):
    """Message pair for the exact machines: (value, counterparty index, origin tag).

    The tag's last slot is nonzero exactly when the message came from the
    destination side, so a downstream filter can drop those.
    """
    i, j, t = event.src, event.dst, event.time
    if t < bank.last_update[i] or t < bank.last_update[j]:
        raise OutOfOrderError(f"event at t={t} predates a recipient's last update")
    src_payload = np.array([event.value, float(j), 0.0])
    dst_payload = np.array([event.value, float(i), 1.0])
    return (
        RawMessage(recipient=i, time=t, payload=src_payload, origin=SOURCE_SIDE),
        RawMessage(recipient=j, time=t, payload=dst_payload, origin=DEST_SIDE),
    )


def build_message_node_event(*_args, **_kwargs):
    """Node-event messages are unsupported; interaction events are the only input."""
    raise NotImplementedError("node events are not supported by this pipeline")


def aggregate(messages, mode: str) -> AggregatedMessage:
    """Collapse one recipient's messages into a single payload.

    ``last`` keeps the latest message (ties: the later sequence position
    wins). ``concat`` packs all payloads in time order with recoverable
    boundaries. ``identity`` requires exactly one message.
    """
    if not messages:
        raise ValueError("aggregate requires at least one message")
    if mode == "last":
        best = messages[0]
        for msg in messages[1:]:
            if msg.time >= best.time:
                best = msg
        return AggregatedMessage(
            payload=best.payload, boundaries=[best.payload.shape[-1]], time=best.time
        )
    if mode == "concat":
        ordered = sorted(messages, key=lambda m: m.time)  # stable: ties keep order
        payload = np.concatenate([m.payload for m in ordered])
        boundaries = list(np.cumsum([len(m.payload) for m in ordered]))
        return AggregatedMessage(payload=payload, boundaries=boundaries, time=ordered[-1].time)
    if mode == "identity":
        if len(messages) != 1:
            raise ValueError(f"identity aggregation expects exactly 1 message, got {len(messages)}")
        msg = messages[0]
        return AggregatedMessage(
            payload=msg.payload, boundaries=[msg.payload.shape[-1]], time=msg.time
        )
    raise ValueError(f"unknown aggregation mode {mode!r}")


# ---------------------------------------------------------------------------
# Temporal neighborhoods


class NeighborIndex:
    """Per-node log of past interactions, for neighborhood queries.

    Events must be added in non-decreasing time order (the engine's
    processing order guarantees this).
    """

    def __init__(self, num_nodes: int):
        self._log: list[list[tuple[float, int, Event]]] = [[] for _ in range(num_nodes)]

    def add(self, event: Event) -> None:
        self._log[event.src].append((event.time, event.dst, event))
        self._log[event.dst].append((event.time, event.src, event))

    def recent_partners(self, node: int, t: float, cap: int):
        """Up to ``cap`` distinct partners of ``node`` from events at time <= t,
        most recent first, each paired with the latest connecting event."""
        seen: set[int] = set()
        out = []
        log = self._log[node]
        for idx in range(len(log) - 1, -1, -1):
            when, partner, event = log[idx]
            if when > t:
                continue
            if partner in seen:
                continue
            seen.add(partner)
            out.append((partner, event))
            if len(out) >= cap:
                break
        return out


def temporal_neighborhood(index: NeighborIndex, node: int, t: float, num_layers: int, cap: int):
    """Recent interaction partners of ``node`` up to ``num_layers`` hops.

    Depth 1 takes the most recent <= cap distinct partners; deeper hops
    expand each collected node the same way. Nodes already collected
    (including the center) are not revisited. Returns (neighbor, event)
    pairs where the event is the most recent one connecting the pair.
    """
    if num_layers < 1:
        raise ValueError("num_layers must be >= 1")
    visited = {node}
    result: list[tuple[int, Event]] = []
    frontier = [node]
    for _ in range(num_layers):
        next_frontier = []
        for current in frontier:
            for partner, event in index.recent_partners(current, t, cap):
                if partner in visited:
                    continue
                visited.add(partner)
                result.append((partner, event))
                next_frontier.append(partner)
        frontier = next_frontier
        if not frontier:
            break
    return result


# ---------------------------------------------------------------------------
# The engine


class ForwardEngine:
    """Runs batches through message construction, aggregation, and memory update.

    Subclasses provide the memory updater and the embed/decode stages.
    A batch must be internally time-ordered and must not predate earlier
    processing; batch boundaries never split an event.
    """

    def __init__(self, formulation: Formulation, num_nodes: int, encoders: Encoders | None = None):
        self.formulation = formulation
        self.num_nodes = num_nodes
        self.encoders = encoders
        self.bank = MemoryBank(num_nodes, formulation.d_mem)
        self.neighbors = NeighborIndex(num_nodes)
        self.now = 0.0
        if formulation.message_fn in ("tgn", "tgnv2") and encoders is None:
            raise FormulationError(f"{formulation.message_fn} requires encoders")

    # -- stage dispatch ----------------------------------------------------

    def _build_messages(self, event: Event):
        fn = self.formulation.message_fn
        if fn == "tgn":
            return build_messages_tgn(event, self.bank, self.encoders)
        if fn == "tgnv2":
            return build_messages_tgnv2(event, self.bank, self.encoders)
        return build_messages_exact(event, self.bank)

    def _collect_messages(self, batch):
        messages = []
        for event in batch:
            messages.extend(self._build_messages(event))
        return messages

    def _apply_updates(self, updates: dict[int, AggregatedMessage]) -> None:
        raise NotImplementedError

    def _embed(self, node: int, t: float):
        raise NotImplementedError

    def _decode(self, embedded):
        raise NotImplementedError

    # -- public surface ------------------------------------------------------

    def step(self, batch) -> None:
        """Process one batch: build, aggregate, update memory, index events."""
        if not batch:
            return
        times = [e.time for e in batch]
        if any(b < a for a, b in zip(times, times[1:])):
            raise OutOfOrderError("batch events must be time-ordered")
        if times[0] < self.now:
            raise OutOfOrderError(
                f"batch starts at t={times[0]} before already-processed t={self.now}"
            )
        for event in batch:
            if not (0 <= event.src < self.num_nodes and 0 <= event.dst < self.num_nodes):
                raise ValueError(f"event references unregistered node: {event}")
        messages = self._collect_messages(batch)
        grouped: dict[int, list[RawMessage]] = {}
        for msg in messages:
            grouped.setdefault(msg.recipient, []).append(msg)
        updates = {
            recipient: aggregate(grouped[recipient], self.formulation.aggregator)
            for recipient in sorted(grouped)
        }
        self._apply_updates(updates)
        for recipient, agg in updates.items():
            self.bank.last_update[recipient] = agg.time
        for event in batch:
            self.neighbors.add(event)
        self.now = max(self.now, times[-1])

    def predict(self, query_sources, t: float | None = None) -> np.ndarray:
        """Affinity scores over all destinations for each query source."""
        if t is None:
            t = self.now
        out = np.empty((len(query_sources), self.num_nodes), dtype=np.float64)
        for row, node in enumerate(query_sources):
            if not (0 <= node < self.num_nodes):
                raise ValueError(f"query on unregistered node {node}")
            out[row] = np.asarray(self._decode(self._embed(node, t)), dtype=np.float64)
        return out

    def forward_step(self, batch, query_sources) -> np.ndarray:
        """One engine step followed by predictions for the query sources.

        An empty batch leaves memory untouched and predicts from the
        current state.
        """
        self.step(batch)
        return self.predict(query_sources)

    def replay(self, events, batch_size: int = 1) -> None:
        """Feed a whole event sequence through ``step`` in fixed-size batches."""
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        events = list(events)
        for start in range(0, len(events), batch_size):
            self.step(events[start : start + batch_size])
