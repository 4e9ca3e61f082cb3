"""Trainable pipeline engine and the window-wise training loop.

Training walks the stream's label windows in chronological order. At
each training window the engine predicts every labeled source's next
affinity vector from its current memory, takes a cross-entropy step
against the normalized label, and detaches memory; the window's events
are then fed in fixed-size chunks with memory detached after every chunk
except the window's last, so each loss backpropagates through exactly
one chunk of preceding events. Validation and test windows are scored
the same causal way without gradients. The best-validation parameters
are restored before the final test pass.
"""

from __future__ import annotations

import os
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from ..config import ConfigError, get_float, get_int, read_kv, write_kv
from ..events import (
    EventStream,
    assign_window,
    chronological_split,
    compute_affinity_labels,
    count_windows,
)
from ..metrics import EvalResult, evaluate_stream, ndcg_at_k
from ..pipeline import (
    Encoders,
    Formulation,
    FormulationError,
    ForwardEngine,
    NeighborIndex,
    OutOfOrderError,
    RawMessage,
    SOURCE_SIDE,
    DEST_SIDE,
)
from .autograd import Tensor, concat, log_softmax, no_grad
from .modules import GRUCell, MLP, MultiHeadAttention, NodeEncoder, ParamStore, TimeEncoder
from .optim import Adam


class TrainingError(RuntimeError):
    """Training aborted (for example on a non-finite loss)."""


class LearnableEngine(ForwardEngine):
    """Pipeline engine whose stages are trainable modules.

    Memory rows live twice: as graph-carrying tensors for backprop and as
    a plain array mirror in ``bank.states`` so generic inspection code
    sees ordinary NumPy values.
    """

    def __init__(
        self,
        formulation: Formulation,
        num_nodes: int,
        store: ParamStore,
        node_mode: str = "cosine",
    ):
        if formulation.message_fn not in ("tgn", "tgnv2"):
            raise FormulationError("LearnableEngine drives the gru-based constructions")
        if (
            formulation.embedding == "attention"
            and formulation.num_layers > 1
            and formulation.d_embed != formulation.d_mem
        ):
            raise FormulationError("stacked attention layers need d_embed == d_mem")
        placeholder = Encoders(
            w_t=np.zeros(formulation.d_time),
            w_n=np.zeros(formulation.d_node) if formulation.d_node else None,
            node_mode="zero" if formulation.d_node else "cosine",
        )
        super().__init__(formulation, num_nodes, encoders=placeholder)
        self.store = store
        self.base_dim = 2 * formulation.d_mem + formulation.d_time + formulation.d_event
        self.time_enc = TimeEncoder(store, "time_enc", formulation.d_time)
        self.node_enc = None
        if formulation.message_fn == "tgnv2":
            self.node_enc = NodeEncoder(store, "node_enc", formulation.d_node, mode=node_mode)
        segments = [("payload", self.base_dim)]
        if formulation.message_fn == "tgnv2":
            segments.append(("nodes", 2 * formulation.d_node))
        self.gru = GRUCell(store, "memory_gru", segments, formulation.d_mem)
        self.attention = []
        if formulation.embedding == "attention":
            for layer in range(1, formulation.num_layers + 1):
                in_dim = formulation.d_mem if layer == 1 else formulation.d_embed
                self.attention.append(
                    MultiHeadAttention(
                        store,
                        f"embed_attn_{layer}",
                        center_dim=in_dim,
                        neighbor_dim=in_dim + formulation.d_time + formulation.d_event,
                        out_dim=formulation.d_embed,
                    )
                )
            decode_dim = formulation.d_embed
        else:
            decode_dim = formulation.d_mem
        self.decoder = MLP(store, "decoder", decode_dim, decode_dim, num_nodes)
        self._tensor_states = [
            Tensor(np.zeros((1, formulation.d_mem))) for _ in range(num_nodes)
        ]

    # -- state management ------------------------------------------------------

    def reset_state(self) -> None:
        """Zero all memory, forget neighbors, rewind the clock. Parameters stay."""
        d = self.formulation.d_mem
        self.bank.states[:] = 0.0
        self.bank.last_update[:] = 0.0
        self._tensor_states = [Tensor(np.zeros((1, d))) for _ in range(self.num_nodes)]
        self.neighbors = NeighborIndex(self.num_nodes)
        self.now = 0.0

    def detach_states(self) -> None:
        """Cut every memory row's history; values are unchanged."""
        self._tensor_states = [state.detach() for state in self._tensor_states]

    def inference(self):
        """Context manager for graph-free stepping and prediction."""
        return no_grad()

    # -- stage overrides -----------------------------------------------------------

    def _build_messages(self, event):
        i, j, t = event.src, event.dst, event.time
        t_i, t_j = self.bank.last_update[i], self.bank.last_update[j]
        if t < t_i or t < t_j:
            raise OutOfOrderError(
                f"event at t={t} predates a recipient's last update ({max(t_i, t_j)})"
            )
        s_i, s_j = self._tensor_states[i], self._tensor_states[j]
        feature = Tensor(event.feature[None, :])
        src_parts = [s_i, s_j, self.time_enc(t - t_i), feature]
        dst_parts = [s_j, s_i, self.time_enc(t - t_j), feature]
        if self.node_enc is not None:
            phi_i, phi_j = self.node_enc(i), self.node_enc(j)
            src_parts += [phi_i, phi_j]
            dst_parts += [phi_j, phi_i]
        return (
            RawMessage(recipient=i, time=t, payload=concat(src_parts, axis=-1), origin=SOURCE_SIDE),
            RawMessage(recipient=j, time=t, payload=concat(dst_parts, axis=-1), origin=DEST_SIDE),
        )

    def _apply_updates(self, updates) -> None:
        recipients = sorted(updates)
        payloads = concat([updates[r].payload for r in recipients], axis=0)
        hidden = concat([self._tensor_states[r] for r in recipients], axis=0)
        segments = [payloads[:, 0 : self.base_dim]]
        if self.node_enc is not None:
            segments.append(payloads[:, self.base_dim :])
        new_hidden = self.gru(segments, hidden)
        for b, recipient in enumerate(recipients):
            self._tensor_states[recipient] = new_hidden[b : b + 1, :]
            self.bank.states[recipient] = new_hidden.data[b]

    def _embed(self, node: int, t: float):
        if self.formulation.embedding == "identity-readout":
            return self._tensor_states[node]
        return self._embed_layer(node, t, self.formulation.num_layers)

    def _embed_layer(self, node: int, t: float, layer: int):
        if layer == 0:
            return self._tensor_states[node]
        center = self._embed_layer(node, t, layer - 1)
        partners = self.neighbors.recent_partners(node, t, self.formulation.neighbor_cap)
        attention = self.attention[layer - 1]
        if not partners:
            return attention(center, None)
        rows = []
        for partner, event in partners:
            rows.append(
                concat(
                    [
                        self._embed_layer(partner, t, layer - 1),
                        self.time_enc(t - event.time),
                        Tensor(event.feature[None, :]),
                    ],
                    axis=-1,
                )
            )
        return attention(center, concat(rows, axis=0))

    def _decode(self, embedded):
        return self.decoder(embedded)

    # -- prediction ----------------------------------------------------------------

    def predict(self, query_sources, t: float | None = None) -> np.ndarray:
        with no_grad():
            return super().predict(query_sources, t=t)

    def predict_tensor(self, query_sources, t: float | None = None) -> Tensor:
        """Graph-carrying predictions, one row per query source."""
        if t is None:
            t = self.now
        rows = []
        for node in query_sources:
            if not (0 <= node < self.num_nodes):
                raise ValueError(f"query on unregistered node {node}")
            rows.append(self._decode(self._embed(node, t)))
        return concat(rows, axis=0)


# ---------------------------------------------------------------------------
# Configuration


_VARIANTS = ("tgn", "tgnv2")


@dataclass
class TrainConfig:
    """Everything that determines a training run, all serializable to key=value."""

    variant: str = "tgnv2"
    node_mode: str = "cosine"
    hidden_dim: int = 8
    num_layers: int = 1
    neighbor_cap: int = 10
    label_period: float = 10.0
    train_ratio: float = 0.7
    val_ratio: float = 0.15
    test_ratio: float = 0.15
    epochs: int = 5
    batch_size: int = 8
    lr: float = 0.01
    seed: int = 0
    ndcg_k: int = 10

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ConfigError(f"variant must be one of {_VARIANTS}, got {self.variant!r}")
        if self.node_mode not in ("cosine", "zero"):
            raise ConfigError(f"node_mode must be 'cosine' or 'zero', got {self.node_mode!r}")
        if self.hidden_dim < 1 or self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("hidden_dim, epochs, batch_size must be >= 1")
        if self.label_period <= 0:
            raise ConfigError("label_period must be positive")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")

    @property
    def ratios(self) -> tuple[float, float, float]:
        return (self.train_ratio, self.val_ratio, self.test_ratio)

    def to_kv(self) -> dict[str, str]:
        return {
            "variant": self.variant,
            "node_mode": self.node_mode,
            "hidden_dim": str(self.hidden_dim),
            "num_layers": str(self.num_layers),
            "neighbor_cap": str(self.neighbor_cap),
            "label_period": repr(self.label_period),
            "train_ratio": repr(self.train_ratio),
            "val_ratio": repr(self.val_ratio),
            "test_ratio": repr(self.test_ratio),
            "epochs": str(self.epochs),
            "batch_size": str(self.batch_size),
            "lr": repr(self.lr),
            "seed": str(self.seed),
            "ndcg_k": str(self.ndcg_k),
        }

    @classmethod
    def from_kv(cls, cfg: dict[str, str]) -> "TrainConfig":
        defaults = cls()
        known = set(defaults.to_kv())
        unknown = set(cfg) - known
        if unknown:
            raise ConfigError(f"unknown training keys: {sorted(unknown)}")
        return cls(
            variant=cfg.get("variant", defaults.variant),
            node_mode=cfg.get("node_mode", defaults.node_mode),
            hidden_dim=get_int(cfg, "hidden_dim", defaults.hidden_dim),
            num_layers=get_int(cfg, "num_layers", defaults.num_layers),
            neighbor_cap=get_int(cfg, "neighbor_cap", defaults.neighbor_cap),
            label_period=get_float(cfg, "label_period", defaults.label_period),
            train_ratio=get_float(cfg, "train_ratio", defaults.train_ratio),
            val_ratio=get_float(cfg, "val_ratio", defaults.val_ratio),
            test_ratio=get_float(cfg, "test_ratio", defaults.test_ratio),
            epochs=get_int(cfg, "epochs", defaults.epochs),
            batch_size=get_int(cfg, "batch_size", defaults.batch_size),
            lr=get_float(cfg, "lr", defaults.lr),
            seed=get_int(cfg, "seed", defaults.seed),
            ndcg_k=get_int(cfg, "ndcg_k", defaults.ndcg_k),
        )


def build_engine(
    cfg: TrainConfig, num_nodes: int, d_event: int = 1, store: ParamStore | None = None
) -> LearnableEngine:
    if store is None:
        store = ParamStore(cfg.seed)
    if cfg.variant == "tgn":
        formulation = Formulation.tgn(
            cfg.hidden_dim,
            d_event=d_event,
            neighbor_cap=cfg.neighbor_cap,
            num_layers=cfg.num_layers,
        )
    else:
        formulation = Formulation.tgnv2(
            cfg.hidden_dim,
            d_event=d_event,
            neighbor_cap=cfg.neighbor_cap,
            num_layers=cfg.num_layers,
        )
    return LearnableEngine(formulation, num_nodes, store, node_mode=cfg.node_mode)


def cross_entropy(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean over rows of -sum(target * log_softmax(logits))."""
    log_probs = log_softmax(logits, axis=-1)
    return -(Tensor(targets) * log_probs).sum() * (1.0 / logits.shape[0])


# ---------------------------------------------------------------------------
# The training loop


@dataclass
class TraceRow:
    epoch: int
    split: str
    ndcg: float | None
    loss: float | None


@dataclass
class TrainResult:
    config: TrainConfig
    best_epoch: int
    best_val_ndcg: float | None
    test: EvalResult
    trace: list[TraceRow] = field(default_factory=list)
    checkpoint_dir: str | None = None

    @property
    def test_ndcg(self) -> float:
        return self.test.mean


def _grouped(labels):
    grouped = defaultdict(list)
    for label in labels:
        grouped[label.window_index].append(label)
    return grouped


def train(stream: EventStream, cfg: TrainConfig, out_dir: str | None = None) -> TrainResult:
    """Train one variant on a labeled stream; optionally write artifacts.

    Writes ``metrics.csv`` (the per-epoch trace), ``checkpoint.npz`` and
    ``checkpoint.cfg`` into ``out_dir`` when given. Floats in the trace
    are written with repr, so reruns with identical inputs produce
    byte-identical files.
    """
    if len(stream) == 0:
        raise ValueError("cannot train on an empty stream")
    raw_labels = compute_affinity_labels(stream, cfg.label_period, normalize=False)
    norm_labels = compute_affinity_labels(stream, cfg.label_period, normalize=True)
    train_l, val_l, test_l = chronological_split(raw_labels, cfg.ratios)
    train_windows = {label.window_index for label in train_l}
    val_windows = {label.window_index for label in val_l}
    test_windows = {label.window_index for label in test_l}
    raw_by_window = _grouped(raw_labels)
    norm_by_window = _grouped(norm_labels)

    t0 = stream.min_time
    num_windows = count_windows(stream, cfg.label_period)
    events_by_window = defaultdict(list)
    for event in stream:
        events_by_window[assign_window(event.time, t0, cfg.label_period, num_windows)].append(event)
    last_train_window = max(train_windows) if train_windows else -1

    store = ParamStore(cfg.seed)
    engine = build_engine(cfg, stream.num_nodes, d_event=stream.feature_dim, store=store)
    optimizer = Adam(store, lr=cfg.lr)

    trace: list[TraceRow] = []
    best_val = None
    best_state = None
    best_epoch = cfg.epochs

    for epoch in range(1, cfg.epochs + 1):
        engine.reset_state()
        losses: list[float] = []
        scores = {"train": [], "val": [], "test": []}
        for w in range(num_windows):
            window_raw = raw_by_window.get(w, [])
            if window_raw:
                sources = [label.source for label in window_raw]
                start_t = float(t0 + w * cfg.label_period)
                if w in train_windows:
                    logits = engine.predict_tensor(sources, t=start_t)
                    targets = np.stack([label.affinity for label in norm_by_window[w]])
                    loss = cross_entropy(logits, targets)
                    if not np.isfinite(loss.data):
                        raise TrainingError(f"non-finite loss at epoch {epoch}, window {w}")
                    optimizer.zero_grad()
                    loss.backward()
                    optimizer.step()
                    engine.detach_states()
                    losses.append(float(loss.data))
                    for row, label in enumerate(window_raw):
                        scores["train"].append(
                            ndcg_at_k(logits.data[row], label.affinity, k=cfg.ndcg_k)
                        )
                else:
                    split = "val" if w in val_windows else "test"
                    predictions = engine.predict(sources, t=start_t)
                    for row, label in enumerate(window_raw):
                        scores[split].append(
                            ndcg_at_k(predictions[row], label.affinity, k=cfg.ndcg_k)
                        )
            batch = events_by_window.get(w, [])
            if not batch:
                continue
            if w < last_train_window:
                chunk_starts = list(range(0, len(batch), cfg.batch_size))
                for chunk_start in chunk_starts:
                    engine.step(batch[chunk_start : chunk_start + cfg.batch_size])
                    # keep only the window's final chunk in the next loss's graph
                    if chunk_start != chunk_starts[-1]:
                        engine.detach_states()
            else:
                with no_grad():
                    for chunk_start in range(0, len(batch), cfg.batch_size):
                        engine.step(batch[chunk_start : chunk_start + cfg.batch_size])

        mean_loss = float(np.mean(losses)) if losses else None
        for split in ("train", "val", "test"):
            mean_ndcg = float(np.mean(scores[split])) if scores[split] else None
            trace.append(
                TraceRow(
                    epoch=epoch,
                    split=split,
                    ndcg=mean_ndcg,
                    loss=mean_loss if split == "train" else None,
                )
            )
        if scores["val"]:
            val_mean = float(np.mean(scores["val"]))
            if best_val is None or val_mean > best_val:
                best_val = val_mean
                best_state = store.state_dict()
                best_epoch = epoch

    if best_state is not None:
        store.load_state(best_state)

    engine.reset_state()
    test_result = evaluate_stream(
        engine,
        stream,
        [label for label in raw_labels if label.window_index in test_windows],
        cfg.label_period,
        k=cfg.ndcg_k,
        batch_size=cfg.batch_size,
        windows=test_windows,
    )

    result = TrainResult(
        config=cfg,
        best_epoch=best_epoch,
        best_val_ndcg=best_val,
        test=test_result,
        trace=trace,
    )
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_trace_csv(os.path.join(out_dir, "metrics.csv"), trace)
        save_checkpoint(out_dir, engine, cfg)
        result.checkpoint_dir = out_dir
    return result


def write_trace_csv(path: str, trace) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("epoch,split,ndcg,loss\n")
        for row in trace:
            ndcg = "" if row.ndcg is None else repr(row.ndcg)
            loss = "" if row.loss is None else repr(row.loss)
            fh.write(f"{row.epoch},{row.split},{ndcg},{loss}\n")


# ---------------------------------------------------------------------------
# Checkpoints


def save_checkpoint(directory: str, engine: LearnableEngine, cfg: TrainConfig) -> None:
    os.makedirs(directory, exist_ok=True)
    engine.store.save_npz(os.path.join(directory, "checkpoint.npz"))
    manifest = cfg.to_kv()
    manifest["num_nodes"] = str(engine.num_nodes)
    manifest["d_event"] = str(engine.formulation.d_event)
    write_kv(os.path.join(directory, "checkpoint.cfg"), manifest)


def load_checkpoint(directory: str) -> tuple[LearnableEngine, TrainConfig]:
    manifest = read_kv(os.path.join(directory, "checkpoint.cfg"))
    num_nodes = get_int(manifest, "num_nodes")
    d_event = get_int(manifest, "d_event")
    cfg_kv = {k: v for k, v in manifest.items() if k not in ("num_nodes", "d_event")}
    cfg = TrainConfig.from_kv(cfg_kv)
    store = ParamStore(cfg.seed)
    engine = build_engine(cfg, num_nodes, d_event=d_event, store=store)
    store.load_npz(os.path.join(directory, "checkpoint.npz"))
    return engine, cfg
