"""Trainable building blocks: parameter store, GRU cell, attention, MLP, encoders.

Every parameter is drawn from a generator seeded by (store seed, name),
so a parameter's initial value depends only on its name and the global
seed, never on creation order. Two pipelines sharing a seed therefore
agree exactly on every parameter they have in common, which is what
makes the degenerate-encoder comparison between the two message
constructions reproducible down to the bit.
"""

from __future__ import annotations

import zlib

import numpy as np

from .autograd import Tensor, concat, softmax


class ParamStore:
    """Named trainable tensors with per-name deterministic initialization."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._params: dict[str, Tensor] = {}

    def param(self, name: str, shape: tuple, scale: float) -> Tensor:
        """Get or create a parameter, uniform in [-scale, scale]."""
        existing = self._params.get(name)
        if existing is not None:
            if existing.data.shape != tuple(shape):
                raise ValueError(
                    f"parameter {name!r} exists with shape {existing.data.shape}, wanted {shape}"
                )
            return existing
        rng = np.random.default_rng(
            np.random.SeedSequence([self.seed, zlib.crc32(name.encode("utf-8"))])
        )
        tensor = Tensor(rng.uniform(-scale, scale, size=shape), requires_grad=True)
        self._params[name] = tensor
        return tensor

    def names(self) -> list[str]:
        return sorted(self._params)

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def items(self):
        for name in self.names():
            yield name, self._params[name]

    def zero_grads(self) -> None:
        for tensor in self._params.values():
            tensor.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: tensor.data.copy() for name, tensor in self.items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for name, value in state.items():
            value = np.asarray(value, dtype=np.float64)
            existing = self._params.get(name)
            if existing is None:
                tensor = Tensor(value.copy(), requires_grad=True)
                self._params[name] = tensor
            else:
                if existing.data.shape != value.shape:
                    raise ValueError(f"shape mismatch loading {name!r}")
                existing.data[:] = value

    def save_npz(self, path: str) -> None:
        np.savez(path, **self.state_dict())

    def load_npz(self, path: str) -> None:
        with np.load(path) as archive:
            self.load_state({name: archive[name] for name in archive.files})


class GRUCell:
    """Gated recurrent cell over a segmented input.

    The input is given as named segments (for example the anonymous
    payload part and the node-encoding part), each with its own weight
    matrix; mathematically this equals one concatenated input weight,
    but it keeps shared segments' parameters nameable independently of
    whatever extra segments a variant adds. All-zero inputs, state, and
    parameters produce an all-zero new state.
    """

    def __init__(self, store: ParamStore, name: str, segments, hidden_dim: int):
        self.hidden_dim = int(hidden_dim)
        self.segment_dims = [(str(seg), int(dim)) for seg, dim in segments]
        if not self.segment_dims or any(dim < 1 for _, dim in self.segment_dims):
            raise ValueError("segments must be non-empty with positive dims")
        scale = 1.0 / np.sqrt(self.hidden_dim)
        self.w_input = [
            store.param(f"{name}.w_{seg}", (dim, 3 * hidden_dim), scale)
            for seg, dim in self.segment_dims
        ]
        self.w_hidden = store.param(f"{name}.w_hidden", (hidden_dim, 3 * hidden_dim), scale)
        self.b_input = store.param(f"{name}.b_input", (3 * hidden_dim,), scale)
        self.b_hidden = store.param(f"{name}.b_hidden", (3 * hidden_dim,), scale)

    def __call__(self, segment_inputs, hidden: Tensor) -> Tensor:
        if len(segment_inputs) != len(self.segment_dims):
            raise ValueError(
                f"expected {len(self.segment_dims)} input segments, got {len(segment_inputs)}"
            )
        gi = segment_inputs[0] @ self.w_input[0]
        for x, w in zip(segment_inputs[1:], self.w_input[1:]):
            gi = gi + x @ w
        gi = gi + self.b_input
        gh = hidden @ self.w_hidden + self.b_hidden
        h = self.hidden_dim
        reset = (gi[:, 0:h] + gh[:, 0:h]).sigmoid()
        update = (gi[:, h : 2 * h] + gh[:, h : 2 * h]).sigmoid()
        candidate = (gi[:, 2 * h : 3 * h] + reset * gh[:, 2 * h : 3 * h]).tanh()
        return (1.0 - update) * candidate + update * hidden


class MultiHeadAttention:
    """Scaled dot-product attention of one center row over neighbor rows.

    The output adds a projection of the center itself, so a node with no
    neighbors still embeds to center @ w_root + bias.
    """

    def __init__(
        self,
        store: ParamStore,
        name: str,
        center_dim: int,
        neighbor_dim: int,
        out_dim: int,
        num_heads: int = 2,
    ):
        if num_heads < 1:
            raise ValueError("num_heads must be >= 1")
        self.num_heads = int(num_heads)
        self.head_dim = max(1, out_dim // num_heads)
        att_dim = self.num_heads * self.head_dim
        self.w_query = store.param(f"{name}.w_query", (center_dim, att_dim), 1.0 / np.sqrt(center_dim))
        self.w_key = store.param(f"{name}.w_key", (neighbor_dim, att_dim), 1.0 / np.sqrt(neighbor_dim))
        self.w_value = store.param(f"{name}.w_value", (neighbor_dim, att_dim), 1.0 / np.sqrt(neighbor_dim))
        self.w_out = store.param(f"{name}.w_out", (att_dim, out_dim), 1.0 / np.sqrt(att_dim))
        self.w_root = store.param(f"{name}.w_root", (center_dim, out_dim), 1.0 / np.sqrt(center_dim))
        self.bias = store.param(f"{name}.bias", (out_dim,), 1.0 / np.sqrt(att_dim))

    def __call__(self, center: Tensor, neighbors: Tensor | None) -> Tensor:
        root = center @ self.w_root + self.bias
        if neighbors is None or neighbors.shape[0] == 0:
            return root
        q = center @ self.w_query
        keys = neighbors @ self.w_key
        values = neighbors @ self.w_value
        heads = []
        inv_sqrt = 1.0 / np.sqrt(self.head_dim)
        for head in range(self.num_heads):
            cols = slice(head * self.head_dim, (head + 1) * self.head_dim)
            scores = (q[:, cols] @ keys[:, cols].T) * inv_sqrt
            weights = softmax(scores, axis=-1)
            heads.append(weights @ values[:, cols])
        return concat(heads, axis=-1) @ self.w_out + root


class MLP:
    """Two affine layers with a ReLU between them."""

    def __init__(self, store: ParamStore, name: str, in_dim: int, hidden_dim: int, out_dim: int):
        self.w1 = store.param(f"{name}.w1", (in_dim, hidden_dim), 1.0 / np.sqrt(in_dim))
        self.b1 = store.param(f"{name}.b1", (hidden_dim,), 1.0 / np.sqrt(in_dim))
        self.w2 = store.param(f"{name}.w2", (hidden_dim, out_dim), 1.0 / np.sqrt(hidden_dim))
        self.b2 = store.param(f"{name}.b2", (out_dim,), 1.0 / np.sqrt(hidden_dim))

    def __call__(self, x: Tensor) -> Tensor:
        return (x @ self.w1 + self.b1).relu() @ self.w2 + self.b2


class TimeEncoder:
    """Trainable frequencies under an elementwise cosine of the time gap."""

    def __init__(self, store: ParamStore, name: str, dim: int):
        self.freq = store.param(f"{name}.freq", (1, dim), 1.0)

    def __call__(self, delta_t: float) -> Tensor:
        return (self.freq * float(delta_t)).cos()


class NodeEncoder:
    """Trainable node-index encoding, or a switched-off all-zero variant.

    The ``zero`` mode returns a constant zero vector of the same width,
    which removes all identity information while keeping payload shapes
    (and therefore the rest of the architecture) unchanged.
    """

    def __init__(self, store: ParamStore, name: str, dim: int, mode: str = "cosine"):
        if mode not in ("cosine", "zero"):
            raise ValueError(f"unknown node encoder mode {mode!r}")
        self.mode = mode
        self.dim = int(dim)
        self.freq = store.param(f"{name}.freq", (1, dim), 1.0) if mode == "cosine" else None

    def __call__(self, index: int) -> Tensor:
        if self.mode == "zero":
            return Tensor(np.zeros((1, self.dim)))
        return (self.freq * float(index)).cos()
