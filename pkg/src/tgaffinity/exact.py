"""Linear memory machines that compute sliding-window statistics exactly.

A machine tracks, for each source node, the last ``k`` event values sent
to every possible destination. Memory is one vector of length n*k per
source, laid out as n contiguous blocks of k slots, newest value first.
Each update is a fixed linear map of the old state plus a write of the
new value, built from three ingredients:

* a k x k within-block shift with ones on the subdiagonal,
* an nk x nk block rotation that cycles whole blocks, and
* a write selector placing the incoming value at the head of the
  destination's block.

A fixed linear readout then maps memory to one statistic per
destination: uniform weights give a windowed moving average, a single
weight gives the persistent (last-value) forecast, and general weights
give a fixed-coefficient autoregressive prediction over the last k
event values.
"""

from __future__ import annotations

import os

import numpy as np

from ._kernels import replay_block_memory, replay_block_memory_with_readouts
from .events import EventStream
from .pipeline import DEST_SIDE, Formulation, ForwardEngine


def shift_matrix(k: int) -> np.ndarray:
    """k x k matrix with ones on the subdiagonal: slides a block down one slot."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return np.eye(k, k=-1)


def block_rotation(num_blocks: int, k: int) -> np.ndarray:
    """Permutation cycling block b of the state into block b+1 (mod num_blocks).

    Conjugating a block-diagonal matrix by this rotation moves its
    diagonal blocks one position along, which is how the per-destination
    shift operator is derived from a single template.
    """
    if num_blocks < 1 or k < 1:
        raise ValueError("num_blocks and k must be >= 1")
    size = num_blocks * k
    rot = np.zeros((size, size), dtype=np.float64)
    eye = np.eye(k)
    rot[0 : k, (num_blocks - 1) * k : num_blocks * k] = eye
    for b in range(1, num_blocks):
        rot[b * k : (b + 1) * k, (b - 1) * k : b * k] = eye
    return rot


def shift_template(num_blocks: int, k: int) -> np.ndarray:
    """Block-diagonal matrix shifting block 0 and passing the rest through."""
    size = num_blocks * k
    template = np.eye(size)
    template[0 : k, 0 : k] = shift_matrix(k)
    return template


def readout_matrix(num_blocks: int, weights: np.ndarray) -> np.ndarray:
    """n x nk map from block memory to one statistic per destination.

    Row m applies ``weights`` to block m, with weights[0] hitting the
    newest stored value.
    """
    weights = np.asarray(weights, dtype=np.float64)
    k = weights.shape[0]
    out = np.zeros((num_blocks, num_blocks * k), dtype=np.float64)
    for m in range(num_blocks):
        out[m, m * k : (m + 1) * k] = weights
    return out


def drop_destination_side(messages):
    """Filter out destination-side messages; the machines consume source-side only."""
    return [msg for msg in messages if msg.origin != DEST_SIDE]


class ExactMachine:
    """Per-destination sliding windows with a fixed linear readout.

    ``num_nodes`` is the number of possible destinations (one block per
    node) and ``weights`` the readout coefficients over each window,
    newest value first. Window length k = len(weights).
    """

    def __init__(self, num_nodes: int, weights):
        self.weights = np.atleast_1d(np.asarray(weights, dtype=np.float64))
        if self.weights.ndim != 1 or self.weights.shape[0] < 1:
            raise ValueError("weights must be a non-empty 1-d vector")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")
        if num_nodes < 1:
            raise ValueError("num_nodes must be >= 1")
        self.num_nodes = int(num_nodes)
        self.k = self.weights.shape[0]
        self.rotation = block_rotation(self.num_nodes, self.k)
        self.template = shift_template(self.num_nodes, self.k)
        self.readout_map = readout_matrix(self.num_nodes, self.weights)

    # -- construction helpers ------------------------------------------------

    @classmethod
    def moving_average(cls, num_nodes: int, k: int) -> "ExactMachine":
        """Mean of the last k event values per destination (missing slots count as 0)."""
        if k < 1:
            raise ValueError("k must be >= 1")
        return cls(num_nodes, np.full(k, 1.0 / k))

    @classmethod
    def persistent(cls, num_nodes: int) -> "ExactMachine":
        """Forecast equal to the most recent event value per destination."""
        return cls(num_nodes, np.array([1.0]))

    @classmethod
    def autoregressive(cls, num_nodes: int, coefficients) -> "ExactMachine":
        """Fixed-coefficient combination of the last values, newest first."""
        return cls(num_nodes, coefficients)

    # -- geometry --------------------------------------------------------------

    @property
    def memory_dim(self) -> int:
        return self.num_nodes * self.k

    def zero_state(self) -> np.ndarray:
        return np.zeros(self.memory_dim, dtype=np.float64)

    def shift_operator(self, dst: int) -> np.ndarray:
        """Linear map shifting destination ``dst``'s block and fixing the rest."""
        self._check_dst(dst)
        rot = np.linalg.matrix_power(self.rotation, dst)
        return rot @ self.template @ rot.T

    def write_selector(self, dst: int) -> np.ndarray:
        """Unit vector at the head slot of destination ``dst``'s block."""
        self._check_dst(dst)
        rot = np.linalg.matrix_power(self.rotation, dst)
        selector = np.zeros(self.memory_dim, dtype=np.float64)
        selector[0] = 1.0
        return rot @ selector

    def _check_dst(self, dst: int) -> None:
        if not (0 <= dst < self.num_nodes):
            raise ValueError(f"destination {dst} out of range [0, {self.num_nodes})")

    def _check_state(self, state: np.ndarray) -> np.ndarray:
        state = np.asarray(state, dtype=np.float64)
        if state.shape != (self.memory_dim,):
            raise ValueError(f"state must have shape ({self.memory_dim},), got {state.shape}")
        return state

    # -- dynamics ------------------------------------------------------------

    def update(self, state: np.ndarray, value: float, dst: int) -> np.ndarray:
        """New memory after one event of ``value`` toward ``dst`` (fast slice form)."""
        state = self._check_state(state)
        self._check_dst(dst)
        out = state.copy()
        base = dst * self.k
        out[base + 1 : base + self.k] = state[base : base + self.k - 1]
        out[base] = value
        return out

    def update_via_matrices(self, state: np.ndarray, value: float, dst: int) -> np.ndarray:
        """Reference form of ``update``: explicit operator times state plus write."""
        state = self._check_state(state)
        return self.shift_operator(dst) @ state + self.write_selector(dst) * float(value)

    def readout(self, state: np.ndarray) -> np.ndarray:
        """Statistic vector over all destinations for one memory state."""
        state = self._check_state(state)
        return self.readout_map @ state

    def block(self, state: np.ndarray, dst: int) -> np.ndarray:
        """Destination ``dst``'s window, newest value first."""
        state = self._check_state(state)
        self._check_dst(dst)
        return state[dst * self.k : (dst + 1) * self.k]

    # -- whole-stream replay ----------------------------------------------------

    def replay(self, stream: EventStream) -> np.ndarray:
        """Memory matrix (one row per source node) after replaying a whole stream.

        Only source-side updates apply: event (i, j, t, e) writes e into
        row i's block j. Runs on the compiled kernel when available.
        """
        srcs, dsts, _times, values = stream.as_arrays()
        memory = np.zeros((self.num_nodes, self.memory_dim), dtype=np.float64)
        if stream.num_nodes > self.num_nodes:
            raise ValueError(
                f"stream references {stream.num_nodes} nodes, machine has {self.num_nodes}"
            )
        replay_block_memory(memory, srcs, dsts, values, self.k)
        return memory

    def replay_with_readouts(self, stream: EventStream) -> tuple[np.ndarray, np.ndarray]:
        """Replay plus the source row's statistic vector after every event."""
        srcs, dsts, _times, values = stream.as_arrays()
        if stream.num_nodes > self.num_nodes:
            raise ValueError(
                f"stream references {stream.num_nodes} nodes, machine has {self.num_nodes}"
            )
        memory = np.zeros((self.num_nodes, self.memory_dim), dtype=np.float64)
        readouts = np.zeros((len(srcs), self.num_nodes), dtype=np.float64)
        replay_block_memory_with_readouts(memory, srcs, dsts, values, self.k,
                                          self.weights, readouts)
        return memory, readouts

    # -- inspection ----------------------------------------------------------

    def export_matrices(self, directory: str) -> list[str]:
        """Write the defining matrices to CSV files; returns the paths written."""
        os.makedirs(directory, exist_ok=True)
        named = {
            "shift.csv": shift_matrix(self.k),
            "rotation.csv": self.rotation,
            "template.csv": self.template,
            "readout.csv": self.readout_map,
        }
        paths = []
        for name, matrix in named.items():
            path = os.path.join(directory, name)
            with open(path, "w", encoding="utf-8") as fh:
                for row in np.atleast_2d(matrix):
                    fh.write(",".join(repr(float(v)) for v in row) + "\n")
            paths.append(path)
        return paths


class ExactEngine(ForwardEngine):
    """Pipeline engine whose memory and decoder are an exact machine.

    Every node carries its own machine memory; destination-side messages
    are dropped before aggregation, so only sources accumulate state.
    """

    def __init__(self, machine: ExactMachine, num_nodes: int, aggregator: str = "concat"):
        if machine.num_nodes != num_nodes:
            raise ValueError(
                f"machine tracks {machine.num_nodes} destinations, engine has {num_nodes} nodes"
            )
        formulation = Formulation.exact(machine.memory_dim, aggregator=aggregator)
        super().__init__(formulation, num_nodes, encoders=None)
        self.machine = machine

    def _collect_messages(self, batch):
        return drop_destination_side(super()._collect_messages(batch))

    def _apply_updates(self, updates) -> None:
        for recipient in sorted(updates):
            state = self.bank.states[recipient]
            for payload in updates[recipient].unpack():
                state = self.machine.update(state, float(payload[0]), int(payload[1]))
            self.bank.states[recipient] = state

    def _embed(self, node: int, t: float) -> np.ndarray:
        return self.bank.states[node]

    def _decode(self, embedded: np.ndarray) -> np.ndarray:
        return self.machine.readout(embedded)
