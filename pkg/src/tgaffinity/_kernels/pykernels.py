"""Pure-NumPy replay kernels; reference fallback for the compiled core.

Both backends implement the same contract on a block memory matrix:
``memory[row]`` is the state vector of source node ``row``, laid out as
``n`` destination blocks of ``k`` slots, newest message first. An event
``(src, dst, value)`` shifts block ``dst`` of row ``src`` down one slot
and writes ``value`` into the block's first slot.
"""

from __future__ import annotations

import numpy as np


def replay_block_memory(memory, srcs, dsts, values, k: int) -> None:
    """Apply a sequence of events to the block memory, in place."""
    for i in range(len(srcs)):
        row = memory[srcs[i]]
        base = dsts[i] * k
        if k > 1:
            row[base + 1 : base + k] = row[base : base + k - 1]
        row[base] = values[i]


def replay_block_memory_with_readouts(memory, srcs, dsts, values, k: int, weights, out) -> None:
    """Replay events and record the post-update readout row of each source.

    ``out[i]`` receives the weighted per-block sums of ``memory[srcs[i]]``
    immediately after event ``i`` is applied.
    """
    n = out.shape[1]
    for i in range(len(srcs)):
        s = srcs[i]
        row = memory[s]
        base = dsts[i] * k
        if k > 1:
            row[base + 1 : base + k] = row[base : base + k - 1]
        row[base] = values[i]
        out[i, :] = row.reshape(n, k) @ weights
