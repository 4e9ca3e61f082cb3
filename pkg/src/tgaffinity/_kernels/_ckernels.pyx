# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled replay kernels over block-structured window memory.

Mirrors pykernels exactly: same layout (one row per source, n blocks of
k slots, newest value first), same per-event update, same readouts.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def replay_block_memory(
    cnp.float64_t[:, ::1] memory,
    cnp.int64_t[::1] srcs,
    cnp.int64_t[::1] dsts,
    cnp.float64_t[::1] values,
    Py_ssize_t k,
):
    """Apply every event's source-side update to the memory matrix in place."""
    cdef Py_ssize_t num_events = srcs.shape[0]
    cdef Py_ssize_t i, slot, base
    cdef Py_ssize_t row
    for i in range(num_events):
        row = srcs[i]
        base = dsts[i] * k
        for slot in range(k - 1, 0, -1):
            memory[row, base + slot] = memory[row, base + slot - 1]
        memory[row, base] = values[i]


def replay_block_memory_with_readouts(
    cnp.float64_t[:, ::1] memory,
    cnp.int64_t[::1] srcs,
    cnp.int64_t[::1] dsts,
    cnp.float64_t[::1] values,
    Py_ssize_t k,
    cnp.float64_t[::1] weights,
    cnp.float64_t[:, ::1] out,
):
    """Replay plus, after each event, the source row's per-block statistics."""
    cdef Py_ssize_t num_events = srcs.shape[0]
    cdef Py_ssize_t num_blocks = memory.shape[1] // k
    cdef Py_ssize_t i, slot, base, block
    cdef Py_ssize_t row
    cdef cnp.float64_t acc
    for i in range(num_events):
        row = srcs[i]
        base = dsts[i] * k
        for slot in range(k - 1, 0, -1):
            memory[row, base + slot] = memory[row, base + slot - 1]
        memory[row, base] = values[i]
        for block in range(num_blocks):
            acc = 0.0
            base = block * k
            for slot in range(k):
                acc += weights[slot] * memory[row, base + slot]
            out[i, block] = acc
