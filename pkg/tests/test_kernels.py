"""Replay-kernel backend dispatch and cross-backend equivalence."""

import os
import subprocess
import sys
from collections import deque

import numpy as np

from tgaffinity import _kernels
from tgaffinity._kernels import pykernels


def random_case(rng, n, num_events):
    srcs = rng.integers(0, n, num_events).astype(np.int64)
    dsts = rng.integers(0, n, num_events).astype(np.int64)
    values = rng.standard_normal(num_events)
    return srcs, dsts, values


def history_replay(n, k, srcs, dsts, values):
    """Independent reference: per-pair bounded histories, newest first."""
    histories = {}
    for s, d, v in zip(srcs, dsts, values):
        histories.setdefault((int(s), int(d)), deque(maxlen=k)).appendleft(float(v))
    memory = np.zeros((n, n * k))
    for (s, d), hist in histories.items():
        for slot, value in enumerate(hist):
            memory[s, d * k + slot] = value
    return memory


class TestDispatch:
    def test_backend_is_reported(self):
        assert _kernels.BACKEND in ("cython", "python")

    def test_env_var_forces_python_backend(self):
        env = dict(os.environ)
        env["TGAFFINITY_PURE_PYTHON"] = "1"
        out = subprocess.run(
            [sys.executable, "-c", "from tgaffinity._kernels import BACKEND; print(BACKEND)"],
            env=env,
            capture_output=True,
            text=True,
            check=True,
        )
        assert out.stdout.strip() == "python"

    def test_default_backend_uses_compiled_core_when_built(self):
        try:
            from tgaffinity._kernels import _ckernels  # noqa: F401

            expected = "cython"
        except ImportError:
            expected = "python"
        env = {k: v for k, v in os.environ.items() if k != "TGAFFINITY_PURE_PYTHON"}
        out = subprocess.run(
            [sys.executable, "-c", "from tgaffinity._kernels import BACKEND; print(BACKEND)"],
            env=env,
            capture_output=True,
            text=True,
            check=True,
        )
        assert out.stdout.strip() == expected


class TestReplayEquivalence:
    def test_backends_match_bounded_histories_bitwise(self):
        rng = np.random.default_rng(0)
        for n, k, num_events in [(2, 1, 50), (3, 2, 200), (4, 5, 400), (6, 3, 1000)]:
            srcs, dsts, values = random_case(rng, n, num_events)
            mem_dispatch = np.zeros((n, n * k))
            mem_python = np.zeros((n, n * k))
            _kernels.replay_block_memory(mem_dispatch, srcs, dsts, values, k)
            pykernels.replay_block_memory(mem_python, srcs, dsts, values, k)
            expected = history_replay(n, k, srcs, dsts, values)
            np.testing.assert_array_equal(mem_dispatch, expected)
            np.testing.assert_array_equal(mem_python, expected)

    def test_single_slot_keeps_only_latest(self):
        memory = np.zeros((2, 2))
        srcs = np.array([0, 0, 0], dtype=np.int64)
        dsts = np.array([1, 1, 0], dtype=np.int64)
        values = np.array([5.0, 7.0, 2.0])
        _kernels.replay_block_memory(memory, srcs, dsts, values, 1)
        np.testing.assert_array_equal(memory, [[2.0, 7.0], [0.0, 0.0]])

    def test_empty_event_list_is_a_noop(self):
        memory = np.ones((2, 4))
        empty = np.zeros(0, dtype=np.int64)
        _kernels.replay_block_memory(memory, empty, empty, np.zeros(0), 2)
        np.testing.assert_array_equal(memory, np.ones((2, 4)))


class TestReadoutEquivalence:
    def test_readouts_track_incremental_histories(self):
        rng = np.random.default_rng(1)
        n, k, num_events = 4, 3, 300
        srcs, dsts, values = random_case(rng, n, num_events)
        weights = rng.uniform(-1.0, 1.0, k)

        mem_dispatch = np.zeros((n, n * k))
        out_dispatch = np.zeros((num_events, n))
        _kernels.replay_block_memory_with_readouts(
            mem_dispatch, srcs, dsts, values, k, weights, out_dispatch
        )
        mem_python = np.zeros((n, n * k))
        out_python = np.zeros((num_events, n))
        pykernels.replay_block_memory_with_readouts(
            mem_python, srcs, dsts, values, k, weights, out_python
        )

        # reference: rebuild the source row after each event prefix
        expected = np.zeros((num_events, n))
        for i in range(num_events):
            memory = history_replay(n, k, srcs[: i + 1], dsts[: i + 1], values[: i + 1])
            expected[i] = memory[srcs[i]].reshape(n, k) @ weights

        np.testing.assert_array_equal(mem_python, mem_dispatch)
        np.testing.assert_array_equal(out_python, expected)
        # summation order may differ between backends, so allow rounding slack
        np.testing.assert_allclose(out_dispatch, expected, atol=1e-12)

    def test_readout_rows_match_final_memory(self):
        rng = np.random.default_rng(2)
        n, k = 3, 2
        srcs, dsts, values = random_case(rng, n, 40)
        weights = np.array([0.5, 0.5])
        memory = np.zeros((n, n * k))
        out = np.zeros((40, n))
        _kernels.replay_block_memory_with_readouts(memory, srcs, dsts, values, k, weights, out)
        np.testing.assert_allclose(
            out[-1], memory[srcs[-1]].reshape(n, k) @ weights, atol=1e-12
        )
