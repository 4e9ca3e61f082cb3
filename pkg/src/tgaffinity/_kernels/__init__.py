"""Backend dispatch for the replay kernels.

Imports the compiled Cython module when it was built, otherwise falls
back to the NumPy implementation. Set ``TGAFFINITY_PURE_PYTHON=1`` to
force the fallback (used by the benchmark and the equivalence tests).
"""

from __future__ import annotations

import os

from . import pykernels

BACKEND = "python"
_impl = pykernels
if not os.environ.get("TGAFFINITY_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        pass

replay_block_memory = _impl.replay_block_memory
replay_block_memory_with_readouts = _impl.replay_block_memory_with_readouts

__all__ = [
    "BACKEND",
    "pykernels",
    "replay_block_memory",
    "replay_block_memory_with_readouts",
]
