"""Temporal-graph affinity pipelines with exact sliding-window machines.

The library replays timestamped interaction streams through a five-stage
pipeline (message, aggregate, memory update, embed, decode), provides
fixed linear machines that compute windowed statistics exactly, and
ships paired recipient-swap streams that the anonymous message
construction provably cannot distinguish while the identified one can.
"""

from ._kernels import BACKEND
from .events import (
    AffinityLabel,
    CsvSchema,
    Event,
    EventStream,
    IngestError,
    NodeRegistry,
    StaticNodeFeatures,
    chronological_split,
    compute_affinity_labels,
    ingest_csv,
    labels_to_csv,
    write_csv,
)
from .exact import ExactEngine, ExactMachine, drop_destination_side
from .expressivity import (
    CounterexamplePair,
    WindowedStatisticOracle,
    build_counterexample,
    check_tgn_collapse,
    check_tgnv2_separation,
    tail_statistic,
)
from .heuristics import (
    LabelHistory,
    MessageAverageEngine,
    MessageHistory,
    RandomScoreEngine,
    moving_average_labels,
    moving_average_messages,
    persistent_forecast_labels,
)
from .metrics import EvalResult, evaluate_stream, ndcg_at_k
from .pipeline import (
    AggregatedMessage,
    Encoders,
    Formulation,
    FormulationError,
    ForwardEngine,
    MemoryBank,
    NeighborIndex,
    OutOfOrderError,
    RawMessage,
    aggregate,
    build_messages_tgn,
    build_messages_tgnv2,
    node_encode,
    temporal_neighborhood,
    time_encode,
)
from .synthetic import SyntheticSpec, generate_stream, pair_means, random_stream

__version__ = "0.1.0"
