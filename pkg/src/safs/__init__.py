"""Server structure proposal and automatic performance verification on mixed IaaS."""

from safs.catalog import Catalog, load_catalog, match_patterns, resolve_software, tests_for_tier
from safs.errors import SafsError
from safs.kinds import Consistency, OsKind, ServerType
from safs.orchestrator import (
    PipelineError,
    PipelineOptions,
    ProposalRejected,
    SimulatedController,
    SimulatedRunner,
    VerificationReport,
    run_pipeline,
)
from safs.perfmodel import PerformanceModel, capacity_index, load_model, relative_performance
from safs.selector import SelectionConfig, ServerRequirements, propose_structure, select_server_type
from safs.template import build_topology, emit_concrete, parse_abstract, parse_concrete

__version__ = "0.1.0"
