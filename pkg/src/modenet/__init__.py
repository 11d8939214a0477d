"""Mode automata refined into coloured Petri nets: modelling, timing/energy
budget analysis, readability-aware diagrams, and MSC export."""

from .budget import (
    BudgetConfig,
    BudgetError,
    CostEnvelope,
    DeploymentAssignment,
    DeploymentMatrix,
    ExpectedCost,
    ProfileEntry,
    ResourceProfile,
    TARGETS,
    burst_feasibility,
    deployment_options,
    expected_cost,
    max_frames,
    optimize_assignment,
    trace_cost,
)
from .cpn import (
    Arc,
    Binding,
    ColourSet,
    ColouredNet,
    FiringError,
    Guard,
    Marking,
    MarkingError,
    NetError,
    Place,
    TimeInfeasibleError,
    Transition,
    Variable,
    Violation,
    advance_time,
    enabled_bindings,
    fire,
    validate_net,
)
from .layout import (
    Diagram,
    ReadabilityReport,
    Weights,
    count_crossings,
    count_side_switches,
    group_counters,
    layered_layout,
    optimize_layout,
    readability,
    render_dot,
    render_svg,
)
from .modelfile import ModelDoc, ModelParseError, parse_model, serialize_model
from .modes import (
    Mode,
    ModeAutomaton,
    ModeConfig,
    ModeError,
    ModeTransition,
    ProductAutomaton,
    flatten,
    hierarchical_parallel_equivalent,
    parallel_product,
    refine,
    step,
)
from .msc import Msc, MscError, lifelines, modes_to_hmsc, render_msc, trace_to_msc
from .reach import (
    BoundError,
    EquivalenceResult,
    Limits,
    ReachGraph,
    equivalent,
    expand_counters,
    reachability_graph,
)

__version__ = "0.1.0"
