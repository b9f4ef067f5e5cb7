"""Exact simulator and protocol compiler for heralded graph-state
generation by single-photon state carving in an atom-nanophotonic cavity."""

from .cavity import (
    AtomSite,
    CavityParams,
    ReflectionPoint,
    cooperativity,
    reflection_coefficient,
    reflection_dense_solve,
    reflectivity_spectrum,
)
from .carving import (
    CarveResult,
    CarveSpec,
    CavityReflection,
    HeraldImpossibleError,
    IdealReflection,
    ProbePolicy,
    ReflectionModel,
    TableReflection,
    UniformReflection,
    carve_click,
    carve_no_click,
    carve_sequential,
)
from .protocol import (
    AttachPlan,
    BlockInfo,
    CompileError,
    MULTI_ATTACH_BLOCK,
    MultiAtomBlock,
    ProtocolError,
    ProtocolProgram,
    RunReport,
    UnsupportedStrategyError,
    compile_attach,
    compile_graph,
    execute_steps,
    gray_even_parity_masks,
    greedy_vertex_order,
    path_vertex_order,
    run_program,
    search_multiatom_block,
)
from .qstate import (
    QUBIT_CAP,
    Branch,
    BranchMix,
    GraphSpec,
    PureState,
    QubitCapError,
    fidelity,
    target_graph_state,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "AtomSite",
    "CavityParams",
    "ReflectionPoint",
    "cooperativity",
    "reflection_coefficient",
    "reflection_dense_solve",
    "reflectivity_spectrum",
    "QUBIT_CAP",
    "QubitCapError",
    "GraphSpec",
    "PureState",
    "Branch",
    "BranchMix",
    "fidelity",
    "target_graph_state",
    "HeraldImpossibleError",
    "ReflectionModel",
    "CavityReflection",
    "IdealReflection",
    "UniformReflection",
    "TableReflection",
    "ProbePolicy",
    "CarveSpec",
    "CarveResult",
    "carve_click",
    "carve_no_click",
    "carve_sequential",
    "ProtocolError",
    "CompileError",
    "UnsupportedStrategyError",
    "AttachPlan",
    "BlockInfo",
    "MultiAtomBlock",
    "MULTI_ATTACH_BLOCK",
    "ProtocolProgram",
    "RunReport",
    "gray_even_parity_masks",
    "greedy_vertex_order",
    "path_vertex_order",
    "compile_attach",
    "compile_graph",
    "search_multiatom_block",
    "execute_steps",
    "run_program",
]
