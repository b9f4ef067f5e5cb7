"""Parameter sweeps over graph size, cooperativity, coupling split and
probe count, plus robustness studies with uneven per-atom couplings.

Everything here is plumbing around :func:`cavitycarve.protocol.run_program`:
build a grid of parameter points, execute each point, and emit flat CSV /
nested JSON tables suitable for plotting elsewhere.  All rates are
dimensionless multiples of the atomic linewidth.

A closed-form cross-check column ``approx_probability`` accompanies every
row: the ideal heralding probability times ``R**n_carvings`` with R the
single-atom reflectivity of the row's parameters.  For linear graphs under
the pairwise strategy the cross-check is exact (every click factor is a
single-atom reflection); elsewhere it brackets the simulated value.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, fields
from typing import Optional, Sequence

import numpy as np

from .carving import (
    CavityReflection,
    HeraldImpossibleError,
    IdealReflection,
    NO_CLICK_MODELS,
    ProbePolicy,
)
from .cavity import AtomSite, CavityParams, reflection_coefficient
from .protocol import (
    STRATEGIES,
    CompileError,
    ProtocolError,
    ProtocolProgram,
    UnsupportedStrategyError,
    compile_graph,
    run_program,
)
from .qstate import QUBIT_CAP, GraphSpec, QubitCapError

__all__ = [
    "SweepSpec",
    "SweepRow",
    "RobustnessRow",
    "DEFAULT_KAPPA",
    "build_params",
    "single_atom_reflectivity",
    "approx_probability_formula",
    "sweep",
    "robustness_uneven",
    "sweep_rows_to_csv",
    "sweep_rows_to_json",
    "robustness_rows_to_csv",
    "atomic_write_text",
]

SWEEP_CSV_HEADER = "# cavitycarve sweep v1"
ROBUSTNESS_CSV_HEADER = "# cavitycarve robustness v1"
SWEEP_JSON_FORMAT = "cavitycarve-sweep-v1"

#: Total cavity linewidth used when materializing parameters from a
#: cooperativity (in units of the atomic linewidth).  The resonant
#: reflection depends only on C and kappa_wg/kappa, so the absolute scale
#: is a bookkeeping choice.
DEFAULT_KAPPA = 400.0


def atomic_write_text(path: str, text: str) -> None:
    """Write ``text`` to ``path`` atomically (temp file + rename)."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def build_params(
    n_atoms: int,
    cooperativity: float,
    kwg_frac: float = 0.5,
    kappa: float = DEFAULT_KAPPA,
    gamma: float = 1.0,
    g_scale: Optional[Sequence[float]] = None,
) -> CavityParams:
    """Cavity parameters for ``n_atoms`` identical atoms at a given
    cooperativity and waveguide fraction ``kappa_wg/kappa``.

    ``g_scale`` optionally multiplies each atom's coupling (uneven-coupling
    studies); cooperativity then refers to the unscaled baseline.
    """
    if cooperativity < 0:
        raise ValueError("cooperativity must be non-negative")
    if not 0.0 < kwg_frac <= 1.0:
        raise ValueError("kwg_frac must be in (0, 1]")
    g0 = math.sqrt(cooperativity * kappa * gamma / 4.0)
    scales = [1.0] * n_atoms if g_scale is None else list(g_scale)
    if len(scales) != n_atoms:
        raise ValueError("g_scale length must equal n_atoms")
    atoms = tuple(AtomSite(g=g0 * s) for s in scales)
    return CavityParams(
        kappa_wg=kwg_frac * kappa,
        kappa_sc=(1.0 - kwg_frac) * kappa,
        atoms=atoms,
        gamma=gamma,
    )


def single_atom_reflectivity(
    cooperativity: Optional[float],
    kwg_frac: float = 0.5,
    kappa: float = DEFAULT_KAPPA,
    gamma: float = 1.0,
) -> float:
    """|r|**2 on resonance with exactly one coupled atom (1.0 in the ideal
    limit, signalled by ``cooperativity=None``)."""
    if cooperativity is None:
        return 1.0
    params = build_params(1, cooperativity, kwg_frac, kappa, gamma)
    return abs(reflection_coefficient(params, 0.0)) ** 2


def approx_probability_formula(
    n_vertices: int,
    R: float,
    strategy: str = "two-atom",
    n_carvings: Optional[int] = None,
) -> float:
    """Closed-form heralding estimate: the ideal linear-graph probability
    times one factor of R per carving.

    The ideal part is ``2**-(N-1)`` for the pairwise strategy and
    ``2**-floor(N/2)`` for the three-qubit path strategy; both use
    ``n_carvings = 2*(N-1)`` unless overridden.
    """
    if not 0.0 <= R <= 1.0:
        raise ValueError("R must lie in [0, 1]")
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if n_vertices < 1:
        raise ValueError("need at least one vertex")
    n_sc = 2 * (n_vertices - 1) if n_carvings is None else n_carvings
    if strategy == "two-atom":
        ideal = 2.0 ** -(n_vertices - 1)
    else:
        ideal = 2.0 ** -(n_vertices // 2)
    return ideal * R**n_sc


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepSpec:
    """Cross-product sweep: every graph x cooperativity x waveguide
    fraction x probe count.  ``cooperativities`` may contain ``None`` for
    the ideal limit."""

    graphs: tuple[GraphSpec, ...]
    strategy: str = "two-atom"
    cooperativities: tuple[Optional[float], ...] = (None,)
    kwg_fractions: tuple[float, ...] = (0.5,)
    n_photons: tuple[int, ...] = (1,)
    no_click_model: str = "coherent"
    kappa: float = DEFAULT_KAPPA
    gamma: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "graphs", tuple(self.graphs))
        object.__setattr__(self, "cooperativities", tuple(self.cooperativities))
        object.__setattr__(self, "kwg_fractions", tuple(self.kwg_fractions))
        object.__setattr__(self, "n_photons", tuple(self.n_photons))
        if not self.graphs:
            raise ValueError("sweep needs at least one graph")
        if not self.cooperativities or not self.kwg_fractions or not self.n_photons:
            raise ValueError("sweep lists must be non-empty")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.no_click_model not in NO_CLICK_MODELS:
            raise ValueError(f"unknown no-click model {self.no_click_model!r}")
        for g in self.graphs:
            if g.n_vertices > QUBIT_CAP:
                raise QubitCapError(
                    f"graph with {g.n_vertices} vertices exceeds the"
                    f" {QUBIT_CAP}-qubit cap"
                )
        for f in self.kwg_fractions:
            if not 0.0 < f <= 1.0:
                raise ValueError("kwg fractions must be in (0, 1]")
        for n in self.n_photons:
            if n < 1:
                raise ValueError("n_photons entries must be >= 1")

    @classmethod
    def path_family(cls, n_min: int, n_max: int, **kwargs) -> "SweepSpec":
        if n_min < 1 or n_max < n_min:
            raise ValueError("need 1 <= n_min <= n_max")
        return cls(
            graphs=tuple(GraphSpec.path(n) for n in range(n_min, n_max + 1)),
            **kwargs,
        )


@dataclass(frozen=True)
class SweepRow:
    """One executed sweep point.  ``error`` is empty on success; failed
    rows carry NaN metrics and the error text."""

    n_vertices: int
    edges: tuple[tuple[int, int], ...]
    strategy: str
    cooperativity: Optional[float]
    kwg_frac: float
    n_photons: int
    no_click_model: str
    probability: float
    ideal_probability: float
    fidelity: float
    n_carvings: int
    approx_probability: float
    error: str = ""


def _row_fail(
    graph: GraphSpec,
    spec: SweepSpec,
    cooperativity: Optional[float],
    frac: float,
    n_p: int,
    message: str,
) -> SweepRow:
    return SweepRow(
        n_vertices=graph.n_vertices,
        edges=graph.edges,
        strategy=spec.strategy,
        cooperativity=cooperativity,
        kwg_frac=frac,
        n_photons=n_p,
        no_click_model=spec.no_click_model,
        probability=math.nan,
        ideal_probability=math.nan,
        fidelity=math.nan,
        n_carvings=-1,
        approx_probability=math.nan,
        error=message,
    )


_ROW_ERRORS = (
    CompileError,
    UnsupportedStrategyError,
    HeraldImpossibleError,
    ProtocolError,
    QubitCapError,
    ValueError,
)


def sweep(spec: SweepSpec) -> list[SweepRow]:
    """Run the full cross product; one row per point, in spec order.

    Per-point failures (unsupported strategy, impossible herald, ...) are
    recorded in the row's ``error`` column instead of aborting the sweep.
    """
    programs: dict[int, ProtocolProgram] = {}
    rows: list[SweepRow] = []
    for index, graph in enumerate(spec.graphs):
        try:
            if index not in programs:
                programs[index] = compile_graph(graph, spec.strategy)
            program = programs[index]
        except _ROW_ERRORS as exc:
            for c in spec.cooperativities:
                for frac in spec.kwg_fractions:
                    for n_p in spec.n_photons:
                        rows.append(_row_fail(graph, spec, c, frac, n_p, str(exc)))
            continue
        for cooperativity in spec.cooperativities:
            for frac in spec.kwg_fractions:
                for n_p in spec.n_photons:
                    policy = ProbePolicy(n_p, spec.no_click_model)
                    try:
                        if cooperativity is None:
                            reflection = IdealReflection()
                        else:
                            params = build_params(
                                graph.n_vertices,
                                cooperativity,
                                frac,
                                spec.kappa,
                                spec.gamma,
                            )
                            reflection = CavityReflection(params, 0.0)
                        report = run_program(program, reflection, policy)
                    except _ROW_ERRORS as exc:
                        rows.append(
                            _row_fail(graph, spec, cooperativity, frac, n_p, str(exc))
                        )
                        continue
                    R1 = single_atom_reflectivity(
                        cooperativity, frac, spec.kappa, spec.gamma
                    )
                    capture = 1.0 - (1.0 - R1) ** n_p
                    rows.append(
                        SweepRow(
                            n_vertices=graph.n_vertices,
                            edges=graph.edges,
                            strategy=spec.strategy,
                            cooperativity=cooperativity,
                            kwg_frac=frac,
                            n_photons=n_p,
                            no_click_model=spec.no_click_model,
                            probability=report.probability,
                            ideal_probability=report.ideal_probability,
                            fidelity=report.fidelity,
                            n_carvings=report.n_carvings,
                            approx_probability=approx_probability_formula(
                                graph.n_vertices,
                                capture,
                                spec.strategy,
                                report.n_carvings,
                            ),
                            error="",
                        )
                    )
    return rows


# ---------------------------------------------------------------------------
# robustness with uneven couplings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RobustnessRow:
    n_vertices: int
    strategy: str
    cooperativity: float
    kwg_frac: float
    n_photons: int
    sample: int
    jitter: float
    seed: int
    g_scales: tuple[float, ...]
    probability: float
    fidelity: float
    error: str = ""


def robustness_uneven(
    spec: SweepSpec,
    jitter: float,
    seed: int,
    n_samples: int = 8,
) -> list[RobustnessRow]:
    """Re-run every sweep point ``n_samples`` times with per-atom couplings
    drawn uniformly from ``g * (1 +/- jitter)`` (seeded, recorded in the
    rows).  Ideal-limit entries (cooperativity ``None``) are skipped since
    they have no couplings to perturb.
    """
    if jitter < 0:
        raise ValueError("jitter must be non-negative")
    if n_samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    rows: list[RobustnessRow] = []
    for index, graph in enumerate(spec.graphs):
        try:
            program = compile_graph(graph, spec.strategy)
        except _ROW_ERRORS as exc:
            program = None
            compile_error = str(exc)
        for cooperativity in spec.cooperativities:
            if cooperativity is None:
                continue
            for frac in spec.kwg_fractions:
                for n_p in spec.n_photons:
                    for sample in range(n_samples):
                        scales = tuple(
                            float(s)
                            for s in 1.0
                            + jitter * rng.uniform(-1.0, 1.0, graph.n_vertices)
                        )
                        if program is None:
                            rows.append(
                                RobustnessRow(
                                    n_vertices=graph.n_vertices,
                                    strategy=spec.strategy,
                                    cooperativity=cooperativity,
                                    kwg_frac=frac,
                                    n_photons=n_p,
                                    sample=sample,
                                    jitter=jitter,
                                    seed=seed,
                                    g_scales=scales,
                                    probability=math.nan,
                                    fidelity=math.nan,
                                    error=compile_error,
                                )
                            )
                            continue
                        params = build_params(
                            graph.n_vertices,
                            cooperativity,
                            frac,
                            spec.kappa,
                            spec.gamma,
                            g_scale=scales,
                        )
                        policy = ProbePolicy(n_p, spec.no_click_model)
                        try:
                            report = run_program(program, params, policy)
                        except _ROW_ERRORS as exc:
                            rows.append(
                                RobustnessRow(
                                    n_vertices=graph.n_vertices,
                                    strategy=spec.strategy,
                                    cooperativity=cooperativity,
                                    kwg_frac=frac,
                                    n_photons=n_p,
                                    sample=sample,
                                    jitter=jitter,
                                    seed=seed,
                                    g_scales=scales,
                                    probability=math.nan,
                                    fidelity=math.nan,
                                    error=str(exc),
                                )
                            )
                            continue
                        rows.append(
                            RobustnessRow(
                                n_vertices=graph.n_vertices,
                                strategy=spec.strategy,
                                cooperativity=cooperativity,
                                kwg_frac=frac,
                                n_photons=n_p,
                                sample=sample,
                                jitter=jitter,
                                seed=seed,
                                g_scales=scales,
                                probability=report.probability,
                                fidelity=report.fidelity,
                                error="",
                            )
                        )
    return rows


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _edges_text(edges: Sequence[tuple[int, int]]) -> str:
    return ";".join(f"{u}-{v}" for u, v in edges)


def sweep_rows_to_csv(rows: Sequence[SweepRow]) -> str:
    """Flat CSV with a frozen, versioned column order."""
    buf = io.StringIO()
    buf.write(SWEEP_CSV_HEADER + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        [
            "n_vertices",
            "edges",
            "strategy",
            "cooperativity",
            "kwg_frac",
            "n_photons",
            "no_click_model",
            "probability",
            "ideal_probability",
            "fidelity",
            "n_carvings",
            "approx_probability",
            "error",
        ]
    )
    for row in rows:
        writer.writerow(
            [
                row.n_vertices,
                _edges_text(row.edges),
                row.strategy,
                "" if row.cooperativity is None else repr(row.cooperativity),
                repr(row.kwg_frac),
                row.n_photons,
                row.no_click_model,
                repr(row.probability),
                repr(row.ideal_probability),
                repr(row.fidelity),
                row.n_carvings,
                repr(row.approx_probability),
                row.error,
            ]
        )
    return buf.getvalue()


def sweep_rows_to_json(rows: Sequence[SweepRow]) -> str:
    payload = {
        "format": SWEEP_JSON_FORMAT,
        "rows": [
            {
                **{
                    f.name: getattr(row, f.name)
                    for f in fields(row)
                    if f.name != "edges"
                },
                "edges": [list(e) for e in row.edges],
            }
            for row in rows
        ],
    }
    return json.dumps(payload, indent=2, allow_nan=True) + "\n"


def robustness_rows_to_csv(rows: Sequence[RobustnessRow]) -> str:
    buf = io.StringIO()
    buf.write(ROBUSTNESS_CSV_HEADER + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        [
            "n_vertices",
            "strategy",
            "cooperativity",
            "kwg_frac",
            "n_photons",
            "sample",
            "jitter",
            "seed",
            "g_scales",
            "probability",
            "fidelity",
            "error",
        ]
    )
    for row in rows:
        writer.writerow(
            [
                row.n_vertices,
                row.strategy,
                repr(row.cooperativity),
                repr(row.kwg_frac),
                row.n_photons,
                row.sample,
                repr(row.jitter),
                row.seed,
                ";".join(repr(s) for s in row.g_scales),
                repr(row.probability),
                repr(row.fidelity),
                row.error,
            ]
        )
    return buf.getvalue()
