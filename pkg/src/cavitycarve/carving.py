"""Heralded state carving: probe photons reflect off the cavity and a
detector click projects the qubit register.

Every computational basis state of the register presents its own atom
configuration to the cavity - the atoms of the carved subset whose bit is 1
are coupled, everything else is dark.  A detector click therefore
multiplies each amplitude by the reflection coefficient of its
configuration; with a vanishing bare-cavity reflection this removes the
all-zeros pattern and (up to a common sign) leaves the rest untouched.

The conditional state after a *failed* probe is under-determined by the
steady-state model, so two bracketing models are provided:

* ``coherent``  - optimistic: one branch with amplitudes scaled by
  ``sqrt(1 - |r|**2)`` (positive root), coherences kept.
* ``dephased``  - pessimistic: coherences between components with different
  ``|r|`` are discarded, producing one branch per ``|r|`` class.

Sequential probing (``n_photons > 1``) heralds on the first click and feeds
every no-click branch to the next probe round.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

from .cavity import CavityParams, reflection_coefficient
from .qstate import Branch, BranchMix, PureState

__all__ = [
    "HeraldImpossibleError",
    "ReflectionModel",
    "CavityReflection",
    "IdealReflection",
    "UniformReflection",
    "TableReflection",
    "ProbePolicy",
    "CarveSpec",
    "CarveResult",
    "pattern_coupled",
    "carve_click",
    "carve_no_click",
    "carve_sequential",
]

#: A click probability below this is treated as "the herald can never fire".
HERALD_EPS = 1e-15

NO_CLICK_MODELS = ("coherent", "dephased")


class HeraldImpossibleError(RuntimeError):
    """Raised when the requested heralding click has (numerically) zero
    probability on the given state."""


# ---------------------------------------------------------------------------
# reflection models
# ---------------------------------------------------------------------------


class ReflectionModel:
    """Maps a set of coupled register qubits to a reflection amplitude."""

    def amplitude(self, coupled: frozenset[int]) -> complex:
        raise NotImplementedError


class CavityReflection(ReflectionModel):
    """Physical model: evaluate the cavity reflection with exactly the given
    atoms coupled, at a fixed probe detuning.  Results are cached per
    configuration, so uneven per-atom couplings are handled exactly."""

    def __init__(self, params: CavityParams, delta: float = 0.0):
        self.params = params
        self.delta = float(delta)
        self._cache: dict[frozenset[int], complex] = {}

    def amplitude(self, coupled: frozenset[int]) -> complex:
        hit = self._cache.get(coupled)
        if hit is None:
            hit = reflection_coefficient(self.params.with_coupled(coupled), self.delta)
            self._cache[coupled] = hit
        return hit


class IdealReflection(ReflectionModel):
    """Infinite-cooperativity limit: r = 0 for the empty configuration and
    r = -1 for every configuration with at least one coupled atom."""

    def amplitude(self, coupled: frozenset[int]) -> complex:
        return complex(-1.0) if coupled else complex(0.0)


class UniformReflection(ReflectionModel):
    """Synthetic model with one amplitude for every non-empty configuration.
    Useful for forcing a chosen reflectivity R = |r_coupled|**2."""

    def __init__(self, r_coupled: complex = -1.0 + 0j, r_empty: complex = 0j):
        self.r_coupled = complex(r_coupled)
        self.r_empty = complex(r_empty)

    def amplitude(self, coupled: frozenset[int]) -> complex:
        return self.r_coupled if coupled else self.r_empty


class TableReflection(ReflectionModel):
    """Explicit lookup table keyed by the coupled-qubit set."""

    def __init__(self, table: Mapping[frozenset[int], complex]):
        self.table = {frozenset(k): complex(v) for k, v in table.items()}

    def amplitude(self, coupled: frozenset[int]) -> complex:
        return self.table[frozenset(coupled)]


def as_reflection_model(
    params: Union[CavityParams, ReflectionModel, None], delta: float = 0.0
) -> ReflectionModel:
    """Normalize the accepted parameter forms to a ReflectionModel.  ``None``
    selects the ideal infinite-cooperativity limit."""
    if params is None:
        return IdealReflection()
    if isinstance(params, ReflectionModel):
        return params
    if isinstance(params, CavityParams):
        return CavityReflection(params, delta)
    raise TypeError(f"cannot interpret {type(params).__name__} as a reflection model")


# ---------------------------------------------------------------------------
# carve specification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProbePolicy:
    """How each carving is probed: number of sequential photons and the
    model for the conditional state after a failed probe."""

    n_photons: int = 1
    no_click_model: str = "coherent"

    def __post_init__(self) -> None:
        if self.n_photons < 1:
            raise ValueError("n_photons must be >= 1")
        if self.no_click_model not in NO_CLICK_MODELS:
            raise ValueError(
                f"no_click_model must be one of {NO_CLICK_MODELS},"
                f" got {self.no_click_model!r}"
            )


@dataclass(frozen=True)
class CarveSpec:
    """One carving: the carved qubit subset plus the reflection physics.

    ``params`` accepts a :class:`CavityParams` (evaluated at detuning
    ``delta``) or any :class:`ReflectionModel`; ``None`` means the ideal
    limit.  The subset must be non-empty and sorted ascending.
    """

    subset: tuple[int, ...]
    params: Union[CavityParams, ReflectionModel, None] = None
    delta: float = 0.0

    def __post_init__(self) -> None:
        subset = tuple(sorted(int(q) for q in self.subset))
        if not subset:
            raise ValueError("carve subset must be non-empty")
        if len(set(subset)) != len(subset):
            raise ValueError("carve subset has duplicate qubits")
        object.__setattr__(self, "subset", subset)

    def reflection(self) -> ReflectionModel:
        return as_reflection_model(self.params, self.delta)


@dataclass(frozen=True)
class CarveResult:
    """Outcome of a heralded carving.

    ``factor_ledger`` maps each subset bit pattern (string, subset order) to
    the reflection amplitude a click multiplies that pattern by.
    """

    heralded: BranchMix
    p_click: float
    factor_ledger: dict[str, complex] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# internals
# ---------------------------------------------------------------------------


def _pattern_index(num_qubits: int, subset: tuple[int, ...]) -> np.ndarray:
    """Array mapping every basis index to its subset bit pattern (bit j of
    the pattern is the bit of subset[j]; subset[0] is the pattern MSB)."""
    idx = np.arange(2**num_qubits)
    m = len(subset)
    pattern = np.zeros(2**num_qubits, dtype=np.int64)
    for j, q in enumerate(subset):
        bit = (idx >> (num_qubits - 1 - q)) & 1
        pattern |= bit << (m - 1 - j)
    return pattern


def pattern_coupled(subset: tuple[int, ...], pattern: int) -> frozenset[int]:
    """Set of register qubits coupled under a subset bit pattern (bit
    ``m-1-j`` of the pattern belongs to ``subset[j]``)."""
    m = len(subset)
    return frozenset(q for j, q in enumerate(subset) if (pattern >> (m - 1 - j)) & 1)


def _reflection_values(
    spec: CarveSpec, model: ReflectionModel
) -> tuple[np.ndarray, dict[str, complex]]:
    m = len(spec.subset)
    values = np.zeros(2**m, dtype=complex)
    ledger: dict[str, complex] = {}
    for pattern in range(2**m):
        r = model.amplitude(pattern_coupled(spec.subset, pattern))
        values[pattern] = r
        ledger[format(pattern, f"0{m}b")] = r
    return values, ledger


def _check_subset(state: PureState, spec: CarveSpec) -> None:
    for q in spec.subset:
        if not 0 <= q < state.num_qubits:
            raise ValueError(f"carve qubit {q} out of range")


# ---------------------------------------------------------------------------
# carving channels
# ---------------------------------------------------------------------------


def carve_click(state: PureState, spec: CarveSpec) -> CarveResult:
    """Project onto the click outcome of a single probe photon.

    Every amplitude is multiplied by the reflection coefficient of its
    subset configuration; the result is renormalized and returned with the
    click probability.  Raises :class:`HeraldImpossibleError` when the click
    probability is below ``HERALD_EPS``.
    """
    result = _click_branch(state, spec, spec.reflection())
    if result is None:
        raise HeraldImpossibleError(
            f"click probability below {HERALD_EPS} for carve on {spec.subset}"
        )
    p_click, branch, ledger = result
    return CarveResult(
        heralded=BranchMix((Branch(p_click, branch, (("click", 1),)),)),
        p_click=p_click,
        factor_ledger=ledger,
    )


def _click_branch(state, spec, model):
    _check_subset(state, spec)
    values, ledger = _reflection_values(spec, model)
    pattern = _pattern_index(state.num_qubits, spec.subset)
    clicked = state.amps * values[pattern]
    p_click = float(np.vdot(clicked, clicked).real)
    if p_click < HERALD_EPS:
        return None
    heralded = PureState(state.num_qubits, clicked / math.sqrt(p_click))
    return p_click, heralded, ledger


def carve_no_click(
    state: PureState, spec: CarveSpec, model: str = "coherent"
) -> BranchMix:
    """Conditional ensemble after a probe that did NOT click.

    ``coherent`` returns a single branch with amplitudes scaled by the
    positive root ``sqrt(1-|r|**2)``; ``dephased`` splits the outcome into
    one branch per distinct ``|r|`` class, discarding cross-class
    coherences.  Branch weights sum to ``1 - p_click``.
    """
    if model not in NO_CLICK_MODELS:
        raise ValueError(f"unknown no-click model {model!r}")
    _check_subset(state, spec)
    values, _ = _reflection_values(spec, spec.reflection())
    pattern = _pattern_index(state.num_qubits, spec.subset)
    survive = np.sqrt(np.clip(1.0 - np.abs(values) ** 2, 0.0, None))
    damped = state.amps * survive[pattern]

    if model == "coherent":
        weight = float(np.vdot(damped, damped).real)
        if weight <= 0.0:
            return BranchMix(())
        branch = PureState(state.num_qubits, damped / math.sqrt(weight))
        return BranchMix((Branch(weight, branch, (("no_click", "coherent"),)),))

    branches = []
    for cls_patterns, cls_abs in _abs_classes(values):
        keep = np.isin(pattern, cls_patterns)
        part = np.where(keep, damped, 0.0)
        weight = float(np.vdot(part, part).real)
        if weight <= 0.0:
            continue
        branch = PureState(state.num_qubits, part / math.sqrt(weight))
        branches.append(Branch(weight, branch, (("no_click", f"|r|={cls_abs:.12g}"),)))
    return BranchMix(tuple(branches))


def _abs_classes(values: np.ndarray) -> list[tuple[np.ndarray, float]]:
    """Group subset patterns into classes of equal |r| (1e-12 resolution)."""
    mags = np.abs(values)
    order = np.argsort(mags, kind="stable")
    classes: list[tuple[list[int], float]] = []
    for p in order:
        mag = float(mags[p])
        if classes and abs(mag - classes[-1][1]) <= 1e-12 * (1.0 + mag):
            classes[-1][0].append(int(p))
        else:
            classes.append(([int(p)], mag))
    return [(np.array(pats, dtype=np.int64), mag) for pats, mag in classes]


def carve_sequential(
    state: PureState, spec: CarveSpec, policy: ProbePolicy = ProbePolicy()
) -> CarveResult:
    """Carve with up to ``policy.n_photons`` sequential probes, heralding on
    the first click.

    The heralded ensemble contains one branch per click round (times the
    no-click class branches that preceded it under the dephased model);
    branch weights are joint probabilities, so their sum is the total click
    probability of the carving.
    """
    model = spec.reflection()
    _, ledger = _reflection_values(spec, model)
    pending: list[tuple[float, PureState, tuple]] = [(1.0, state, ())]
    heralded: list[Branch] = []
    for round_no in range(1, policy.n_photons + 1):
        next_pending: list[tuple[float, PureState, tuple]] = []
        for weight, pure, record in pending:
            clicked = _click_branch(pure, spec, model)
            if clicked is not None:
                p_click, branch, _ = clicked
                heralded.append(
                    Branch(weight * p_click, branch, record + (("click", round_no),))
                )
            if round_no < policy.n_photons:
                for nc in carve_no_click(pure, spec, policy.no_click_model).branches:
                    next_pending.append(
                        (weight * nc.weight, nc.state, record + nc.record)
                    )
        pending = next_pending
    p_total = float(sum(b.weight for b in heralded))
    if p_total < HERALD_EPS:
        raise HeraldImpossibleError(
            f"click probability below {HERALD_EPS} after {policy.n_photons} probes"
            f" on {spec.subset}"
        )
    return CarveResult(
        heralded=BranchMix(tuple(heralded)), p_click=p_total, factor_ledger=ledger
    )
