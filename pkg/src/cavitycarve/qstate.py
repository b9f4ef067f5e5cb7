"""Dense pure-state engine for a small qubit register.

Conventions used throughout the package:

* Qubit 0 is the most significant bit of a basis index, so for three
  qubits the basis ket ``|q0 q1 q2>`` has index ``q0*4 + q1*2 + q2``.
* Operations return new states; amplitude arrays are never mutated.
* State equality always means fidelity, i.e. global phase is quotiented.

Registers are capped at ``QUBIT_CAP`` qubits so an accidental request for a
huge graph fails loudly instead of exhausting memory.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

__all__ = [
    "QUBIT_CAP",
    "QubitCapError",
    "GraphSpec",
    "PureState",
    "Branch",
    "BranchMix",
    "qubit_bit",
    "qubits_to_mask",
    "mask_to_qubits",
    "apply_x_mask",
    "apply_ry",
    "apply_z",
    "apply_cz",
    "target_graph_state",
    "fidelity",
]

QUBIT_CAP = 16


class QubitCapError(ValueError):
    """Raised when a register would exceed QUBIT_CAP qubits."""


# ---------------------------------------------------------------------------
# graphs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GraphSpec:
    """Simple undirected graph on vertices 0..n_vertices-1 (no self loops,
    no duplicate edges).  Edges are stored normalized as (u, v) with u < v,
    sorted, so equal graphs compare equal."""

    n_vertices: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if self.n_vertices < 1:
            raise ValueError("graph needs at least one vertex")
        seen = set()
        norm = []
        for edge in self.edges:
            u, v = int(edge[0]), int(edge[1])
            if u == v:
                raise ValueError(f"self loop on vertex {u}")
            if not (0 <= u < self.n_vertices and 0 <= v < self.n_vertices):
                raise ValueError(f"edge ({u},{v}) out of range")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
            norm.append(key)
        object.__setattr__(self, "edges", tuple(sorted(norm)))

    @classmethod
    def from_edges(cls, n_vertices: int, edges: Iterable[Sequence[int]]) -> "GraphSpec":
        return cls(n_vertices, tuple((e[0], e[1]) for e in edges))

    @classmethod
    def path(cls, n_vertices: int) -> "GraphSpec":
        return cls.from_edges(n_vertices, [(i, i + 1) for i in range(n_vertices - 1)])

    @classmethod
    def cycle(cls, n_vertices: int) -> "GraphSpec":
        edges = [(i, (i + 1) % n_vertices) for i in range(n_vertices)]
        return cls.from_edges(n_vertices, edges)

    @classmethod
    def grid(cls, width: int, height: int) -> "GraphSpec":
        def idx(r: int, c: int) -> int:
            return r * width + c

        edges = []
        for r in range(height):
            for c in range(width):
                if c + 1 < width:
                    edges.append((idx(r, c), idx(r, c + 1)))
                if r + 1 < height:
                    edges.append((idx(r, c), idx(r + 1, c)))
        return cls.from_edges(width * height, edges)

    def neighbors(self, v: int) -> tuple[int, ...]:
        out = []
        for u, w in self.edges:
            if u == v:
                out.append(w)
            elif w == v:
                out.append(u)
        return tuple(sorted(out))

    def degree(self, v: int) -> int:
        return len(self.neighbors(v))

    def is_connected(self) -> bool:
        if self.n_vertices == 1:
            return True
        seen = {0}
        stack = [0]
        while stack:
            v = stack.pop()
            for u in self.neighbors(v):
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        return len(seen) == self.n_vertices

    def components(self) -> list[tuple[int, ...]]:
        """Connected components, each sorted, ordered by smallest vertex."""
        unseen = set(range(self.n_vertices))
        comps = []
        while unseen:
            start = min(unseen)
            comp = {start}
            stack = [start]
            unseen.discard(start)
            while stack:
                v = stack.pop()
                for u in self.neighbors(v):
                    if u in unseen:
                        unseen.discard(u)
                        comp.add(u)
                        stack.append(u)
            comps.append(tuple(sorted(comp)))
        return comps

    def to_json_dict(self) -> dict:
        return {"n": self.n_vertices, "edges": [list(e) for e in self.edges]}

    @classmethod
    def from_json_dict(cls, data: dict) -> "GraphSpec":
        try:
            n = int(data["n"])
            edges = data.get("edges", [])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed graph object: {exc}") from exc
        return cls.from_edges(n, edges)


# ---------------------------------------------------------------------------
# states
# ---------------------------------------------------------------------------


class PureState:
    """Normalized dense state vector over ``2**num_qubits`` amplitudes."""

    __slots__ = ("num_qubits", "amps")

    def __init__(self, num_qubits: int, amps: np.ndarray):
        if num_qubits < 1:
            raise ValueError("need at least one qubit")
        if num_qubits > QUBIT_CAP:
            raise QubitCapError(
                f"register of {num_qubits} qubits exceeds the cap of {QUBIT_CAP}"
            )
        amps = np.asarray(amps, dtype=complex)
        if amps.shape != (2**num_qubits,):
            raise ValueError(
                f"expected {2**num_qubits} amplitudes, got shape {amps.shape}"
            )
        self.num_qubits = num_qubits
        self.amps = amps

    @classmethod
    def zero(cls, num_qubits: int) -> "PureState":
        amps = np.zeros(2**num_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(num_qubits, amps)

    @classmethod
    def uniform_plus(cls, num_qubits: int) -> "PureState":
        amps = np.full(2**num_qubits, 2.0 ** (-num_qubits / 2.0), dtype=complex)
        return cls(num_qubits, amps)

    @classmethod
    def basis(cls, num_qubits: int, index: int) -> "PureState":
        amps = np.zeros(2**num_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(num_qubits, amps)

    @property
    def norm_sq(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)

    def normalize(self) -> "PureState":
        n = self.norm_sq
        if n <= 0:
            raise ValueError("cannot normalize a zero state")
        return PureState(self.num_qubits, self.amps / np.sqrt(n))

    def overlap(self, other: "PureState") -> complex:
        """<self|other>."""
        if other.num_qubits != self.num_qubits:
            raise ValueError("register sizes differ")
        return complex(np.vdot(self.amps, other.amps))

    def to_json_dict(self) -> dict:
        return {
            "num_qubits": self.num_qubits,
            "amps": [[float(a.real), float(a.imag)] for a in self.amps],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "PureState":
        n = int(data["num_qubits"])
        amps = np.array([complex(re, im) for re, im in data["amps"]], dtype=complex)
        return cls(n, amps)

    def __repr__(self) -> str:
        return f"PureState(num_qubits={self.num_qubits})"


@dataclass(frozen=True)
class Branch:
    """One member of a heralded ensemble: weight is the joint probability of
    the classical record that produced this branch."""

    weight: float
    state: PureState
    record: tuple = ()


@dataclass(frozen=True)
class BranchMix:
    """Sub-normalized ensemble of pure branches (weights >= 0, sum <= 1)."""

    branches: tuple[Branch, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "branches", tuple(self.branches))
        for b in self.branches:
            if b.weight < 0:
                raise ValueError("branch weights must be >= 0")
        if self.total_weight > 1.0 + 1e-9:
            raise ValueError(f"branch weights sum to {self.total_weight} > 1")

    @property
    def total_weight(self) -> float:
        return float(sum(b.weight for b in self.branches))

    def __len__(self) -> int:
        return len(self.branches)


# ---------------------------------------------------------------------------
# bit helpers
# ---------------------------------------------------------------------------


def qubit_bit(num_qubits: int, index: int, qubit: int) -> int:
    """Bit of ``qubit`` inside basis index ``index`` (qubit 0 = MSB)."""
    return (index >> (num_qubits - 1 - qubit)) & 1


def qubits_to_mask(num_qubits: int, qubits: Iterable[int]) -> int:
    mask = 0
    for q in qubits:
        if not 0 <= q < num_qubits:
            raise ValueError(f"qubit {q} out of range")
        mask |= 1 << (num_qubits - 1 - q)
    return mask


def mask_to_qubits(num_qubits: int, mask: int) -> tuple[int, ...]:
    return tuple(q for q in range(num_qubits) if mask >> (num_qubits - 1 - q) & 1)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def apply_x_mask(state: PureState, mask: int) -> PureState:
    """Flip every qubit whose mask bit is set (bitwise X layer).

    The mask lives in basis-index space (qubit 0 = MSB), so the operation is
    a pure index permutation and therefore exact.
    """
    if not 0 <= mask < 2**state.num_qubits:
        raise ValueError(f"mask {mask} out of range")
    if mask == 0:
        return PureState(state.num_qubits, state.amps.copy())
    idx = np.arange(2**state.num_qubits) ^ mask
    return PureState(state.num_qubits, state.amps[idx])


def _one_qubit(state: PureState, qubit: int, matrix: np.ndarray) -> PureState:
    n = state.num_qubits
    if not 0 <= qubit < n:
        raise ValueError(f"qubit {qubit} out of range")
    shaped = state.amps.reshape(2**qubit, 2, 2 ** (n - 1 - qubit))
    out = np.einsum("ab,ibj->iaj", matrix, shaped)
    return PureState(n, out.reshape(-1))


def apply_ry(state: PureState, qubit: int, theta: float) -> PureState:
    """Real rotation about Y: |0> -> cos(t/2)|0> + sin(t/2)|1>,
    |1> -> -sin(t/2)|0> + cos(t/2)|1>."""
    c = np.cos(theta / 2.0)
    s = np.sin(theta / 2.0)
    return _one_qubit(state, qubit, np.array([[c, -s], [s, c]], dtype=complex))


def apply_z(state: PureState, qubit: int) -> PureState:
    """Phase flip of the |1> component of one qubit."""
    n = state.num_qubits
    if not 0 <= qubit < n:
        raise ValueError(f"qubit {qubit} out of range")
    idx = np.arange(2**n)
    signs = np.where((idx >> (n - 1 - qubit)) & 1 == 1, -1.0, 1.0)
    return PureState(n, state.amps * signs)


def apply_cz(state: PureState, u: int, v: int) -> PureState:
    """Controlled-Z between two qubits (symmetric)."""
    n = state.num_qubits
    if u == v:
        raise ValueError("CZ needs two distinct qubits")
    for q in (u, v):
        if not 0 <= q < n:
            raise ValueError(f"qubit {q} out of range")
    idx = np.arange(2**n)
    both = ((idx >> (n - 1 - u)) & 1) & ((idx >> (n - 1 - v)) & 1)
    signs = np.where(both == 1, -1.0, 1.0)
    return PureState(n, state.amps * signs)


def target_graph_state(graph: GraphSpec) -> PureState:
    """Reference graph state: CZ over every edge applied to |+>^n.

    This construction is the verification oracle for every compiled
    protocol; it never touches the carving machinery.
    """
    if graph.n_vertices > QUBIT_CAP:
        raise QubitCapError(
            f"graph on {graph.n_vertices} vertices exceeds the cap of {QUBIT_CAP}"
        )
    state = PureState.uniform_plus(graph.n_vertices)
    for u, v in graph.edges:
        state = apply_cz(state, u, v)
    return state


def fidelity(state: Union[PureState, BranchMix], target: PureState) -> float:
    """|<target|state>|**2, extended to ensembles as the weighted average
    over branches (weights renormalized)."""
    if isinstance(state, PureState):
        return float(abs(state.overlap(target)) ** 2)
    total = state.total_weight
    if total <= 0:
        return 0.0
    acc = 0.0
    for b in state.branches:
        acc += b.weight * abs(b.state.overlap(target)) ** 2
    return float(acc / total)
