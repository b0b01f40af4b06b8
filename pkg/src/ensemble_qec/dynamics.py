"""Blockade-constrained laser drives on the sparse symmetric representation.

A drive is a set of simultaneously applied transitions ``a <-> b`` sharing one
Rabi frequency.  With ``H = (Omega/2) sum_k (e^{i phi} |b><a|_k + h.c.)`` and
single-atom pulse area ``theta = Omega t`` the evolution is
``exp(-i theta/2 M)``, where ``M`` has the collective elements
``sqrt(n_a (n_b + 1))`` on the ensemble and ``1`` on the distinguished atom.
Moves that would create a second Rydberg excitation are absent.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Dict, Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .core import (
    LEAK,
    R,
    R0,
    S,
    HybridBasisState,
    Level,
    PureState,
    SectorKey,
    qubit_level,
)

# Weight of a constraint-violating component that gate preconditions tolerate.
PRECONDITION_TOL = 1e-12


class Transition(NamedTuple):
    a: Level
    b: Level
    phase: float = 0.0
    weight: float = 1.0


@dataclass(frozen=True)
class Drive:
    transitions: Tuple[Transition, ...]
    area: float

    def __post_init__(self):
        trs = tuple(Transition(*t) for t in self.transitions)
        if not trs:
            raise ValueError("a drive needs at least one transition")
        seen = set()
        for t in trs:
            if t.a == t.b:
                raise ValueError(f"transition {t.a}<->{t.b} has identical levels")
            if LEAK in (t.a, t.b):
                raise ValueError("the leaked level is dark to every drive")
            if t.weight <= 0:
                raise ValueError("transition weights must be positive")
            pair = frozenset((t.a, t.b))
            if pair in seen:
                raise ValueError(f"transition {t.a}<->{t.b} listed twice")
            seen.add(pair)
        object.__setattr__(self, "transitions", trs)
        object.__setattr__(self, "area", float(self.area))

    @classmethod
    def single(cls, a: Level, b: Level, area: float, phase: float = 0.0) -> "Drive":
        return cls((Transition(a, b, phase),), area)


@dataclass(frozen=True)
class CompositeSequence:
    pulses: Tuple[Drive, ...]

    def __post_init__(self):
        if not self.pulses:
            raise ValueError("composite sequence must contain at least one pulse")
        object.__setattr__(self, "pulses", tuple(self.pulses))


def _moves(b: HybridBasisState, drive: Drive) -> Iterator[Tuple[HybridBasisState, complex]]:
    """Basis states reachable from ``b`` by one drive term, with the matrix element <new|M|b>."""
    ryd = b.rydberg_total
    d = b.distinguished
    ens = b.ensemble
    for t in drive.transitions:
        fwd = t.weight * complex(math.cos(t.phase), math.sin(t.phase))
        for src, dst, elem in ((t.a, t.b, fwd), (t.b, t.a, fwd.conjugate())):
            dr = dst.is_rydberg - src.is_rydberg
            if ryd + dr > 1:
                continue
            if d == src:
                yield HybridBasisState(dst, ens), elem
            n_src = ens.count(src)
            if n_src:
                n_dst = ens.count(dst)
                new = ens.shifted(src, -1).shifted(dst, 1)
                yield HybridBasisState(d, new), elem * math.sqrt(n_src * (n_dst + 1))


def reachable_basis(support, drive: Drive) -> List[HybridBasisState]:
    """Breadth-first closure of ``support`` under the drive's moves."""
    order: List[HybridBasisState] = []
    seen = set()
    queue = deque(support)
    while queue:
        b = queue.popleft()
        if b in seen:
            continue
        seen.add(b)
        order.append(b)
        for nb, _ in _moves(b, drive):
            if nb not in seen:
                queue.append(nb)
    return order


def build_coupling_matrix(drive: Drive, basis: Sequence[HybridBasisState], sector: Optional[SectorKey] = None) -> np.ndarray:
    """Hermitian coupling matrix ``M`` of the drive over ``basis``.

    Raises ``ValueError`` if a basis state couples outside ``basis`` or lies
    outside ``sector`` when one is given.
    """
    index = {b: k for k, b in enumerate(basis)}
    if len(index) != len(basis):
        raise ValueError("basis contains duplicates")
    if sector is not None:
        bad = [b for b in basis if b.sector != sector]
        if bad:
            raise ValueError(f"basis state {bad[0]} outside sector {sector}")
    m = np.zeros((len(basis), len(basis)), dtype=complex)
    for b, k in index.items():
        for nb, elem in _moves(b, drive):
            j = index.get(nb)
            if j is None:
                raise ValueError(f"basis not closed under drive: {b} couples to {nb}")
            m[j, k] += elem
    return m


def evolution_operator(m: np.ndarray, area: float) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    return (v * np.exp(-0.5j * area * w)) @ v.conj().T


def apply_drive(state: PureState, drive: Drive) -> PureState:
    """Exact evolution of ``state`` under ``drive`` on its reachable subspace."""
    basis = reachable_basis(state, drive)
    m = build_coupling_matrix(drive, basis)
    u = evolution_operator(m, drive.area)
    vec = np.array([state.amplitude(b) for b in basis])
    out = u @ vec
    return PureState(dict(zip(basis, out)), normalize=False)


def apply_sequence(state: PureState, seq: CompositeSequence | Sequence[Drive]) -> PureState:
    pulses = seq.pulses if isinstance(seq, CompositeSequence) else seq
    for drive in pulses:
        state = apply_drive(state, drive)
    return state


# --- gates -----------------------------------------------------------------

def _manifold_count(b: HybridBasisState, i: int) -> int:
    return b.count(qubit_level(i, 0)) + b.count(qubit_level(i, 1))


def _require(state: PureState, predicate, message: str):
    bad = state.population(lambda b: not predicate(b))
    if bad > PRECONDITION_TOL:
        raise ValueError(f"{message} (violating population {bad:.3g})")


def single_qubit_gate(state: PureState, i: int, theta: float, phi: float) -> PureState:
    """Rotation ``R(theta, phi) = exp(-i theta/2 (cos phi X + sin phi Y))`` on qubit ``i``.

    Raises ``ValueError`` if the manifold ``{0_i, 1_i}`` is not singly occupied,
    which signals an uncorrected error.
    """
    _require(state, lambda b: _manifold_count(b, i) == 1, f"qubit {i} manifold is not singly occupied")
    return apply_drive(state, Drive.single(qubit_level(i, 0), qubit_level(i, 1), theta, phi))


def hadamard_like(state: PureState, i: int) -> PureState:
    """``R(pi/2, pi/2)``: maps 0 to (0+1)/sqrt2 and 1 to (1-0)/sqrt2."""
    return single_qubit_gate(state, i, math.pi / 2, math.pi / 2)


def z_flip(state: PureState, i: int) -> PureState:
    # R(pi, pi/2) R(pi, 0) = i Z
    state = single_qubit_gate(state, i, math.pi, 0.0)
    return single_qubit_gate(state, i, math.pi, math.pi / 2)


def cz_gate(state: PureState, i: int, j: int, phase_fix: bool = True,
            control_level: Level = R0, target_level: Level = R) -> PureState:
    """Blockade controlled-Z between qubits ``i`` and ``j``.

    Pulse sequence: pi on ``1_i -> r0``, 2pi on ``1_j -> r`` (blocked when qubit
    i sits in ``r0``), pi on ``r0 -> 1_i``.  The two Rydberg levels must differ:
    with a shared level the 2pi pulse would also drive the control atom down
    into ``1_j``.  The raw pattern on
    ``|00>,|01>,|10>,|11>`` is ``(1, -1, -1, -1)``.  With ``phase_fix`` a Z on
    each qubit follows and the net gate is ``-CZ``, i.e. CZ up to a global sign.
    """
    if i == j:
        raise ValueError("cz_gate needs two distinct qubits")
    for q in (i, j):
        _require(state, lambda b, q=q: _manifold_count(b, q) == 1, f"qubit {q} manifold is not singly occupied")
    if state.rydberg_population() > PRECONDITION_TOL:
        raise ValueError("Rydberg level occupied at gate entry")
    if control_level == target_level or not (control_level.is_rydberg and target_level.is_rydberg):
        raise ValueError("control and target need two distinct Rydberg levels")
    one_i, one_j = qubit_level(i, 1), qubit_level(j, 1)
    state = apply_drive(state, Drive.single(one_i, control_level, math.pi))
    state = apply_drive(state, Drive.single(one_j, target_level, 2 * math.pi))
    state = apply_drive(state, Drive.single(one_i, control_level, math.pi))
    if phase_fix:
        state = z_flip(z_flip(state, i), j)
    return state


def cnot_gate(state: PureState, control: int, target: int) -> PureState:
    """CNOT up to global phase: ``R(pi/2, pi/2)`` . CZ . ``R(pi/2, 3pi/2)`` on the target."""
    state = single_qubit_gate(state, target, math.pi / 2, 3 * math.pi / 2)
    state = cz_gate(state, control, target)
    return single_qubit_gate(state, target, math.pi / 2, math.pi / 2)


def reservoir_calibration(state: PureState, level: Level = R) -> int:
    """Collective enhancement factor squared for an s <-> ``level`` pulse.

    Taken from the dominant component: the number of reservoir atoms that the
    drive sees (ensemble plus a distinguished atom in ``s``), plus an atom
    already in ``level`` that would return to ``s``.
    """
    b = max(state.items(), key=lambda kv: abs(kv[1]))[0]
    n = b.count(S)
    if b.count(level):
        n += 1
    return n


def encode_one_atom(state: PureState, target: Level) -> PureState:
    """Move exactly one atom from ``s`` into the empty qubit level ``target``.

    A collective pi pulse on ``s -> r`` (area ``pi/sqrt(n_s)``) puts exactly one
    atom in ``r`` thanks to the blockade, then a pi pulse ``r -> target`` with
    phase pi maps it down; the net phase on ``|S>`` is +1.
    """
    if target.kind != "qubit":
        raise ValueError(f"target must be a qubit level, got {target}")
    i = target.qubit
    _require(state, lambda b: _manifold_count(b, i) == 0, f"target manifold of qubit {i} is occupied")
    _require(state, lambda b: b.rydberg_total == 0, "Rydberg level occupied before encoding")
    n_s = reservoir_calibration(state, R)
    if n_s == 0:
        raise ValueError("reservoir is empty")
    state = apply_drive(state, Drive.single(S, R, math.pi / math.sqrt(n_s)))
    return apply_drive(state, Drive.single(R, target, math.pi, math.pi))
