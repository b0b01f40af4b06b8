"""Brute-force tensor-product simulator used to check the symmetric engine.

Every atom carries all ``d`` internal levels, so the state vector has
``d**K`` entries.  The drive Hamiltonian is the plain sum of single-atom
terms, projected onto product states with at most one Rydberg excitation.
Only meant for a handful of atoms.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import expm_multiply

from .core import Level, PureState, RegisterConfig, register_state
from .dynamics import Drive, Transition, apply_drive
from .protocol import DisturbanceCoeffs, apply_disturbance

MAX_ATOMS = 5
MAX_DIM = 10**5


@dataclass
class FullState:
    vector: np.ndarray
    n_atoms: int
    levels: Tuple[Level, ...]

    @property
    def dim(self) -> int:
        return len(self.levels) ** self.n_atoms

    def norm2(self) -> float:
        return float(np.vdot(self.vector, self.vector).real)


def _check_caps(n_atoms: int, d: int, max_atoms: int, max_dim: int):
    if n_atoms > max_atoms:
        raise ValueError(f"{n_atoms} atoms exceed the oracle cap of {max_atoms}")
    if d ** n_atoms > max_dim:
        raise ValueError(f"dimension {d}**{n_atoms} exceeds the oracle cap of {max_dim}")


@functools.lru_cache(maxsize=16)
def _digits(d: int, n_atoms: int) -> np.ndarray:
    idx = np.arange(d ** n_atoms)
    out = np.empty((idx.size, n_atoms), dtype=np.int16)
    for k in range(n_atoms - 1, -1, -1):
        out[:, k] = idx % d
        idx = idx // d
    return out


def _index(digits: Sequence[int], d: int) -> int:
    i = 0
    for x in digits:
        i = i * d + x
    return i


def embed_symmetric(state: PureState, levels: Sequence[Level], max_atoms: int = MAX_ATOMS,
                    max_dim: int = MAX_DIM) -> FullState:
    """Expand each occupation into the normalized sum over its distinct permutations.

    A distinguished atom is pinned to the first position.
    """
    levels = tuple(levels)
    pos = {lvl: k for k, lvl in enumerate(levels)}
    sizes = {b.atoms for b in state}
    if len(sizes) != 1:
        raise ValueError(f"state mixes atom numbers {sorted(sizes)}")
    n = sizes.pop()
    d = len(levels)
    _check_caps(n, d, max_atoms, max_dim)
    vec = np.zeros(d ** n, dtype=complex)
    for b, amp in state.items():
        multiset = [pos[lvl] for lvl, c in b.ensemble for _ in range(c)]
        perms = set(itertools.permutations(multiset))
        w = amp / math.sqrt(len(perms))
        head = () if b.distinguished is None else (pos[b.distinguished],)
        for perm in perms:
            vec[_index(head + perm, d)] += w
    return FullState(vec, n, levels)


def oracle_levels(config: RegisterConfig) -> Tuple[Level, ...]:
    return config.levels(include_leak=True)


def _drive_matrix(drive: Drive, levels: Tuple[Level, ...], n_atoms: int):
    d = len(levels)
    pos = {lvl: k for k, lvl in enumerate(levels)}
    dig = _digits(d, n_atoms)
    ryd = np.array([lvl.is_rydberg for lvl in levels])
    n_ryd = ryd[dig].sum(axis=1)
    allowed = n_ryd <= 1
    rows, cols, vals = [], [], []
    for t in drive.transitions:
        a, b = pos[t.a], pos[t.b]
        fwd = t.weight * np.exp(1j * t.phase)
        for src, dst, elem in ((a, b, fwd), (b, a, np.conj(fwd))):
            for k in range(n_atoms):
                stride = d ** (n_atoms - 1 - k)
                from_idx = np.nonzero(allowed & (dig[:, k] == src))[0]
                to_idx = from_idx + (dst - src) * stride
                keep = allowed[to_idx]
                rows.append(to_idx[keep])
                cols.append(from_idx[keep])
                vals.append(np.full(keep.sum(), elem))
    dim = d ** n_atoms
    m = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim))
    return m, allowed


def apply_drive_full(full: FullState, drive: Drive, max_atoms: int = MAX_ATOMS, max_dim: int = MAX_DIM) -> FullState:
    """Evolve with ``exp(-i theta/2 P M P)``, ``P`` the at-most-one-Rydberg projector."""
    _check_caps(full.n_atoms, len(full.levels), max_atoms, max_dim)
    m, allowed = _drive_matrix(drive, full.levels, full.n_atoms)
    if np.linalg.norm(full.vector[~allowed]) > 1e-12:
        raise ValueError("state has weight outside the blockade subspace")
    out = expm_multiply(-0.5j * drive.area * m, full.vector)
    return FullState(out, full.n_atoms, full.levels)


def overlap_with_symmetric(full: FullState, state: PureState) -> float:
    """``|<embed(state)|full>|^2``."""
    emb = embed_symmetric(state, full.levels, max_atoms=max(MAX_ATOMS, full.n_atoms), max_dim=max(MAX_DIM, full.dim))
    if emb.n_atoms != full.n_atoms:
        raise ValueError(f"atom numbers differ: {emb.n_atoms} vs {full.n_atoms}")
    return float(abs(np.vdot(emb.vector, full.vector)) ** 2)


def permutation_asymmetry(full: FullState, pinned_first: bool = False) -> float:
    """Largest ``||P psi - psi||`` over transpositions ``P`` of the unpinned atoms."""
    d, n = len(full.levels), full.n_atoms
    tensor = full.vector.reshape((d,) * n)
    start = 1 if pinned_first else 0
    worst = 0.0
    for i, j in itertools.combinations(range(start, n), 2):
        worst = max(worst, float(np.linalg.norm(np.swapaxes(tensor, i, j) - tensor)))
    return worst


def random_drive(levels: Sequence[Level], rng: np.random.Generator, max_transitions: int = 2) -> Drive:
    """Drive on one or two random level pairs (leaked level excluded)."""
    choices = [lvl for lvl in levels if lvl.kind != "leak"]
    pairs = list(itertools.combinations(choices, 2))
    n = int(rng.integers(1, max_transitions + 1))
    picked = rng.choice(len(pairs), size=n, replace=False)
    trs = tuple(Transition(*pairs[k], float(rng.uniform(0, 2 * np.pi)), float(rng.uniform(0.5, 1.5))) for k in picked)
    return Drive(trs, float(rng.uniform(0.1, 2 * np.pi)))


def random_case(rng: np.random.Generator, max_atoms: int = 5, max_qubits: int = 2, max_pulses: int = 8):
    """Random register (optionally disturbed) plus a random drive sequence, for engine/oracle checks."""
    n_qubits = int(rng.integers(1, max_qubits + 1))
    n_atoms = int(rng.integers(n_qubits + 1, max_atoms + 1))
    config = RegisterConfig(n_qubits=n_qubits, n_atoms=n_atoms)
    amps = []
    for _ in range(n_qubits):
        z = rng.normal(size=2) + 1j * rng.normal(size=2)
        amps.append(tuple(z / np.linalg.norm(z)))
    state = register_state(amps, n_atoms)
    if rng.random() < 0.5:
        state = apply_disturbance(state, DisturbanceCoeffs.random(rng), qubit=int(rng.integers(1, n_qubits + 1)))
    levels = oracle_levels(config)
    drives = [random_drive(levels, rng) for _ in range(int(rng.integers(1, max_pulses + 1)))]
    return config, state, drives


def engine_oracle_overlap(config: RegisterConfig, state: PureState, drives: Sequence[Drive]) -> float:
    """Smallest overlap between engine and oracle states along the drive sequence."""
    levels = oracle_levels(config)
    full = embed_symmetric(state, levels)
    worst = 1.0
    for drive in drives:
        state = apply_drive(state, drive)
        full = apply_drive_full(full, drive)
        worst = min(worst, overlap_with_symmetric(full, state))
    return worst
