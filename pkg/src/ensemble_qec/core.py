"""Register levels, symmetric occupation states and the sparse state algebra.

Atoms in an ensemble register are identical, so a permutation-symmetric state
is fully described by how many atoms sit in each internal level.  A single
atom hit by an error stops being symmetric with the rest; it is carried as a
separate "distinguished" tensor factor next to the symmetric ensemble.

Amplitudes live in a sparse map ``HybridBasisState -> complex``.  Basis states
with more than one Rydberg excitation (distinguished atom included) are never
represented: the blockade is treated as infinitely strong.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, Mapping, NamedTuple, Optional, Sequence, Tuple

NORM_TOL = 1e-12
PRUNE_TOL = 1e-15

_RANK = {"s": 0, "qubit": 1, "rydberg": 2, "leak": 3}


@dataclass(frozen=True, order=True)
class Level:
    """One internal atomic level.

    ``kind`` is one of ``"s"`` (reservoir), ``"qubit"``, ``"rydberg"`` or
    ``"leak"``.  The leaked level stands for any single-atom state orthogonal
    to the register and reservoir levels; no laser drive couples to it.
    """

    rank: int
    qubit: int
    bit: int
    name: str

    @property
    def kind(self) -> str:
        return ("s", "qubit", "rydberg", "leak")[self.rank]

    @property
    def is_rydberg(self) -> bool:
        return self.rank == _RANK["rydberg"]

    def __str__(self) -> str:
        return self.name

    def __repr__(self) -> str:
        return f"Level({self.name!r})"


S = Level(_RANK["s"], 0, 0, "s")
LEAK = Level(_RANK["leak"], 0, 0, "leak")


def qubit_level(i: int, bit: int) -> Level:
    if i < 1:
        raise ValueError(f"qubit index must be >= 1, got {i}")
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit}")
    return Level(_RANK["qubit"], i, bit, f"{bit}_{i}")


def rydberg_level(name: str) -> Level:
    if not name or name in ("s", "leak") or "_" in name:
        raise ValueError(f"invalid rydberg level name {name!r}")
    return Level(_RANK["rydberg"], 0, 0, name)


R = rydberg_level("r")
R0 = rydberg_level("r0")
R1 = rydberg_level("r1")


def parse_level(text: str) -> Level:
    """Inverse of ``str(level)``: ``s``, ``leak``, ``<bit>_<qubit>`` or a Rydberg name."""
    text = text.strip()
    if text == "s":
        return S
    if text == "leak":
        return LEAK
    if "_" in text:
        bit, _, idx = text.partition("_")
        return qubit_level(int(idx), int(bit))
    return rydberg_level(text)


@dataclass(frozen=True)
class RegisterConfig:
    """Static description of an ensemble register."""

    n_qubits: int
    n_atoms: int
    rydberg_levels: Tuple[str, ...] = ("r", "r0", "r1")
    blockading: Optional[Tuple[bool, ...]] = None
    detector_efficiency: float = 1.0

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be a positive integer")
        if self.n_atoms < 1:
            raise ValueError("n_atoms must be a positive integer")
        if self.n_atoms < self.n_qubits:
            raise ValueError(f"n_atoms={self.n_atoms} cannot hold n_qubits={self.n_qubits}")
        names = tuple(self.rydberg_levels)
        object.__setattr__(self, "rydberg_levels", names)
        for required in ("r", "r0", "r1"):
            if required not in names:
                raise ValueError(f"rydberg_levels must include {required!r}")
        if len(set(names)) != len(names):
            raise ValueError("rydberg level names must be unique")
        for n in names:
            rydberg_level(n)
        flags = self.blockading if self.blockading is not None else (True,) * len(names)
        if len(flags) != len(names) or not all(flags):
            raise ValueError("every rydberg level must be flagged blockading")
        object.__setattr__(self, "blockading", tuple(flags))
        if not 0.0 <= self.detector_efficiency <= 1.0:
            raise ValueError("detector_efficiency must lie in [0, 1]")

    @property
    def has_refill_reservoir(self) -> bool:
        return self.n_atoms >= self.n_qubits + 2

    def levels(self, include_leak: bool = True) -> Tuple[Level, ...]:
        """All levels in canonical order: s, qubit levels, Rydberg levels, leak."""
        out = [S]
        for i in range(1, self.n_qubits + 1):
            out += [qubit_level(i, 0), qubit_level(i, 1)]
        out += [rydberg_level(n) for n in self.rydberg_levels]
        if include_leak:
            out.append(LEAK)
        return tuple(out)


class Occupation(tuple):
    """Sorted, hashable ``((Level, count), ...)`` with zero counts dropped."""

    __slots__ = ()

    def __new__(cls, counts: Mapping[Level, int] | Iterable[Tuple[Level, int]] = ()):
        items = counts.items() if isinstance(counts, Mapping) else counts
        merged: Dict[Level, int] = {}
        for lvl, n in items:
            if n < 0:
                raise ValueError(f"negative occupation for {lvl}")
            merged[lvl] = merged.get(lvl, 0) + int(n)
        return super().__new__(cls, tuple(sorted((l, n) for l, n in merged.items() if n)))

    def count(self, level: Level) -> int:  # type: ignore[override]
        for lvl, n in self:
            if lvl == level:
                return n
        return 0

    def as_dict(self) -> Dict[Level, int]:
        return dict(self)

    @property
    def total(self) -> int:
        return sum(n for _, n in self)

    @property
    def rydberg_total(self) -> int:
        return sum(n for lvl, n in self if lvl.is_rydberg)

    def shifted(self, level: Level, delta: int) -> "Occupation":
        d = dict(self)
        d[level] = d.get(level, 0) + delta
        return Occupation(d)

    def to_csv(self) -> str:
        return ",".join(f"{lvl}={n}" for lvl, n in self) or "-"

    @classmethod
    def from_csv(cls, text: str) -> "Occupation":
        if text == "-":
            return cls()
        pairs = (p.split("=") for p in text.split(","))
        return cls((parse_level(a), int(b)) for a, b in pairs)

    def __repr__(self) -> str:
        return f"Occupation({self.to_csv()})"


class SectorKey(NamedTuple):
    atoms: int
    distinguished: bool


class HybridBasisState(NamedTuple):
    """Distinguished atom level (or ``None``) tensored with a symmetric occupation."""

    distinguished: Optional[Level]
    ensemble: Occupation

    @property
    def atoms(self) -> int:
        return self.ensemble.total + (self.distinguished is not None)

    @property
    def sector(self) -> SectorKey:
        return SectorKey(self.atoms, self.distinguished is not None)

    @property
    def rydberg_total(self) -> int:
        d = self.distinguished
        return self.ensemble.rydberg_total + (d is not None and d.is_rydberg)

    def count(self, level: Level) -> int:
        return self.ensemble.count(level) + (self.distinguished == level)


def basis(ensemble: Mapping[Level, int], distinguished: Optional[Level] = None) -> HybridBasisState:
    return HybridBasisState(distinguished, Occupation(ensemble))


class PureState:
    """Sparse normalized state over hybrid basis states.

    Construction normalizes by default and drops amplitudes whose modulus is
    below ``prune``.  Instances are treated as immutable values.
    """

    __slots__ = ("_amps",)

    def __init__(self, amps: Mapping[HybridBasisState, complex], normalize: bool = True, prune: float = PRUNE_TOL):
        clean = {}
        for b, a in amps.items():
            if b.rydberg_total > 1:
                raise ValueError(f"basis state {b} violates the Rydberg blockade")
            if abs(a) > prune:
                clean[b] = complex(a)
        if normalize:
            nrm = math.sqrt(sum(abs(a) ** 2 for a in clean.values()))
            if nrm == 0.0:
                raise ValueError("cannot normalize an empty state")
            clean = {b: a / nrm for b, a in clean.items()}
        self._amps: Dict[HybridBasisState, complex] = clean

    @classmethod
    def basis_state(cls, ensemble: Mapping[Level, int], distinguished: Optional[Level] = None) -> "PureState":
        return cls({basis(ensemble, distinguished): 1.0})

    @property
    def amplitudes(self) -> Dict[HybridBasisState, complex]:
        return dict(self._amps)

    def __iter__(self) -> Iterator[HybridBasisState]:
        return iter(self._amps)

    def __len__(self) -> int:
        return len(self._amps)

    def items(self):
        return self._amps.items()

    def amplitude(self, b: HybridBasisState) -> complex:
        return self._amps.get(b, 0j)

    def norm2(self) -> float:
        return sum(abs(a) ** 2 for a in self._amps.values())

    def sectors(self) -> Dict[SectorKey, "PureState"]:
        out: Dict[SectorKey, Dict[HybridBasisState, complex]] = {}
        for b, a in self._amps.items():
            out.setdefault(b.sector, {})[b] = a
        return {k: PureState(v, normalize=False) for k, v in out.items()}

    def population(self, predicate) -> float:
        return sum(abs(a) ** 2 for b, a in self._amps.items() if predicate(b))

    def project(self, predicate, normalize: bool = True) -> "PureState":
        return PureState({b: a for b, a in self._amps.items() if predicate(b)}, normalize=normalize)

    def scaled(self, factor: complex) -> "PureState":
        return PureState({b: a * factor for b, a in self._amps.items()}, normalize=False)

    def __add__(self, other: "PureState") -> "PureState":
        acc = dict(self._amps)
        for b, a in other.items():
            acc[b] = acc.get(b, 0j) + a
        return PureState(acc, normalize=False)

    def rydberg_population(self) -> float:
        return self.population(lambda b: b.rydberg_total > 0)

    def mean_atoms(self) -> float:
        return sum(abs(a) ** 2 * b.atoms for b, a in self._amps.items()) / self.norm2()

    def __repr__(self) -> str:
        terms = ", ".join(f"{a:.3g}:{b.distinguished or '-'}|{b.ensemble.to_csv()}" for b, a in list(self._amps.items())[:6])
        more = "" if len(self._amps) <= 6 else f", ... ({len(self._amps)} terms)"
        return f"PureState({terms}{more})"


# --- register states -------------------------------------------------------

RegisterAmplitudes = Dict[Tuple[int, ...], complex]


def product_amplitudes(qubit_amplitudes: Sequence[Tuple[complex, complex]]) -> RegisterAmplitudes:
    """Expand per-qubit ``(a_i, b_i)`` pairs into amplitudes over bit strings."""
    for i, (a, b) in enumerate(qubit_amplitudes, start=1):
        if abs(abs(a) ** 2 + abs(b) ** 2 - 1.0) > NORM_TOL:
            raise ValueError(f"qubit {i} amplitudes are not normalized")
    out: RegisterAmplitudes = {}
    for bits in itertools.product((0, 1), repeat=len(qubit_amplitudes)):
        amp = complex(1.0)
        for (a, b), bit in zip(qubit_amplitudes, bits):
            amp *= b if bit else a
        if amp != 0:
            out[bits] = amp
    return out


def _as_register(target) -> RegisterAmplitudes:
    if isinstance(target, Mapping):
        amps = {tuple(k): complex(v) for k, v in target.items()}
        if abs(sum(abs(v) ** 2 for v in amps.values()) - 1.0) > NORM_TOL:
            raise ValueError("register amplitudes are not normalized")
        return amps
    return product_amplitudes(target)


def register_occupation(bits: Sequence[int], n_atoms: int) -> Occupation:
    n = len(bits)
    if n_atoms < n:
        raise ValueError(f"{n_atoms} atoms cannot hold {n} qubits")
    counts = {qubit_level(i, b): 1 for i, b in enumerate(bits, start=1)}
    counts[S] = n_atoms - n
    return Occupation(counts)


def register_state(amplitudes, n_atoms: int) -> PureState:
    """Symmetric K-atom state for register amplitudes (product pairs or bit-string map)."""
    amps = _as_register(amplitudes)
    return PureState({HybridBasisState(None, register_occupation(bits, n_atoms)): a for bits, a in amps.items()})


def new_logical_state(config: RegisterConfig, qubit_amplitudes: Sequence[Tuple[complex, complex]]) -> PureState:
    """Product register state with one atom per qubit manifold and the rest in ``s``."""
    if len(qubit_amplitudes) != config.n_qubits:
        raise ValueError(f"expected {config.n_qubits} amplitude pairs, got {len(qubit_amplitudes)}")
    return register_state(qubit_amplitudes, config.n_atoms)


def reservoir_state(n_atoms: int) -> PureState:
    return PureState.basis_state({S: n_atoms})


# --- algebra ---------------------------------------------------------------

def inner_product(x: PureState, y: PureState) -> complex:
    """``<x|y>``; basis states of different sectors never share a key, hence are orthogonal."""
    if len(x) > len(y):
        return sum((x.amplitude(b).conjugate() * a for b, a in y.items()), 0j)
    return sum((a.conjugate() * y.amplitude(b) for b, a in x.items()), 0j)


def _symmetric_overlap(target: RegisterAmplitudes, n_atoms: int, state_part: Dict[HybridBasisState, complex],
                       distinguished: bool) -> complex:
    # Overlap of the symmetric n_atoms-atom register state with a sector of the
    # state. A distinguished atom in level l pairs with target occupation m via
    # the one-atom split |m> = sum_l sqrt(m_l/K) |l> (x) |m - e_l>.
    acc = 0j
    by_occ = {register_occupation(bits, n_atoms): a for bits, a in target.items()}
    for b, amp in state_part.items():
        if not distinguished:
            t = by_occ.get(b.ensemble)
            if t is not None:
                acc += t.conjugate() * amp
            continue
        full = b.ensemble.shifted(b.distinguished, 1)
        t = by_occ.get(full)
        if t is not None:
            acc += t.conjugate() * amp * math.sqrt(full.count(b.distinguished) / n_atoms)
    return acc


def fidelity_by_atoms(state: PureState, target) -> Dict[int, float]:
    """Register fidelity contributions keyed by the number of register-capable atoms.

    For each sector the state is compared with the ideal symmetric register
    state on the atoms present.  A distinguished atom in an ordinary level is
    kept in the comparison (so a stray reservoir atom costs ~1/K, as a symmetric
    state is not a product with one fixed atom).  A leaked atom is orthogonal to
    every register level and is treated like a lost atom: it is traced out and
    the remaining ensemble is compared directly.  Different sectors add
    incoherently.
    """
    if len(state) == 0:
        raise ValueError("empty state")
    target = _as_register(target)
    n_qubits = len(next(iter(target)))
    norm2 = state.norm2()
    out: Dict[int, float] = {}
    for key, part in state.sectors().items():
        amps = part.amplitudes
        if key.distinguished:
            leaked = {b: a for b, a in amps.items() if b.distinguished == LEAK}
            kept = {b: a for b, a in amps.items() if b.distinguished != LEAK}
            if leaked and key.atoms - 1 >= n_qubits:
                ens = {HybridBasisState(None, b.ensemble): a for b, a in leaked.items()}
                f = abs(_symmetric_overlap(target, key.atoms - 1, ens, False)) ** 2
                out[key.atoms - 1] = out.get(key.atoms - 1, 0.0) + f / norm2
            amps = kept
        if amps and key.atoms >= n_qubits:
            f = abs(_symmetric_overlap(target, key.atoms, amps, key.distinguished)) ** 2
            out[key.atoms] = out.get(key.atoms, 0.0) + f / norm2
    return out


def fidelity_to_logical(state: PureState, target, sector_policy: str = "sum", n_atoms: Optional[int] = None) -> float:
    """Weight of the ideal register state in ``state``.

    ``target`` is either per-qubit ``(a, b)`` pairs or a ``{bits: amplitude}``
    map.  ``sector_policy`` selects which register sizes count: ``"fixed"``
    (only ``n_atoms``), ``"best"`` (the single best size) or ``"sum"`` (all
    sizes; register content does not depend on the atom number).
    """
    by_atoms = fidelity_by_atoms(state, target)
    if sector_policy == "fixed":
        if n_atoms is None:
            raise ValueError("fixed sector policy needs n_atoms")
        f = by_atoms.get(n_atoms, 0.0)
    elif sector_policy == "best":
        f = max(by_atoms.values(), default=0.0)
    elif sector_policy == "sum":
        f = sum(by_atoms.values())
    else:
        raise ValueError(f"unknown sector policy {sector_policy!r}")
    return min(max(f, 0.0), 1.0)


def state_fidelity(x: PureState, y: PureState) -> float:
    return abs(inner_product(x, y)) ** 2 / (x.norm2() * y.norm2())


# --- text serialization ----------------------------------------------------

def dumps_state(state: PureState) -> str:
    """One line per basis state: ``sectorK distinguished occupation_csv re im``."""
    lines = []
    for b, a in sorted(state.items(), key=lambda kv: (kv[0].atoms, str(kv[0].distinguished), kv[0].ensemble)):
        d = "-" if b.distinguished is None else str(b.distinguished)
        lines.append(f"{b.atoms} {d} {b.ensemble.to_csv()} {a.real:.17g} {a.imag:.17g}")
    return "\n".join(lines) + "\n"


def loads_state(text: str, normalize: bool = False) -> PureState:
    amps: Dict[HybridBasisState, complex] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 5:
            raise ValueError(f"line {lineno}: expected 5 fields, got {len(parts)}")
        k, d, occ, re, im = parts
        b = HybridBasisState(None if d == "-" else parse_level(d), Occupation.from_csv(occ))
        if b.atoms != int(k):
            raise ValueError(f"line {lineno}: sector size {k} does not match occupation")
        amps[b] = amps.get(b, 0j) + complex(float(re), float(im))
    return PureState(amps, normalize=normalize)


def global_phase(x: PureState, y: PureState) -> complex:
    """Phase ``e^{i chi}`` minimizing ``|x - e^{i chi} y|``."""
    ov = inner_product(y, x)
    return cmath.exp(1j * cmath.phase(ov)) if abs(ov) > 0 else 1.0
