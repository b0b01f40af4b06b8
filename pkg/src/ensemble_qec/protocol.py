"""Error channels, measurements and the detection/correction protocol.

Protocol steps are written once as generators.  Every measurement yields a
:class:`Fork` listing all outcomes with exact probabilities and receives the
chosen outcome back.  :func:`sample` drives a generator with a random number
generator (one trajectory); :func:`enumerate_branches` replays it along every
outcome path and returns the whole branch tree with path probabilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Generator, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .core import (
    LEAK,
    R0,
    R1,
    S,
    HybridBasisState,
    Level,
    PureState,
    RegisterConfig,
    qubit_level,
    register_occupation,
)
from .dynamics import Drive, apply_sequence, apply_drive, cnot_gate, encode_one_atom, hadamard_like, single_qubit_gate
from .pulses import PulseParams, rydberg_discriminator

# Branches lighter than this are dropped from trees; their states cannot be normalized reliably.
BRANCH_FLOOR = 1e-24


class Branch(NamedTuple):
    outcome: bool
    probability: float
    state: PureState


@dataclass
class Fork:
    observable: str
    branches: List[Branch]


@dataclass(frozen=True)
class DisturbanceCoeffs:
    """State ``c0|0> + c1|1> + cs|s> + c_perp|phi'>`` of the disturbed atom."""

    c0: complex
    c1: complex
    cs: complex
    c_perp: complex = 0j

    def __post_init__(self):
        for name in ("c0", "c1", "cs", "c_perp"):
            object.__setattr__(self, name, complex(getattr(self, name)))
        norm = abs(self.c0) ** 2 + abs(self.c1) ** 2 + abs(self.cs) ** 2 + abs(self.c_perp) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"disturbance coefficients have squared norm {norm}, expected 1")

    @classmethod
    def random(cls, rng: np.random.Generator) -> "DisturbanceCoeffs":
        z = rng.normal(size=4) + 1j * rng.normal(size=4)
        z /= np.linalg.norm(z)
        return cls(*z)


@dataclass
class TrajectoryOutcome:
    branch: str
    measurements: List[Tuple[str, bool, float]]
    final_state: PureState
    atoms_consumed: int = 0
    repaired_qubit: Optional[int] = None
    detected_bit: Optional[int] = None
    probability: float = 1.0
    refilled: Tuple[int, ...] = ()
    cycle_branches: Tuple[str, ...] = ()

    def log_lines(self) -> List[str]:
        """Measurement record as ``step,observable,outcome,prob`` lines."""
        return [f"{k},{obs},{int(out)},{p:.17g}" for k, (obs, out, p) in enumerate(self.measurements, start=1)]


# --- error channels --------------------------------------------------------

def loss_branches(state: PureState) -> List[Tuple[float, Level, PureState]]:
    """Exact mixture after one ensemble atom is lost, split by the lost atom's level."""
    parts: Dict[Level, Dict[HybridBasisState, complex]] = {}
    for b, a in state.items():
        k = b.ensemble.total
        if k == 0:
            raise ValueError("cannot lose an atom from an empty ensemble")
        for lvl, n in b.ensemble:
            nb = HybridBasisState(b.distinguished, b.ensemble.shifted(lvl, -1))
            d = parts.setdefault(lvl, {})
            d[nb] = d.get(nb, 0j) + a * math.sqrt(n / k)
    out = []
    for lvl, amps in sorted(parts.items()):
        part = PureState(amps, normalize=False)
        p = part.norm2() / state.norm2()
        if p > BRANCH_FLOOR:
            out.append((p, lvl, PureState(amps)))
    return out


def apply_atom_loss(state: PureState, mode: str = "coherent", rng: Optional[np.random.Generator] = None) -> PureState:
    """Remove one atom from the symmetric ensemble.

    ``coherent`` adds the lost-level branches as amplitudes, which for
    ``|0>_K`` gives ``|S>_{K-1}/sqrt(K) + sqrt((K-1)/K)|0>_{K-1}``.  When two
    branches land on the same ensemble state (superpositions within one qubit
    manifold) they interfere; the physical answer is then the mixture returned
    by :func:`loss_branches`.  ``mixture`` samples one branch with ``rng``.
    """
    if any(b.ensemble.total < 2 for b in state):
        raise ValueError("atom loss needs at least two ensemble atoms")
    branches = loss_branches(state)
    if mode == "coherent":
        acc = PureState({}, normalize=False)
        for p, _, part in branches:
            acc = acc + part.scaled(math.sqrt(p))
        return PureState(acc.amplitudes)
    if mode == "mixture":
        if rng is None:
            raise ValueError("mixture mode needs an rng")
        k = _choose([p for p, _, _ in branches], rng)
        return branches[k][2]
    raise ValueError(f"unknown loss mode {mode!r}")


def apply_disturbance(state: PureState, coeffs: DisturbanceCoeffs, qubit: int = 1) -> PureState:
    """Take one reservoir atom out of the symmetric ensemble and put it in the disturbed state.

    The register levels of the disturbed atom are those of ``qubit``.  The
    amplitude for hitting a register atom itself (order ``1/sqrt(K)``) is
    dropped; the result is renormalized.
    """
    targets = [(qubit_level(qubit, 0), coeffs.c0), (qubit_level(qubit, 1), coeffs.c1), (S, coeffs.cs), (LEAK, coeffs.c_perp)]
    amps: Dict[HybridBasisState, complex] = {}
    for b, a in state.items():
        if b.distinguished is not None:
            raise ValueError("state already carries a disturbed atom")
        n_s = b.ensemble.count(S)
        if n_s == 0:
            raise ValueError("cannot disturb a reservoir atom: reservoir is empty")
        ens = b.ensemble.shifted(S, -1)
        w = a * math.sqrt(n_s / b.ensemble.total)
        for lvl, c in targets:
            if c:
                nb = HybridBasisState(lvl, ens)
                amps[nb] = amps.get(nb, 0j) + w * c
    return PureState(amps)


# --- measurements ----------------------------------------------------------

def _split(state: PureState, predicate) -> Tuple[float, Optional[PureState], Optional[PureState]]:
    total = state.norm2()
    yes = {b: a for b, a in state.items() if predicate(b)}
    no = {b: a for b, a in state.items() if not predicate(b)}
    p_yes = sum(abs(a) ** 2 for a in yes.values()) / total
    return (p_yes,
            PureState(yes) if p_yes > BRANCH_FLOOR else None,
            PureState(no) if 1 - p_yes > BRANCH_FLOOR else None)


def rydberg_branches(state: PureState, level: Level, efficiency: float = 1.0) -> List[Branch]:
    """Projective test for an atom in ``level``; misses happen only on true positives."""
    p, yes, no = _split(state, lambda b: b.count(level) > 0)
    out = []
    if yes is not None and efficiency > 0:
        out.append(Branch(True, p * efficiency, yes))
    if no is not None:
        out.append(Branch(False, 1 - p, no))
    if yes is not None and efficiency < 1:
        out.append(Branch(False, p * (1 - efficiency), yes))
    return [br for br in out if br.probability > BRANCH_FLOOR]


def _remove_all(b: HybridBasisState, level: Level) -> HybridBasisState:
    d = None if b.distinguished == level else b.distinguished
    return HybridBasisState(d, b.ensemble.shifted(level, -b.ensemble.count(level)))


def ionization_branches(state: PureState, level: Level) -> List[Branch]:
    """Ionizing pulse on ``level``: an ion removes every atom in it, no ion projects it empty."""
    p, yes, no = _split(state, lambda b: b.count(level) > 0)
    out = []
    if yes is not None:
        amps: Dict[HybridBasisState, complex] = {}
        for b, a in yes.items():
            nb = _remove_all(b, level)
            amps[nb] = amps.get(nb, 0j) + a
        out.append(Branch(True, p, PureState(amps)))
    if no is not None:
        out.append(Branch(False, 1 - p, no))
    return out


def occupation_branches(state: PureState, qubit: int) -> List[Branch]:
    """Test whether the manifold ``{0_i, 1_i}`` holds any atom."""
    l0, l1 = qubit_level(qubit, 0), qubit_level(qubit, 1)
    p, yes, no = _split(state, lambda b: b.count(l0) + b.count(l1) > 0)
    return [br for br in (Branch(True, p, yes), Branch(False, 1 - p, no)) if br.state is not None]


def _choose(probs: Sequence[float], rng: np.random.Generator) -> int:
    c = np.cumsum(probs)
    return int(min(np.searchsorted(c, rng.random() * c[-1], side="right"), len(probs) - 1))


def measure_rydberg_content(state: PureState, level: Level, rng: np.random.Generator,
                            efficiency: float = 1.0) -> Tuple[bool, PureState]:
    brs = rydberg_branches(state, level, efficiency)
    br = brs[_choose([b.probability for b in brs], rng)]
    return br.outcome, br.state


def ionize_level(state: PureState, level: Level, rng: np.random.Generator) -> Tuple[bool, PureState]:
    brs = ionization_branches(state, level)
    br = brs[_choose([b.probability for b in brs], rng)]
    return br.outcome, br.state


# --- protocol generators ---------------------------------------------------

ProtocolGen = Generator[Fork, Branch, "CycleResult"]


@dataclass
class CycleResult:
    branch: str
    state: PureState
    ions: int = 0
    repaired: Optional[int] = None
    detected_bit: Optional[int] = None
    refilled: Tuple[int, ...] = ()
    cycle_branches: Tuple[str, ...] = ()


def collective_pi(state: PureState, level: Level) -> PureState:
    """pi pulse ``s <-> level`` calibrated to the collective element ``sqrt(n_s + 1)``.

    The calibration uses the heaviest component with the excitation held by the
    ensemble; a single atom in ``level`` then transfers only partially.
    """
    ens = [(abs(a), b) for b, a in state.items() if b.ensemble.count(level)]
    b = max(ens)[1] if ens else max((abs(a), b) for b, a in state.items())[1]
    n = b.ensemble.count(S) + 1
    return apply_drive(state, Drive.single(S, level, math.pi / math.sqrt(n)))


def detection_cycle(state: PureState, qubit: int, params: PulseParams, efficiency: float = 1.0) -> ProtocolGen:
    q0, q1 = qubit_level(qubit, 0), qubit_level(qubit, 1)
    state = apply_sequence(state, rydberg_discriminator(params, qubit))
    for bit, level in ((0, R0), (1, R1)):
        br = yield Fork(f"rydberg:{level}@q{qubit}", rydberg_branches(state, level, efficiency))
        state = br.state
        if br.outcome:
            break
    else:
        return CycleResult("no-error-detected", state)
    state = collective_pi(state, level)
    br = yield Fork(f"ion:{level}@q{qubit}", ionization_branches(state, level))
    state = br.state
    if br.outcome:
        return CycleResult(f"r{bit}-detected-ion", state, ions=1, repaired=qubit, detected_bit=bit)
    ions = 0
    for lvl in (q0, q1):
        br = yield Fork(f"ion:{lvl}", ionization_branches(state, lvl))
        state = br.state
        ions += br.outcome
    state = encode_one_atom(state, q0)
    return CycleResult(f"r{bit}-detected-no-ion", state, ions=ions, repaired=qubit, detected_bit=bit)


def full_correction(state: PureState, params: PulseParams, n_qubits: int, efficiency: float = 1.0,
                    order: Optional[Sequence[int]] = None) -> ProtocolGen:
    """Refill empty manifolds, then run a detection cycle on every qubit in ``order``."""
    order = list(order) if order is not None else list(range(1, n_qubits + 1))
    refilled = []
    for i in order:
        br = yield Fork(f"occupied:q{i}", occupation_branches(state, i))
        state = br.state
        if not br.outcome:
            state = encode_one_atom(state, qubit_level(i, 0))
            refilled.append(i)
    ions, labels, result = 0, [], None
    for i in order:
        res = yield from detection_cycle(state, i, params, efficiency)
        state = res.state
        ions += res.ions
        labels.append(res.branch)
        if result is None and res.repaired is not None:
            result = res
    branch = result.branch if result else "no-error-detected"
    repaired = result.repaired if result else (refilled[0] if refilled else None)
    return CycleResult(branch, state, ions=ions, repaired=repaired,
                       detected_bit=result.detected_bit if result else None,
                       refilled=tuple(refilled), cycle_branches=tuple(labels))


def _outcome(res: CycleResult, record: List[Tuple[str, bool, float]], prob: float) -> TrajectoryOutcome:
    return TrajectoryOutcome(branch=res.branch, measurements=record, final_state=res.state,
                             atoms_consumed=res.ions, repaired_qubit=res.repaired, detected_bit=res.detected_bit,
                             probability=prob, refilled=res.refilled, cycle_branches=res.cycle_branches)


def sample(factory: Callable[[], ProtocolGen], rng: np.random.Generator) -> TrajectoryOutcome:
    """Run one trajectory, sampling every measurement with ``rng``."""
    gen = factory()
    record: List[Tuple[str, bool, float]] = []
    prob = 1.0
    try:
        fork = next(gen)
        while True:
            br = fork.branches[_choose([b.probability for b in fork.branches], rng)]
            record.append((fork.observable, br.outcome, br.probability))
            prob *= br.probability
            fork = gen.send(br)
    except StopIteration as stop:
        return _outcome(stop.value, record, prob)


def enumerate_branches(factory: Callable[[], ProtocolGen]) -> List[TrajectoryOutcome]:
    """Every terminal branch with its exact probability (depth-first, replaying prefixes)."""
    leaves: List[TrajectoryOutcome] = []

    def walk(prefix: List[int]):
        gen = factory()
        record: List[Tuple[str, bool, float]] = []
        prob = 1.0
        try:
            fork = next(gen)
            for k in prefix:
                br = fork.branches[k]
                record.append((fork.observable, br.outcome, br.probability))
                prob *= br.probability
                fork = gen.send(br)
        except StopIteration as stop:
            leaves.append(_outcome(stop.value, record, prob))
            return
        for k, br in enumerate(fork.branches):
            if prob * br.probability > BRANCH_FLOOR:
                walk(prefix + [k])

    walk([])
    return leaves


def run_detection_cycle(state: PureState, qubit: int, params: PulseParams, rng: np.random.Generator,
                        efficiency: float = 1.0) -> TrajectoryOutcome:
    return sample(lambda: detection_cycle(state, qubit, params, efficiency), rng)


def detection_cycle_tree(state: PureState, qubit: int, params: PulseParams, efficiency: float = 1.0) -> List[TrajectoryOutcome]:
    return enumerate_branches(lambda: detection_cycle(state, qubit, params, efficiency))


def run_full_correction(state: PureState, params: PulseParams, rng: np.random.Generator, config: RegisterConfig,
                        order: Optional[Sequence[int]] = None) -> TrajectoryOutcome:
    return sample(lambda: full_correction(state, params, config.n_qubits, config.detector_efficiency, order), rng)


def full_correction_tree(state: PureState, params: PulseParams, config: RegisterConfig,
                         order: Optional[Sequence[int]] = None) -> List[TrajectoryOutcome]:
    return enumerate_branches(lambda: full_correction(state, params, config.n_qubits, config.detector_efficiency, order))


# --- two-ensemble-qubit code -----------------------------------------------

def codeword_amplitudes(alpha: complex, beta: complex) -> Dict[Tuple[int, int], complex]:
    if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1.0) > 1e-12:
        raise ValueError("alpha, beta are not normalized")
    r = 1 / math.sqrt(2)
    return {(0, 0): alpha * r, (1, 1): alpha * r, (0, 1): beta * r, (1, 0): beta * r}


def encode_logical_pair(alpha: complex, beta: complex, config: RegisterConfig) -> PureState:
    """``alpha(|00> + |11>)/sqrt2 + beta(|01> + |10>)/sqrt2`` on qubits 1 and 2."""
    if config.n_qubits != 2:
        raise ValueError("the logical pair code uses exactly two ensemble qubits")
    amps = codeword_amplitudes(alpha, beta)
    return PureState({HybridBasisState(None, register_occupation(bits, config.n_atoms)): a
                      for bits, a in amps.items() if a != 0})


def reconstruct_codeword(state: PureState, repaired: int, detected_bit: int = 0) -> PureState:
    """Rebuild the code word from ``|0>_repaired (x) (alpha|0> + beta|1>)_other``.

    After a refill triggered by an ``r1`` detection the other qubit holds
    ``beta|0> + alpha|1>``; pass ``detected_bit=1`` to flip it back first.
    Raises ``ValueError`` unless more than half of the weight has the repaired
    qubit in ``0`` (an intact code word sits exactly at one half).
    """
    if repaired not in (1, 2):
        raise ValueError("repaired qubit must be 1 or 2")
    other = 3 - repaired
    zero = qubit_level(repaired, 0)
    form = state.population(lambda b: b.count(zero) > 0) / state.norm2()
    if form <= 0.5 + 1e-9:
        raise ValueError(f"state is not of the repaired form (weight {form:.6f} with qubit {repaired} in 0)")
    if detected_bit:
        state = single_qubit_gate(state, other, math.pi, 0.0)
    state = hadamard_like(state, repaired)
    return cnot_gate(state, repaired, other)


def recover_codeword(outcome: TrajectoryOutcome) -> PureState:
    """Final logical-code state of a correction trajectory."""
    if outcome.branch.endswith("no-ion"):
        return reconstruct_codeword(outcome.final_state, outcome.repaired_qubit, outcome.detected_bit or 0)
    return outcome.final_state
