"""Composite pulses that tell Rabi scale 1 apart from Rabi scale rho.

The sequence must return a two-level system driven at scale 1 to its initial
state (up to a phase) while fully inverting a two-level system driven at
scale ``rho``.  It is found by multi-start least squares over pulse areas and
phases; every pulse is an SU(2) rotation ``R(theta, phi)``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.optimize import least_squares

from .core import R0, R1, Level, qubit_level
from .dynamics import CompositeSequence, Drive, Transition

TWO_PI = 2 * math.pi


class DesignError(RuntimeError):
    def __init__(self, message: str, infidelity_identity: float, infidelity_transfer: float):
        super().__init__(message)
        self.infidelity_identity = infidelity_identity
        self.infidelity_transfer = infidelity_transfer


@dataclass(frozen=True)
class PulseParams:
    pulses: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        ps = tuple((float(t), float(p) % TWO_PI) for t, p in self.pulses)
        if not ps:
            raise ValueError("need at least one pulse")
        for t, _ in ps:
            if not (t > 0 and math.isfinite(t)):
                raise ValueError(f"pulse areas must be positive and finite, got {t}")
        object.__setattr__(self, "pulses", ps)

    @classmethod
    def from_vector(cls, x: Sequence[float]) -> "PulseParams":
        # R(-theta, phi) == R(theta, phi + pi), so negative areas fold into the phase.
        pairs = []
        for t, p in np.reshape(np.asarray(x, dtype=float), (-1, 2)):
            if t < 0:
                t, p = -t, p + math.pi
            pairs.append((t, p))
        return cls(tuple(pairs))

    @property
    def total_area(self) -> float:
        return sum(t for t, _ in self.pulses)

    def __len__(self) -> int:
        return len(self.pulses)

    def to_csv(self) -> str:
        rows = ["k,theta,phi"] + [f"{k},{t:.17g},{p:.17g}" for k, (t, p) in enumerate(self.pulses, start=1)]
        return "\n".join(rows) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "PulseParams":
        rows = [r for r in text.strip().splitlines() if r and not r.startswith("#")]
        if rows and rows[0].replace(" ", "") == "k,theta,phi":
            rows = rows[1:]
        return cls(tuple((float(t), float(p)) for _, t, p in (r.split(",") for r in rows)))


@dataclass(frozen=True)
class DesignObjective:
    """Identity at scale 1, complete transfer at scale ``ratio``.

    With ``fix_phase`` the scale-1 response must be the identity itself, not
    only the identity up to a phase on the initial state.
    """

    ratio: float = math.sqrt(2)
    tolerance: float = 1e-8
    fix_phase: bool = False

    def __post_init__(self):
        if not self.ratio > 1:
            raise ValueError(f"ratio must exceed 1, got {self.ratio}: both scales would see the same unitary")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")


def rotation(theta: float, phi: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    e = complex(math.cos(phi), math.sin(phi))
    return np.array([[c, -1j * s * e.conjugate()], [-1j * s * e, c]])


def _response_vec(x: np.ndarray, scale: float) -> np.ndarray:
    u = np.eye(2, dtype=complex)
    for t, p in np.reshape(x, (-1, 2)):
        u = rotation(scale * t, p) @ u
    return u


def su2_response(params: PulseParams, scale: float) -> np.ndarray:
    """Product of ``R(scale * theta_k, phi_k)``, first pulse applied first."""
    return _response_vec(np.asarray(params.pulses, dtype=float).ravel(), scale)


def verify_discriminator(params: PulseParams, objective: DesignObjective = DesignObjective()) -> Tuple[float, float]:
    """``(infidelity_identity, infidelity_transfer)`` of ``params``.

    ``infidelity_identity = 1 - |u00|^2`` at scale 1 (with ``fix_phase`` the
    larger of that and ``|1 - u00|^2 / 4``); ``infidelity_transfer = 1 - |u10|^2``
    at scale ``ratio``.
    """
    slow = su2_response(params, 1.0)
    fast = su2_response(params, objective.ratio)
    inf_id = max(0.0, 1.0 - abs(slow[0, 0]) ** 2)
    if objective.fix_phase:
        inf_id = max(inf_id, abs(1.0 - slow[0, 0]) ** 2 / 4)
    inf_tr = max(0.0, 1.0 - abs(fast[1, 0]) ** 2)
    return inf_id, inf_tr


def identity_phase(params: PulseParams) -> complex:
    """``u00`` of the scale-1 response: the phase picked up by undisturbed states."""
    return complex(su2_response(params, 1.0)[0, 0])


def _residuals(x: np.ndarray, objective: DesignObjective) -> np.ndarray:
    slow = _response_vec(x, 1.0)
    fast = _response_vec(x, objective.ratio)
    first = slow[0, 0] - 1.0 if objective.fix_phase else slow[1, 0]
    return np.array([first.real, first.imag, fast[0, 0].real, fast[0, 0].imag])


def design_discriminator(objective: DesignObjective = DesignObjective(), max_pulses: int = 7, seed: int = 0,
                         restarts: int = 24) -> PulseParams:
    """Shortest sequence (2 to ``max_pulses`` pulses) meeting ``objective``.

    Deterministic for a given ``(objective, max_pulses, seed, restarts)``.
    Raises ``DesignError`` carrying the best infidelities if nothing converges.
    """
    if max_pulses < 2:
        raise ValueError("max_pulses must be at least 2")
    rng = np.random.default_rng(seed)
    best = None
    for n in range(2, max_pulses + 1):
        for _ in range(restarts):
            x0 = np.column_stack([rng.uniform(0.5, 3 * math.pi, n), rng.uniform(0, TWO_PI, n)]).ravel()
            fit = least_squares(_residuals, x0, args=(objective,), xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
            params = PulseParams.from_vector(fit.x)
            scores = verify_discriminator(params, objective)
            if best is None or max(scores) < max(best[1]):
                best = (params, scores)
            if max(scores) <= objective.tolerance:
                return params
    raise DesignError(f"no sequence with <= {max_pulses} pulses reached tolerance {objective.tolerance:g}",
                      *best[1])


@functools.lru_cache(maxsize=8)
def default_discriminator(ratio: float = math.sqrt(2), fix_phase: bool = False) -> PulseParams:
    return design_discriminator(DesignObjective(ratio=ratio, fix_phase=fix_phase), max_pulses=7, seed=0)


def composite_drives(params: PulseParams, pairs: Sequence[Tuple[Level, Level]]) -> CompositeSequence:
    """Drives applying every pulse of ``params`` simultaneously on all ``pairs``."""
    return CompositeSequence(tuple(Drive(tuple(Transition(a, b, phi) for a, b in pairs), theta)
                                   for theta, phi in params.pulses))


def rydberg_discriminator(params: PulseParams, qubit: int) -> CompositeSequence:
    """Composite on ``0_i <-> r0`` and ``1_i <-> r1`` for qubit ``i``."""
    return composite_drives(params, [(qubit_level(qubit, 0), R0), (qubit_level(qubit, 1), R1)])
