"""Run configurations, error cases and K sweeps behind the command line."""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import yaml
from scipy import stats

from .core import RegisterConfig, fidelity_to_logical, register_state
from .protocol import (
    DisturbanceCoeffs,
    apply_disturbance,
    enumerate_branches,
    full_correction,
    loss_branches,
    sample,
)
from .pulses import DesignObjective, PulseParams, design_discriminator

THREADS_ENV = "ENSEMBLE_QEC_THREADS"


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class RunConfig:
    n_atoms: int = 32
    n_qubits: int = 1
    detector_efficiency: float = 1.0
    error: str = "disturbance"
    coeffs: Union[str, List[List[float]]] = "random"
    qubit: Union[str, int] = "random"
    amplitudes: Union[str, List[List[float]]] = "random"
    trajectories: int = 10
    seed: int = 0
    mode: str = "tree"
    k_values: List[int] = field(default_factory=list)
    max_pulses: int = 7
    pulse_seed: int = 0

    def register(self, n_atoms: Optional[int] = None) -> RegisterConfig:
        return RegisterConfig(n_qubits=self.n_qubits, n_atoms=n_atoms or self.n_atoms,
                              detector_efficiency=self.detector_efficiency)

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


_SCHEMA = {
    "register": {"n_atoms": "n_atoms", "n_qubits": "n_qubits", "detector_efficiency": "detector_efficiency"},
    "error": {"kind": "error", "coeffs": "coeffs", "qubit": "qubit"},
    "state": {"amplitudes": "amplitudes"},
    "run": {"trajectories": "trajectories", "seed": "seed", "mode": "mode"},
    "sweep": {"k_values": "k_values"},
    "pulse": {"max_pulses": "max_pulses", "seed": "pulse_seed"},
}


def _int(name: str, v, lo: int = None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(name, f"expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(name, f"must be >= {lo}, got {v}")
    return v


def _complex_list(name: str, v, length: int) -> List[List[float]]:
    if not isinstance(v, list) or len(v) != length:
        raise ConfigError(name, f"expected 'random' or a list of {length} entries")
    for item in v:
        if not isinstance(item, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in item):
            raise ConfigError(name, f"entries must be lists of numbers, got {item!r}")
    return v


def parse_config(data: Dict[str, Any]) -> RunConfig:
    """Build and validate a :class:`RunConfig` from the nested mapping of a config file."""
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a mapping of sections")
    kwargs: Dict[str, Any] = {}
    for section, body in data.items():
        if section not in _SCHEMA:
            raise ConfigError(section, "unknown section")
        if not isinstance(body, dict):
            raise ConfigError(section, "section must be a mapping")
        for key, value in body.items():
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{section}.{key}", "unknown field")
            kwargs[_SCHEMA[section][key]] = (f"{section}.{key}", value)
    cfg = RunConfig()
    for attr, (name, value) in kwargs.items():
        setattr(cfg, attr, value)
        if attr in ("n_atoms", "n_qubits", "trajectories", "max_pulses"):
            _int(name, value, lo=2 if attr == "max_pulses" else 1)
        elif attr in ("seed", "pulse_seed"):
            _int(name, value, lo=0)
        elif attr == "detector_efficiency":
            if not isinstance(value, (int, float)) or not 0 <= value <= 1:
                raise ConfigError(name, f"must be a number in [0, 1], got {value!r}")
            cfg.detector_efficiency = float(value)
        elif attr == "error" and value not in ("loss", "disturbance"):
            raise ConfigError(name, f"must be 'loss' or 'disturbance', got {value!r}")
        elif attr == "mode" and value not in ("sampled", "tree"):
            raise ConfigError(name, f"must be 'sampled' or 'tree', got {value!r}")
        elif attr == "k_values":
            if not isinstance(value, list):
                raise ConfigError(name, "expected a list of integers")
            for k in value:
                _int(name, k, lo=1)
    for name, attr, length in (("error.coeffs", "coeffs", 4), ("state.amplitudes", "amplitudes", None)):
        v = getattr(cfg, attr)
        if v != "random":
            _complex_list(name, v, length if length else cfg.n_qubits)
    if cfg.qubit != "random":
        _int("error.qubit", cfg.qubit, lo=1)
        if cfg.qubit > cfg.n_qubits:
            raise ConfigError("error.qubit", f"exceeds n_qubits={cfg.n_qubits}")
    try:
        cfg.register()
        for k in cfg.k_values:
            cfg.register(k)
    except ValueError as exc:
        raise ConfigError("register", str(exc)) from None
    if cfg.error == "disturbance" and cfg.n_atoms < cfg.n_qubits + 2:
        raise ConfigError("register.n_atoms", "disturbance runs need n_atoms >= n_qubits + 2")
    return cfg


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError("--config", str(exc)) from None
    except yaml.YAMLError as exc:
        raise ConfigError("--config", f"not valid YAML: {exc}") from None
    return parse_config(data or {})


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ConfigError(THREADS_ENV, f"expected an integer, got {raw!r}") from None
    return min(8, os.cpu_count() or 1)


# --- cases -----------------------------------------------------------------

@dataclass
class Case:
    amplitudes: List[Tuple[complex, complex]]
    coeffs: Optional[DisturbanceCoeffs]
    qubit: int


@dataclass
class BranchRow:
    case: int
    n_atoms: int
    branch: str
    probability: float
    infidelity: float
    atoms_consumed: int
    repaired_qubit: Optional[int]
    final_atoms: float
    log: List[str]


def _unit(rng: np.random.Generator, n: int) -> np.ndarray:
    z = rng.normal(size=n) + 1j * rng.normal(size=n)
    return z / np.linalg.norm(z)


def _normalized_pairs(raw, name: str) -> List[Tuple[complex, complex]]:
    out = []
    for item in raw:
        if len(item) != 4:
            raise ConfigError(name, "each qubit needs [a_re, a_im, b_re, b_im]")
        a, b = complex(item[0], item[1]), complex(item[2], item[3])
        nrm = math.sqrt(abs(a) ** 2 + abs(b) ** 2)
        if nrm == 0:
            raise ConfigError(name, "zero amplitude pair")
        out.append((a / nrm, b / nrm))
    return out


def draw_case(cfg: RunConfig, rng: np.random.Generator) -> Case:
    if cfg.amplitudes == "random":
        amps = [tuple(_unit(rng, 2)) for _ in range(cfg.n_qubits)]
    else:
        amps = _normalized_pairs(cfg.amplitudes, "state.amplitudes")
    coeffs = None
    if cfg.error == "disturbance":
        if cfg.coeffs == "random":
            coeffs = DisturbanceCoeffs.random(rng)
        else:
            z = np.array([complex(*c) for c in cfg.coeffs])
            if np.linalg.norm(z) == 0:
                raise ConfigError("error.coeffs", "all coefficients vanish")
            coeffs = DisturbanceCoeffs(*(z / np.linalg.norm(z)))
    qubit = int(rng.integers(1, cfg.n_qubits + 1)) if cfg.qubit == "random" else int(cfg.qubit)
    return Case(amps, coeffs, qubit)


def designated_target(case: Case, branch: str, repaired: Optional[int]) -> List[Tuple[complex, complex]]:
    """Register the protocol promises: the input, or ``|0>`` on a refilled qubit."""
    target = list(case.amplitudes)
    if branch.endswith("no-ion") and repaired is not None:
        target[repaired - 1] = (1.0, 0.0)
    return target


def evaluate_case(cfg: RunConfig, n_atoms: int, case: Case, params: Optional[PulseParams], index: int,
                  rng: Optional[np.random.Generator]) -> List[BranchRow]:
    """Branch rows for one case: all branches in tree mode, one sampled trajectory otherwise.

    Loss runs report the erroneous population left by the loss itself; the
    refill cannot restore the lost information.
    """
    state = register_state(case.amplitudes, n_atoms)
    rows: List[BranchRow] = []
    if cfg.error == "loss":
        branches = loss_branches(state)
        if cfg.mode == "sampled":
            probs = np.array([p for p, _, _ in branches])
            k = int(rng.choice(len(branches), p=probs / probs.sum()))
            branches = [(1.0,) + branches[k][1:]]
        for p, lvl, st in branches:
            inf = 1.0 - fidelity_to_logical(st, case.amplitudes, "sum")
            rows.append(BranchRow(index, n_atoms, f"lost:{lvl}", p, inf, 0, None, st.mean_atoms(), []))
        return rows
    state = apply_disturbance(state, case.coeffs, case.qubit)
    reg = cfg.register(n_atoms)

    def factory():
        return full_correction(state, params, reg.n_qubits, reg.detector_efficiency)

    leaves = enumerate_branches(factory) if cfg.mode == "tree" else [sample(factory, rng)]
    for leaf in leaves:
        target = designated_target(case, leaf.branch, leaf.repaired_qubit)
        inf = 1.0 - fidelity_to_logical(leaf.final_state, target, "sum")
        p = leaf.probability if cfg.mode == "tree" else 1.0
        rows.append(BranchRow(index, n_atoms, leaf.branch, p, inf, leaf.atoms_consumed, leaf.repaired_qubit,
                              leaf.final_state.mean_atoms(), leaf.log_lines()))
    return rows


def pulse_params(cfg: RunConfig) -> PulseParams:
    return design_discriminator(DesignObjective(), max_pulses=cfg.max_pulses, seed=cfg.pulse_seed)


def run_cases(cfg: RunConfig, n_atoms: int, params: Optional[PulseParams]) -> List[BranchRow]:
    """Evaluate ``cfg.trajectories`` cases; each case owns a spawned seed, so worker count does not matter."""
    seqs = np.random.SeedSequence(cfg.seed).spawn(cfg.trajectories)

    def job(k):
        rng = np.random.default_rng(seqs[k])
        return evaluate_case(cfg, n_atoms, draw_case(cfg, rng), params, k, rng)

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        results = list(pool.map(job, range(cfg.trajectories)))
    return [row for rows in results for row in rows]


def mean_infidelity(rows: Sequence[BranchRow]) -> float:
    """Per-case expected infidelity, averaged over cases."""
    per_case: Dict[int, float] = {}
    weight: Dict[int, float] = {}
    for r in rows:
        per_case[r.case] = per_case.get(r.case, 0.0) + r.probability * r.infidelity
        weight[r.case] = weight.get(r.case, 0.0) + r.probability
    return float(np.mean([per_case[c] / weight[c] for c in sorted(per_case)]))


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    stderr: float
    ci_low: float
    ci_high: float


def fit_loglog(k_values: Sequence[int], values: Sequence[float]) -> SlopeFit:
    if len(k_values) < 3:
        raise ValueError("a slope fit needs at least three K values")
    x, y = np.log(np.asarray(k_values, float)), np.log(np.asarray(values, float))
    res = stats.linregress(x, y)
    t = stats.t.ppf(0.975, len(x) - 2)
    return SlopeFit(float(res.slope), float(res.intercept), float(res.stderr),
                   float(res.slope - t * res.stderr), float(res.slope + t * res.stderr))


def sweep_k(cfg: RunConfig, params: Optional[PulseParams] = None) -> Tuple[List[Tuple[int, float]], SlopeFit]:
    ks = list(cfg.k_values)
    if len(ks) < 3:
        raise ConfigError("sweep.k_values", "need at least three K values")
    if cfg.error == "disturbance" and params is None:
        params = pulse_params(cfg)
    points = [(k, mean_infidelity(run_cases(cfg, k, params))) for k in ks]
    if all(v > 0 for _, v in points):
        fit = fit_loglog([k for k, _ in points], [v for _, v in points])
    else:
        fit = SlopeFit(*(float("nan"),) * 5)
    return points, fit
