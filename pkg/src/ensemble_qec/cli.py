"""Command-line front end.

Every CSV starts with a ``# config_sha256=<hex> seed=<int>`` comment line and
writes floats with 17 significant digits.  Exit codes: 0 success, 1 runtime
failure, 2 config or usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import math
import os
import sys
from typing import Iterable, List, Optional, Sequence

import numpy as np

from . import __version__
from .experiments import ConfigError, RunConfig, load_config, mean_infidelity, pulse_params, run_cases, sweep_k
from .oracle import engine_oracle_overlap, random_case
from .pulses import DesignError, DesignObjective, design_discriminator, identity_phase, verify_discriminator
from .zeeman import SPECIES, pair_shift_analysis

OUTCOME_FIELDS = ["case", "K", "branch", "probability", "infidelity", "atoms_consumed", "repaired_qubit", "mean_atoms"]
ORACLE_TOL = 1e-10


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(path: Optional[str], header: str, fields: Sequence[str], rows: Iterable[Sequence]) -> str:
    """Write a commented CSV to ``path`` (or return the text when ``path`` is None)."""
    buf = io.StringIO()
    buf.write(f"# {header}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def read_csv(path: str) -> List[dict]:
    """Rows of a CSV written by :func:`write_csv`, comment lines skipped."""
    with open(path, newline="") as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def _provenance(digest: str, seed: int) -> str:
    return f"config_sha256={digest} seed={seed}"


def _args_digest(args: argparse.Namespace) -> str:
    items = sorted((k, repr(v)) for k, v in vars(args).items() if k not in ("func", "out"))
    return hashlib.sha256(repr(items).encode()).hexdigest()


def _out_dir(args) -> str:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.mode is not None:
        cfg.mode = args.mode
    if args.trajectories is not None:
        if args.trajectories < 1:
            raise ConfigError("--trajectories", "must be >= 1")
        cfg.trajectories = args.trajectories
    return cfg


def cmd_simulate(args) -> int:
    cfg = _run_config(args)
    out = _out_dir(args)
    params = pulse_params(cfg) if cfg.error == "disturbance" else None
    rows = run_cases(cfg, cfg.n_atoms, params)
    head = _provenance(cfg.digest(), cfg.seed)
    write_csv(os.path.join(out, "outcomes.csv"), head, OUTCOME_FIELDS,
              ([r.case, r.n_atoms, r.branch, r.probability, r.infidelity, r.atoms_consumed, r.repaired_qubit,
                r.final_atoms] for r in rows))
    branches = {}
    for r in rows:
        p, w = branches.get(r.branch, (0.0, 0.0))
        branches[r.branch] = (p + r.probability / cfg.trajectories, w + r.probability * r.infidelity / cfg.trajectories)
    write_csv(os.path.join(out, "branches.csv"), head, ["branch", "probability", "mean_infidelity"],
              ([b, p, w / p if p else 0.0] for b, (p, w) in sorted(branches.items())))
    mean = mean_infidelity(rows)
    write_csv(os.path.join(out, "summary.csv"), head,
              ["K", "n_qubits", "error", "mode", "trajectories", "mean_infidelity", "mean_fidelity"],
              [[cfg.n_atoms, cfg.n_qubits, cfg.error, cfg.mode, cfg.trajectories, mean, 1.0 - mean]])
    with open(os.path.join(out, "trajectories.log"), "w") as fh:
        fh.write(f"# {head}\n")
        for r in rows:
            fh.write(f"## case={r.case} branch={r.branch} probability={fmt(r.probability)}\n")
            for line in r.log:
                fh.write(line + "\n")
    print(f"K={cfg.n_atoms} mode={cfg.mode} mean_infidelity={fmt(mean)}")
    return 0


def cmd_sweep_k(args) -> int:
    cfg = _run_config(args)
    out = _out_dir(args)
    points, fit = sweep_k(cfg)
    write_csv(os.path.join(out, "sweep.csv"), _provenance(cfg.digest(), cfg.seed),
              ["K", "mean_infidelity", "slope", "slope_ci_low", "slope_ci_high"],
              ([k, v, fit.slope, fit.ci_low, fit.ci_high] for k, v in points))
    print(f"slope={fmt(fit.slope)} ci=[{fmt(fit.ci_low)}, {fmt(fit.ci_high)}]")
    return 0


def cmd_design_pulse(args) -> int:
    try:
        objective = DesignObjective(ratio=args.ratio, tolerance=args.tolerance, fix_phase=args.fix_phase)
    except ValueError as exc:
        raise ConfigError("--ratio/--tolerance", str(exc)) from None
    if args.max_pulses < 2:
        raise ConfigError("--max-pulses", "must be >= 2")
    seed = args.seed if args.seed is not None else 0
    try:
        params = design_discriminator(objective, max_pulses=args.max_pulses, seed=seed)
    except DesignError as exc:
        print(f"design failed: {exc} (best infidelities {exc.infidelity_identity:.3g}, "
              f"{exc.infidelity_transfer:.3g})", file=sys.stderr)
        return 1
    inf_id, inf_tr = verify_discriminator(params, objective)
    u00 = identity_phase(params)
    out = _out_dir(args)
    write_csv(os.path.join(out, "pulse.csv"), _provenance(_args_digest(args), seed), ["k", "theta", "phi"],
              ([k, t, p] for k, (t, p) in enumerate(params.pulses, start=1)))
    report = (f"pulses={len(params)} total_area={fmt(params.total_area)}\n"
              f"infidelity_identity={fmt(inf_id)}\ninfidelity_transfer={fmt(inf_tr)}\n"
              f"identity_phase_re={fmt(u00.real)} identity_phase_im={fmt(u00.imag)}\n")
    with open(os.path.join(out, "pulse_report.txt"), "w") as fh:
        fh.write(report)
    sys.stdout.write(report)
    return 0


def cmd_oracle_check(args) -> int:
    if args.cases < 1:
        raise ConfigError("--cases", "must be >= 1")
    seed = args.seed if args.seed is not None else 0
    rng = np.random.default_rng(seed)
    rows = []
    for k in range(args.cases):
        config, state, drives = random_case(rng, max_atoms=args.max_atoms)
        ov = engine_oracle_overlap(config, state, drives)
        rows.append([k, config.n_atoms, config.n_qubits, len(drives), ov])
    if args.out:
        write_csv(os.path.join(_out_dir(args), "oracle.csv"), _provenance(_args_digest(args), seed),
                  ["case", "K", "n_qubits", "pulses", "overlap"], rows)
    worst = min(r[-1] for r in rows)
    ok = worst >= 1 - ORACLE_TOL
    print(f"cases={args.cases} min_overlap={fmt(worst)} {'ok' if ok else 'MISMATCH'}")
    return 0 if ok else 1


def cmd_dfs_shift(args) -> int:
    if args.species not in SPECIES:
        raise ConfigError("--species", f"unknown species {args.species!r}; choose from {sorted(SPECIES)}")
    if not args.bmax_gauss > 0:
        raise ConfigError("--bmax-gauss", "must be positive")
    try:
        res = pair_shift_analysis(SPECIES[args.species], args.m, (0.0, args.bmax_gauss), args.points)
    except ValueError as exc:
        raise ConfigError("--m", str(exc)) from None
    head = _provenance(_args_digest(args), 0)
    rows = zip(res.b_gauss, res.e_low, res.e_high, res.differential)
    path = os.path.join(_out_dir(args), "dfs_shift.csv") if args.out else None
    text = write_csv(path, head, ["B", "E_low", "E_high", "diff"], rows)
    summary = (f"# linear_low={fmt(res.linear_low)} linear_high={fmt(res.linear_high)} "
               f"relative_mismatch={fmt(res.relative_mismatch)} bound={fmt(res.nuclear_bound)} "
               f"quadratic={fmt(res.quadratic_coefficient)} magic_field={fmt(res.magic_field)}\n")
    sys.stdout.write(summary if path else text + summary)
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(2)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ensemble-qec", description="Ensemble-register error correction simulator.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def run_flags(sp):
        sp.add_argument("--config", metavar="PATH", help="YAML run configuration")
        sp.add_argument("--seed", type=int, metavar="U64")
        sp.add_argument("--out", metavar="DIR")
        sp.add_argument("--mode", choices=("sampled", "tree"))
        sp.add_argument("--trajectories", type=int, metavar="N")

    sp = sub.add_parser("simulate", help="run the correction protocol on random or configured cases")
    run_flags(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep-k", help="mean infidelity against K with a log-log slope fit")
    run_flags(sp)
    sp.set_defaults(func=cmd_sweep_k)

    sp = sub.add_parser("design-pulse", help="synthesize the composite discriminator pulse")
    sp.add_argument("--ratio", type=float, default=math.sqrt(2))
    sp.add_argument("--tolerance", type=float, default=1e-8)
    sp.add_argument("--max-pulses", type=int, default=7)
    sp.add_argument("--fix-phase", action="store_true")
    sp.add_argument("--seed", type=int, metavar="U64")
    sp.add_argument("--out", metavar="DIR")
    sp.set_defaults(func=cmd_design_pulse)

    sp = sub.add_parser("oracle-check", help="compare the symmetric engine with the brute-force simulator")
    sp.add_argument("--cases", type=int, default=20)
    sp.add_argument("--max-atoms", type=int, default=5)
    sp.add_argument("--seed", type=int, metavar="U64")
    sp.add_argument("--out", metavar="DIR")
    sp.set_defaults(func=cmd_oracle_check)

    sp = sub.add_parser("dfs-shift", help="Zeeman shifts of a clock pair")
    sp.add_argument("--species", default="rb87")
    sp.add_argument("--m", type=float, default=-1.0)
    sp.add_argument("--bmax-gauss", type=float, default=10.0)
    sp.add_argument("--points", type=int, default=201)
    sp.add_argument("--out", metavar="DIR")
    sp.set_defaults(func=cmd_dfs_shift)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
