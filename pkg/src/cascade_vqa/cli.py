"""Command-line front end: solve, campaign, cascade, sample, metrics, slice.

One JSON config file drives everything; flags override individual fields.
Campaign output layout: <out>/config.json (resolved snapshot), runs/*.json,
summary.json, summary.txt, best_state.svec.  All outputs except the "timing"
block of run records are byte-reproducible from config + master seed.

Exit codes: 0 success, 2 config/validation error, 3 missing input,
4 numerical failure, 1 unexpected error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import fem_grid, imaging, qsim, sampling, vqa
from .ansatz import AnsatzSpec, default_spec
from .fem_grid import NotPositiveDefiniteError
from .optimizer import OptimizerConfig
from .vqa import CascadeSource, DegenerateEnergyError, RunRecord

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_MISSING_INPUT = 3
EXIT_NUMERICAL = 4


class ConfigError(ValueError):
    pass


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def _problem_section(cfg: dict) -> dict:
    if "problem" in cfg:
        return cfg["problem"]
    if "qubits" in cfg:
        return cfg
    raise ConfigError("config needs a 'problem' section with 'qubits'")


def _build_system(cfg: dict) -> fem_grid.GridSystem:
    try:
        return fem_grid.problem_from_config(_problem_section(cfg))
    except ValueError as exc:
        raise ConfigError(f"problem: {exc}") from exc


def _ansatz_spec(cfg: dict, qubits: int) -> AnsatzSpec:
    section = cfg.get("ansatz")
    if section is None:
        raise ConfigError("config needs an 'ansatz' section")
    try:
        family = section["family"]
        if "reps" in section:
            return AnsatzSpec(family=family, qubits=qubits, reps=section["reps"],
                              final_rotations=section.get("final_rotations", "double"))
        return default_spec(family, qubits)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"ansatz: {exc}") from exc


def _optimizer_config(cfg: dict) -> OptimizerConfig:
    section = dict(cfg.get("optimizer", {}))
    try:
        return OptimizerConfig(**section)
    except TypeError as exc:
        raise ConfigError(f"optimizer: {exc}") from exc


def _default_jobs() -> int:
    env = os.environ.get("CASCADE_VQA_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"CASCADE_VQA_JOBS must be an integer, got {env!r}")
    return 1


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _load_state(path: str) -> np.ndarray:
    if not Path(path).exists():
        raise FileNotFoundError(path)
    return qsim.load_statevector(path)


# ---------------------------------------------------------------------------
# subcommands

def cmd_solve(args) -> int:
    cfg = _load_config(args.config)
    system = _build_system(cfg)
    fem_grid.solve_classical(system)
    residual = float(np.linalg.norm(system.matrix @ system.u_ref - system.load)
                     / np.linalg.norm(system.load))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    qsim.save_statevector(out / "u_ref.svec", system.u_ref.astype(complex))
    _write_json(out / "solution.json", {
        "qubits": system.spec.qubits,
        "nodes_per_axis": system.spec.nodes_per_axis,
        "conductivity": system.conductivity,
        "e_ref": system.e_ref,
        "relative_residual": residual,
        "u_norm": float(np.linalg.norm(system.u_ref)),
        "load_norm": float(np.linalg.norm(system.load)),
    })
    if args.export_matrix:
        fem_grid.export_matrix_market(system, out / "stiffness.mtx", out / "load.mtx")
    print(f"solved {system.spec.qubits}-qubit problem: e_ref={system.e_ref:.12e}, "
          f"relative residual {residual:.3e} (<= 1e-10)")
    return EXIT_OK


def _load_cascade_source(source_dir: str, min_energy: float) -> CascadeSource:
    src = Path(source_dir)
    summary_path = src / "summary.json"
    if not summary_path.exists():
        raise FileNotFoundError(str(summary_path))
    summary = json.loads(summary_path.read_text())
    best_idx = summary.get("best_run_index")
    if best_idx is None:
        raise ConfigError(f"{source_dir}: source campaign has no successful run")
    record = RunRecord.from_dict(
        json.loads((src / "runs" / f"run_{best_idx:04d}.json").read_text()))
    acc = record.run_metrics.energy_accuracy
    if acc < min_energy:
        raise ConfigError(f"source best run reaches {acc:.2f}% energy accuracy, "
                          f"below the {min_energy:.2f}% gate")
    return CascadeSource(spec=record.ansatz, params=record.best_params,
                         energy_accuracy=acc)


def cmd_campaign(args, force_strategy: str | None = None) -> int:
    cfg = _load_config(args.config)
    strategy = force_strategy or args.strategy or cfg.get("strategy", "cold")
    if strategy not in vqa.STRATEGIES:
        raise ConfigError(f"strategy: unknown strategy {strategy!r}")
    n_runs = args.runs if args.runs is not None else int(cfg.get("runs", 10))
    master_seed = args.seed if args.seed is not None else int(cfg.get("master_seed", 0))
    jobs = args.jobs if args.jobs is not None else cfg.get("jobs", _default_jobs())

    system = _build_system(cfg)
    spec = _ansatz_spec(cfg, system.spec.qubits)
    opt_cfg = _optimizer_config(cfg)
    if args.evals is not None:
        opt_cfg.max_evals = args.evals

    source = None
    if strategy == "cascade":
        source_dir = args.source or cfg.get("source")
        if source_dir is None:
            raise ConfigError("cascade strategy needs --source or config 'source'")
        min_energy = float(cfg.get("source_min_energy", 85.0))
        source = _load_cascade_source(source_dir, min_energy)

    result = vqa.run_campaign(system, spec, strategy, n_runs, opt_cfg, master_seed,
                              jobs=jobs, cascade_source=source)

    out = Path(args.out)
    (out / "runs").mkdir(parents=True, exist_ok=True)
    snapshot = {
        "problem": _problem_section(cfg),
        "ansatz": {"family": spec.family, "reps": spec.reps,
                   "final_rotations": spec.final_rotations},
        "strategy": strategy,
        "runs": n_runs,
        "master_seed": master_seed,
        "optimizer": {k: v for k, v in opt_cfg.__dict__.items() if k != "seed"},
        "source": (args.source or cfg.get("source")) if strategy == "cascade" else None,
    }
    _write_json(out / "config.json", snapshot)
    for record in result.records:
        _write_json(out / "runs" / f"run_{record.run_index:04d}.json", record.to_dict())
    _write_json(out / "summary.json", result.summary)
    (out / "summary.txt").write_text(vqa.format_summary_table(result.summary))
    try:
        best = result.best_record()
        ctx = vqa.CostContext.from_system(system)
        state = vqa.CircuitCost(
            vqa.build_run_circuit(spec, strategy, source), ctx).state(best.best_params)
        qsim.save_statevector(out / "best_state.svec", state)
    except RuntimeError:
        pass
    print(vqa.format_summary_table(result.summary), end="")
    failed = result.summary["runs"] - result.summary["succeeded"]
    if failed:
        print(f"warning: {failed} of {result.summary['runs']} runs failed "
              f"(see runs/*.json)", file=sys.stderr)
    return EXIT_OK if result.summary["succeeded"] else EXIT_NUMERICAL


def cmd_sample(args) -> int:
    cfg = _load_config(args.config)
    system = _build_system(cfg)
    fem_grid.solve_classical(system)
    psi = _load_state(args.state)
    shots = sampling.sample(psi, args.shots, args.seed)
    stochastic = sampling.reconstruct(shots, psi)
    ctx = vqa.CostContext.from_system(system)
    block = sampling.benchmark_metrics(stochastic, psi, ctx, system.u_ref)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "shots.json", shots.as_dict())
    _write_json(out / "metrics.json",
                {"shots": args.shots, "seed": args.seed, "metrics": block})
    print(json.dumps(block, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_metrics(args) -> int:
    cfg = _load_config(args.config)
    system = _build_system(cfg)
    fem_grid.solve_classical(system)
    psi = _load_state(args.state)
    ctx = vqa.CostContext.from_system(system)
    m = vqa.metrics(psi, ctx, system.u_ref).as_dict()
    payload = json.dumps(m, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(payload + "\n")
    print(payload)
    return EXIT_OK


def cmd_slice(args) -> int:
    cfg = _load_config(args.config)
    system = _build_system(cfg)
    psi = _load_state(args.state)
    ctx = vqa.CostContext.from_system(system)
    img = imaging.extract_slice(psi, ctx, args.axis, args.layer)
    if args.format == "csv":
        if args.upsample:
            raise ConfigError("upsampling applies to PGM export only")
        imaging.export_csv(img, args.out)
    else:
        imaging.export_pgm(img, args.out, upsample=args.upsample)
    note = (f" (discarded imaginary norm fraction {img.discarded_norm:.2e})"
            if img.discarded_norm > 1e-12 else "")
    print(f"wrote {args.format} slice {args.axis}={args.layer} to {args.out}{note}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cascade-vqa",
                                description="Variational solver for the 3D heat "
                                            "equation with remeshing warm starts")
    sub = p.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="assemble and solve the classical system")
    solve.add_argument("--config", required=True)
    solve.add_argument("--out", required=True)
    solve.add_argument("--export-matrix", action="store_true",
                       help="also write Matrix Market files")
    solve.set_defaults(func=cmd_solve)

    def campaign_args(sp):
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", required=True)
        sp.add_argument("--runs", type=int)
        sp.add_argument("--seed", type=int, help="master seed")
        sp.add_argument("--jobs", type=int,
                        help="parallel runs (default: CASCADE_VQA_JOBS or 1)")
        sp.add_argument("--evals", type=int, help="override optimizer.max_evals")
        sp.add_argument("--source", help="coarse campaign directory (cascade)")

    campaign = sub.add_parser("campaign", help="run a seeded optimization campaign")
    campaign_args(campaign)
    campaign.add_argument("--strategy", choices=vqa.STRATEGIES)
    campaign.set_defaults(func=cmd_campaign)

    cascade = sub.add_parser("cascade",
                             help="campaign with the cascade warm start")
    campaign_args(cascade)
    cascade.set_defaults(func=lambda a: cmd_campaign(a, force_strategy="cascade"),
                         strategy="cascade")

    samp = sub.add_parser("sample", help="finite-shot benchmark of a stored state")
    samp.add_argument("--state", required=True)
    samp.add_argument("--config", required=True)
    samp.add_argument("--shots", type=int, default=100_000)
    samp.add_argument("--seed", type=int, default=0)
    samp.add_argument("--out", required=True)
    samp.set_defaults(func=cmd_sample)

    met = sub.add_parser("metrics", help="metrics of a stored state")
    met.add_argument("--state", required=True)
    met.add_argument("--config", required=True)
    met.add_argument("--out")
    met.set_defaults(func=cmd_metrics)

    sli = sub.add_parser("slice", help="export a 2D slice of the field")
    sli.add_argument("--state", required=True)
    sli.add_argument("--config", required=True)
    sli.add_argument("--axis", choices=("x", "y", "z"), required=True)
    sli.add_argument("--layer", type=int, required=True)
    sli.add_argument("--format", choices=("csv", "pgm"), default="csv")
    sli.add_argument("--upsample", type=int)
    sli.add_argument("--out", required=True)
    sli.set_defaults(func=cmd_slice)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: missing input: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except (NotPositiveDefiniteError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
