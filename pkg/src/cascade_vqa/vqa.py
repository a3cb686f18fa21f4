"""Hybrid loop: normalized energy cost, metrics, initializations, campaigns.

The cost of a normalized trial state psi against the stiffness system (K, f)
is

    C(psi) = -(1/8) * (<psi|f> + <f|psi>)^2 / <psi|K|psi>

which equals the classical energy 1/2 x.K.x - f.x of the rescaled field
x = r_opt * psi with the norm r_opt = Re<psi|f> / <psi|K|psi> optimized out
analytically.  Its global minimum over unit states is -1/2 f.u at
psi = u/||u||, so energy accuracy 100 * C(psi)/C(u/||u||) is 100% exactly at
the normalized classical solution.

Three ways to start the optimization:

* cold: every angle uniform in [-pi, pi).
* uniform: the first rotation layer prepares (approximately) the equal
  superposition (RY at pi/2, RX at 0), remaining angles in [-0.01, 0.01].
* cascade: a finished coarse-grid circuit A(theta_opt) is embedded into the
  n+3 qubit register, the three fresh qubits get Hadamards and are swapped
  into the fine-bit position of each axis group, and a composed ansatz
  B(theta) with B(0) = I is optimized on top.  At theta = 0 the prepared
  state equals the classical prolongation of the coarse state.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import qsim
from .ansatz import AnsatzSpec, BoundCircuit, build, build_composed, first_block_slots
from .fem_grid import GridSystem, solve_classical
from .optimizer import CostEvaluationError, OptimizerConfig, OptimResult, minimize
from .qsim import GateOp
from .seeds import fanout

STRATEGIES = ("cold", "uniform", "cascade")


class DegenerateEnergyError(ArithmeticError):
    """<psi|K|psi> vanished relative to the matrix scale."""


@dataclass
class CostContext:
    """Everything the cost function needs, with |f> kept normalized."""

    matrix: sp.csr_matrix
    load: np.ndarray
    load_state: np.ndarray
    load_norm: float
    matrix_scale: float

    @classmethod
    def from_system(cls, system: GridSystem) -> "CostContext":
        norm = float(np.linalg.norm(system.load))
        if norm == 0.0:
            raise ValueError("load vector is zero; the cost is identically zero")
        return cls(matrix=system.matrix, load=system.load,
                   load_state=system.load / norm, load_norm=norm,
                   matrix_scale=system.matrix_scale)

    @property
    def qubits(self) -> int:
        return int(np.log2(len(self.load)))


def _quadratic_form(psi: np.ndarray, ctx: CostContext) -> float:
    return float(np.real(np.vdot(psi, ctx.matrix @ psi)))


def cost(psi: np.ndarray, ctx: CostContext) -> float:
    """Normalized energy cost of a unit state (global minimum -1/2 f.u)."""
    denom = _quadratic_form(psi, ctx)
    if denom <= 1e-14 * ctx.matrix_scale:
        raise DegenerateEnergyError(
            f"<psi|K|psi> = {denom:.3e} is degenerate "
            f"(matrix scale {ctx.matrix_scale:.3e})")
    overlap = 2.0 * ctx.load_norm * float(np.real(np.vdot(psi, ctx.load_state)))
    return -0.125 * overlap * overlap / denom


def r_opt(psi: np.ndarray, ctx: CostContext) -> float:
    """Optimal scale factor: the trial field is r_opt * psi.

    Equals ||u|| when psi is the normalized classical solution.
    """
    denom = _quadratic_form(psi, ctx)
    if denom <= 1e-14 * ctx.matrix_scale:
        raise DegenerateEnergyError(
            f"<psi|K|psi> = {denom:.3e} is degenerate "
            f"(matrix scale {ctx.matrix_scale:.3e})")
    return ctx.load_norm * float(np.real(np.vdot(psi, ctx.load_state))) / denom


def trial_energy(x: np.ndarray, ctx: CostContext) -> float:
    """Classical energy 1/2 <x|K|x> - Re<x|f> of an unnormalized field."""
    return 0.5 * float(np.real(np.vdot(x, ctx.matrix @ x))) \
        - ctx.load_norm * float(np.real(np.vdot(x, ctx.load_state)))


@dataclass
class Metrics:
    energy_accuracy: float  # percent, 100 at the exact normalized solution
    fidelity: float         # |<psi|u>|^2 / ||u||^2, in [0, 1]
    r_opt: float
    cost_value: float

    def as_dict(self) -> dict:
        return {"energy_accuracy": self.energy_accuracy, "fidelity": self.fidelity,
                "r_opt": self.r_opt, "cost_value": self.cost_value}

    @classmethod
    def from_dict(cls, d: dict) -> "Metrics":
        return cls(energy_accuracy=d["energy_accuracy"], fidelity=d["fidelity"],
                   r_opt=d["r_opt"], cost_value=d["cost_value"])


def metrics(psi: np.ndarray, ctx: CostContext, u_ref: np.ndarray) -> Metrics:
    """Energy accuracy and fidelity against the classical reference solution."""
    u_norm = float(np.linalg.norm(u_ref))
    c_psi = cost(psi, ctx)
    c_ref = cost(u_ref / u_norm, ctx)
    fidelity = float(np.abs(np.vdot(psi, u_ref)) ** 2) / (u_norm * u_norm)
    return Metrics(energy_accuracy=100.0 * c_psi / c_ref, fidelity=fidelity,
                   r_opt=r_opt(psi, ctx), cost_value=c_psi)


# ---------------------------------------------------------------------------
# initial parameters

def init_cold(spec: AnsatzSpec, seed: int) -> np.ndarray:
    """Every angle drawn uniformly from [-pi, pi)."""
    rng = np.random.default_rng(seed)
    return rng.uniform(-np.pi, np.pi, spec.param_count)


def init_uniform(spec: AnsatzSpec, seed: int, spread: float = 0.01) -> np.ndarray:
    """First rotation layer prepares the near-equal superposition.

    RY slots of the first block are set to pi/2 and RX slots to 0; every
    other angle is drawn uniformly from [-spread, spread].
    """
    rng = np.random.default_rng(seed)
    params = rng.uniform(-spread, spread, spec.param_count)
    rx_slots, ry_slots = first_block_slots(spec)
    params[list(rx_slots)] = 0.0
    params[list(ry_slots)] = np.pi / 2.0
    return params


def init_near_zero(param_count: int, seed: int, spread: float = 0.01) -> np.ndarray:
    """Start for the composed cascade ansatz, a jitter around B(0) = I."""
    rng = np.random.default_rng(seed)
    return rng.uniform(-spread, spread, param_count)


# ---------------------------------------------------------------------------
# remeshing

def remesh_permutation(n_coarse: int) -> tuple[int, ...]:
    """Wire permutation embedding a coarse register into n_coarse + 3 wires.

    Input layout: the three fresh wires sit at 0, 1, 2 (below the coarse
    register, which occupies wires 3 .. n_coarse+2).  The permutation moves
    each fresh wire to the least significant (finest) bit of one axis group
    and shifts the coarse bits up, so that grid coordinates double per axis:
    fresh wire 0 becomes the new x bit, 1 the new y bit, 2 the new z bit.
    Returned as perm[wire_before] = wire_after.
    """
    if n_coarse % 3 != 0:
        raise ValueError(f"coarse qubit count must be divisible by 3, got {n_coarse}")
    k = n_coarse // 3
    perm = [0] * (n_coarse + 3)
    perm[0] = 0
    perm[1] = k + 1
    perm[2] = 2 * k + 2
    for j in range(n_coarse):
        perm[3 + j] = 1 + j + j // k
    return tuple(perm)


def permutation_to_swaps(perm: tuple[int, ...]) -> tuple[GateOp, ...]:
    """SWAP-gate list realizing perm (qubit at wire w ends up at perm[w])."""
    n = len(perm)
    if sorted(perm) != list(range(n)):
        raise ValueError(f"not a permutation: {perm}")
    cur = list(range(n))   # cur[wire] = qubit currently at this wire
    pos = list(range(n))   # pos[qubit] = wire it currently occupies
    swaps = []
    for q in range(n):
        w_now, w_target = pos[q], perm[q]
        if w_now == w_target:
            continue
        other = cur[w_target]
        swaps.append(GateOp("SWAP", (w_now, w_target)))
        cur[w_target], cur[w_now] = q, other
        pos[q], pos[other] = w_target, w_now
    return tuple(swaps)


def permute_basis_indices(perm: tuple[int, ...]) -> np.ndarray:
    """Index map of the wire permutation: out[new_index] = old_index."""
    n = len(perm)
    old = np.arange(1 << n)
    new = np.zeros(1 << n, dtype=np.int64)
    for w, w_new in enumerate(perm):
        new |= ((old >> w) & 1) << w_new
    out = np.empty(1 << n, dtype=np.int64)
    out[new] = old
    return out


def _shift_wires(gates, offset: int):
    return [GateOp(g.kind, tuple(t + offset for t in g.targets),
                   param_slot=g.param_slot, angle=g.angle) for g in gates]


def _bind_params(gates, params):
    bound = []
    for g in gates:
        if g.param_slot is not None:
            bound.append(GateOp(g.kind, g.targets, angle=float(params[g.param_slot])))
        else:
            bound.append(g)
    return bound


def build_cascade_circuit(coarse_spec: AnsatzSpec, coarse_params: np.ndarray,
                          fine_spec: AnsatzSpec) -> BoundCircuit:
    """Warm-start circuit: bound coarse ansatz, Hadamards on the three fresh
    wires, the remeshing swap network, then the composed fine ansatz.

    The free parameters are exactly those of the composed ansatz; at zero
    they leave the embedded (prolonged) coarse state untouched.
    """
    n_coarse = coarse_spec.qubits
    if fine_spec.qubits != n_coarse + 3:
        raise ValueError(f"fine ansatz must have {n_coarse + 3} qubits, "
                         f"got {fine_spec.qubits}")
    if len(coarse_params) != coarse_spec.param_count:
        raise ValueError(f"expected {coarse_spec.param_count} coarse parameters, "
                         f"got {len(coarse_params)}")
    coarse_gates = _shift_wires(_bind_params(build(coarse_spec).gates, coarse_params), 3)
    hadamards = [GateOp("H", (w,)) for w in (0, 1, 2)]
    swaps = permutation_to_swaps(remesh_permutation(n_coarse))
    composed = build_composed(fine_spec)
    gates = tuple(coarse_gates) + tuple(hadamards) + swaps + composed.gates
    return BoundCircuit(gates=gates, qubits=fine_spec.qubits,
                        param_count=composed.param_count)


# ---------------------------------------------------------------------------
# cost evaluation with a cached fixed prefix

def split_fixed_prefix(circuit: BoundCircuit) -> tuple[tuple[GateOp, ...], tuple[GateOp, ...]]:
    """Split the gate list at the first parameterized gate."""
    for i, g in enumerate(circuit.gates):
        if g.param_slot is not None:
            return circuit.gates[:i], circuit.gates[i:]
    return circuit.gates, ()


class CircuitCost:
    """Callable cost of a circuit's output state; the parameter-free prefix
    (e.g. the bound coarse stage of a cascade circuit) is simulated once."""

    def __init__(self, circuit: BoundCircuit, ctx: CostContext):
        if circuit.qubits != ctx.qubits:
            raise ValueError(f"circuit has {circuit.qubits} qubits, "
                             f"system has {ctx.qubits}")
        self.circuit = circuit
        self.ctx = ctx
        prefix, self._suffix = split_fixed_prefix(circuit)
        self._start = qsim.run(prefix, (), circuit.qubits)

    def state(self, params: np.ndarray) -> np.ndarray:
        return qsim.run(self._suffix, params, self.circuit.qubits, state=self._start)

    def __call__(self, params: np.ndarray) -> float:
        return cost(self.state(params), self.ctx)


# ---------------------------------------------------------------------------
# run records and campaigns

@dataclass(frozen=True)
class CascadeSource:
    """Optimized coarse stage feeding a cascade campaign."""

    spec: AnsatzSpec
    params: np.ndarray
    energy_accuracy: float | None = None

    def as_dict(self) -> dict:
        return {"ansatz": _spec_dict(self.spec), "params": list(map(float, self.params)),
                "energy_accuracy": self.energy_accuracy}

    @classmethod
    def from_dict(cls, d: dict) -> "CascadeSource":
        return cls(spec=_spec_from_dict(d["ansatz"]), params=np.array(d["params"]),
                   energy_accuracy=d.get("energy_accuracy"))


def _spec_dict(spec: AnsatzSpec) -> dict:
    return {"family": spec.family, "qubits": spec.qubits, "reps": spec.reps,
            "final_rotations": spec.final_rotations, "param_count": spec.param_count}


def _spec_from_dict(d: dict) -> AnsatzSpec:
    return AnsatzSpec(family=d["family"], qubits=d["qubits"], reps=d["reps"],
                      final_rotations=d.get("final_rotations", "double"))


@dataclass
class RunRecord:
    run_index: int
    seed: int
    strategy: str
    grid_qubits: int
    ansatz: AnsatzSpec
    best_params: np.ndarray | None = None
    optim: OptimResult | None = None
    run_metrics: Metrics | None = None
    cascade_source: CascadeSource | None = None
    error: str | None = None
    wall_time_s: float = 0.0

    @property
    def failed(self) -> bool:
        return self.error is not None

    def to_dict(self) -> dict:
        """JSON form; everything outside "timing" is deterministic."""
        optim = None
        if self.optim is not None:
            optim = {"best_cost": self.optim.best_cost,
                     "evals_used": self.optim.evals_used,
                     "stop_reason": self.optim.stop_reason,
                     "trace": [[i, c] for i, c in self.optim.improvements()]}
        return {
            "run_index": self.run_index,
            "seed": self.seed,
            "strategy": self.strategy,
            "grid_qubits": self.grid_qubits,
            "ansatz": _spec_dict(self.ansatz),
            "best_params": (None if self.best_params is None
                            else list(map(float, self.best_params))),
            "optim": optim,
            "metrics": None if self.run_metrics is None else self.run_metrics.as_dict(),
            "cascade_source": (None if self.cascade_source is None
                               else self.cascade_source.as_dict()),
            "error": self.error,
            "timing": {"wall_time_s": self.wall_time_s},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        optim = None
        if d.get("optim") is not None:
            o = d["optim"]
            optim = OptimResult(
                best_params=np.array(d["best_params"]) if d["best_params"] else None,
                best_cost=o["best_cost"], evals_used=o["evals_used"],
                stop_reason=o["stop_reason"],
                trace=[(i, c) for i, c in o["trace"]])
        return cls(
            run_index=d["run_index"], seed=d["seed"], strategy=d["strategy"],
            grid_qubits=d["grid_qubits"], ansatz=_spec_from_dict(d["ansatz"]),
            best_params=None if d["best_params"] is None else np.array(d["best_params"]),
            optim=optim,
            run_metrics=None if d["metrics"] is None else Metrics.from_dict(d["metrics"]),
            cascade_source=(None if d.get("cascade_source") is None
                            else CascadeSource.from_dict(d["cascade_source"])),
            error=d.get("error"),
            wall_time_s=d.get("timing", {}).get("wall_time_s", 0.0))


def build_run_circuit(ansatz_spec: AnsatzSpec, strategy: str,
                      cascade_source: CascadeSource | None) -> BoundCircuit:
    if strategy == "cascade":
        if cascade_source is None:
            raise ValueError("cascade strategy requires a coarse source")
        return build_cascade_circuit(cascade_source.spec, cascade_source.params,
                                     ansatz_spec)
    return build(ansatz_spec)


def initial_params(ansatz_spec: AnsatzSpec, strategy: str, seed: int) -> np.ndarray:
    if strategy == "cold":
        return init_cold(ansatz_spec, seed)
    if strategy == "uniform":
        return init_uniform(ansatz_spec, seed)
    if strategy == "cascade":
        return init_near_zero(ansatz_spec.param_count, seed)
    raise ValueError(f"unknown strategy {strategy!r}, expected one of {STRATEGIES}")


def run_single(system: GridSystem, ansatz_spec: AnsatzSpec, strategy: str,
               seed: int, opt_cfg: OptimizerConfig,
               cascade_source: CascadeSource | None = None,
               run_index: int = 0) -> RunRecord:
    """One seeded optimization run, returning a full record.

    Cost-evaluation failures are recorded on the run instead of raised, so a
    campaign never aborts because one run went numerically bad.
    """
    start = time.monotonic()
    record = RunRecord(run_index=run_index, seed=seed, strategy=strategy,
                       grid_qubits=system.spec.qubits, ansatz=ansatz_spec,
                       cascade_source=cascade_source if strategy == "cascade" else None)
    try:
        circuit = build_run_circuit(ansatz_spec, strategy, cascade_source)
        ctx = CostContext.from_system(system)
        evaluator = CircuitCost(circuit, ctx)
        x0 = initial_params(ansatz_spec, strategy, seed)
        cfg = OptimizerConfig(**{**opt_cfg.__dict__, "seed": seed})
        result = minimize(evaluator, x0, cfg)
        record.optim = result
        record.best_params = result.best_params
        if system.u_ref is None:
            solve_classical(system)
        record.run_metrics = metrics(evaluator.state(result.best_params), ctx,
                                     system.u_ref)
    except (CostEvaluationError, DegenerateEnergyError) as exc:
        record.error = f"{type(exc).__name__}: {exc}"
    record.wall_time_s = time.monotonic() - start
    return record


def _run_worker(args) -> RunRecord:
    return run_single(*args)


def run_campaign(system: GridSystem, ansatz_spec: AnsatzSpec, strategy: str,
                 n_runs: int, opt_cfg: OptimizerConfig, master_seed: int,
                 jobs: int = 1,
                 cascade_source: CascadeSource | None = None) -> "CampaignResult":
    """n_runs independent seeded runs plus the aggregate summary.

    Run i uses seed splitmix(master_seed, i), so results are identical for
    any number of workers.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}, expected one of {STRATEGIES}")
    if system.u_ref is None:
        solve_classical(system)
    tasks = [(system, ansatz_spec, strategy, fanout(master_seed, i), opt_cfg,
              cascade_source, i) for i in range(n_runs)]
    if jobs > 1 and n_runs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_worker, tasks))
    else:
        records = [_run_worker(t) for t in tasks]
    records.sort(key=lambda r: r.run_index)
    return CampaignResult(records=records,
                          summary=summarize(records, ansatz_spec, strategy, master_seed))


@dataclass
class CampaignResult:
    records: list[RunRecord]
    summary: dict

    def best_record(self) -> RunRecord:
        ok = [r for r in self.records if not r.failed]
        if not ok:
            raise RuntimeError("all campaign runs failed")
        return max(ok, key=lambda r: r.run_metrics.energy_accuracy)


def summarize(records: list[RunRecord], ansatz_spec: AnsatzSpec, strategy: str,
              master_seed: int) -> dict:
    ok = [r for r in records if not r.failed]
    energies = np.array([r.run_metrics.energy_accuracy for r in ok])
    evals = np.array([r.optim.evals_used for r in ok])

    def stats(a):
        if len(a) == 0:
            return {"mean": None, "std": None, "max": None, "min": None}
        std = float(np.std(a, ddof=1)) if len(a) > 1 else 0.0
        return {"mean": float(np.mean(a)), "std": std,
                "max": float(np.max(a)), "min": float(np.min(a))}

    best_idx = (int(ok[int(np.argmax(energies))].run_index) if len(ok) else None)
    return {
        "qubits": ansatz_spec.qubits,
        "params": ansatz_spec.param_count,
        "ansatz": ansatz_spec.family,
        "strategy": strategy,
        "master_seed": master_seed,
        "runs": len(records),
        "succeeded": len(ok),
        "energy_accuracy": stats(energies),
        "evaluations": stats(evals),
        "best_run_index": best_idx,
    }


def format_summary_table(summary: dict) -> str:
    """One-row table in the benchmark column order."""
    e, v = summary["energy_accuracy"], summary["evaluations"]

    def pm(s):
        if s["mean"] is None:
            return "-"
        return f"{s['mean']:.2f} ± {s['std']:.2f}"

    def one(s, key):
        return "-" if s[key] is None else f"{s[key]:.2f}"

    header = ("Qubits | Params | Ansatz | Mean Energy (%) | Iterations | "
              "Max Energy (%) | Min Energy (%)")
    row = (f"{summary['qubits']} | {summary['params']} | {summary['ansatz']} | "
           f"{pm(e)} | {pm(v)} | {one(e, 'max')} | {one(e, 'min')}")
    return header + "\n" + row + "\n"


def select_cascade_source(result: CampaignResult,
                          min_energy: float = 85.0) -> CascadeSource:
    """Best-energy run of a coarse campaign, gated on a minimum accuracy."""
    best = result.best_record()
    acc = best.run_metrics.energy_accuracy
    if acc < min_energy:
        raise ValueError(f"best coarse run reaches {acc:.2f}% energy accuracy, "
                         f"below the {min_energy:.2f}% gate")
    return CascadeSource(spec=best.ansatz, params=best.best_params,
                         energy_accuracy=acc)
