"""Finite-shot measurement simulation and empirical state reconstruction.

Measurement counts only carry amplitude magnitudes.  Reconstruction copies
each amplitude's phase from a reference state (normally the ideal simulated
one), i.e. only magnitude noise is modeled.  This is the weakest assumption
consistent with treating the sampled state as an estimate of the simulated
one; see the README for the caveat.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .vqa import CostContext, cost, metrics


@dataclass
class ShotResult:
    counts: dict[int, int]  # basis index -> count, zero entries omitted
    shots: int
    qubits: int

    def as_dict(self) -> dict:
        return {"qubits": self.qubits, "shots": self.shots,
                "counts": {str(k): v for k, v in sorted(self.counts.items())}}

    @classmethod
    def from_dict(cls, d: dict) -> "ShotResult":
        return cls(counts={int(k): int(v) for k, v in d["counts"].items()},
                   shots=int(d["shots"]), qubits=int(d["qubits"]))

    def frequencies(self) -> np.ndarray:
        freq = np.zeros(1 << self.qubits)
        for k, v in self.counts.items():
            freq[k] = v / self.shots
        return freq


def sample(psi: np.ndarray, shots: int, seed: int) -> ShotResult:
    """Multinomial draw of computational-basis outcomes from |psi_i|^2."""
    if shots <= 0:
        raise ValueError(f"shots must be positive, got {shots}")
    n = int(np.log2(len(psi)))
    probs = np.abs(psi) ** 2
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum()
    draws = np.random.default_rng(seed).multinomial(shots, probs)
    counts = {int(i): int(c) for i, c in enumerate(draws) if c}
    return ShotResult(counts=counts, shots=shots, qubits=n)


def reconstruct(result: ShotResult, phase_ref: np.ndarray) -> np.ndarray:
    """Unit state with sqrt-frequency magnitudes and phases from phase_ref."""
    if len(phase_ref) != 1 << result.qubits:
        raise ValueError("phase reference has the wrong dimension")
    freq = result.frequencies()
    if not freq.any():
        raise ValueError("all counts are zero")
    mags = np.sqrt(freq)
    ref_abs = np.abs(phase_ref)
    phases = np.where(ref_abs > 0, phase_ref / np.where(ref_abs > 0, ref_abs, 1.0), 1.0)
    psi = mags * phases
    return psi / np.linalg.norm(psi)


def benchmark_metrics(stochastic: np.ndarray, ideal: np.ndarray,
                      ctx: CostContext, u_ref: np.ndarray) -> dict:
    """The four benchmark numbers: energy and fidelity of the sampled state
    against the classical solution and against the noise-free simulation.

    Energies are percentages of the compared state's cost; fidelities are
    squared overlaps in percent.
    """
    m_sol = metrics(stochastic, ctx, u_ref)
    c_ideal = cost(ideal, ctx)
    overlap = float(np.abs(np.vdot(stochastic, ideal)) ** 2)
    return {
        "energy_vs_solution": m_sol.energy_accuracy,
        "energy_vs_simulation": 100.0 * m_sol.cost_value / c_ideal,
        "fidelity_vs_solution": 100.0 * m_sol.fidelity,
        "fidelity_vs_simulation": 100.0 * overlap,
    }
