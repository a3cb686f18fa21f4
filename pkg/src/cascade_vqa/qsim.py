"""Exact statevector simulation of the RX/RY/H/CNOT/CCNOT/SWAP gate set.

Qubit k is bit k of the basis-state index (little endian), which lines up
with the grid layout in fem_grid: the x bits are the lowest qubit group,
then y, then z.  Gates act in place on strided amplitude slices; there is
no general-unitary fallback because this gate set does not need one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

ROTATIONS = ("RX", "RY")
_ARITY = {"RX": 1, "RY": 1, "H": 1, "CNOT": 2, "CCNOT": 3, "SWAP": 2}


@dataclass(frozen=True)
class GateOp:
    """One gate: kind, target wires, and for rotations a parameter slot
    or a bound angle (exactly one of the two).

    Target order: CNOT is (control, target), CCNOT is (control, control,
    target), SWAP is symmetric.
    """

    kind: str
    targets: tuple[int, ...]
    param_slot: int | None = None
    angle: float | None = None

    def __post_init__(self):
        if self.kind not in _ARITY:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if len(self.targets) != _ARITY[self.kind]:
            raise ValueError(f"{self.kind} expects {_ARITY[self.kind]} targets, "
                             f"got {self.targets}")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError(f"{self.kind} targets must be distinct: {self.targets}")
        if any(t < 0 for t in self.targets):
            raise ValueError(f"negative target in {self.targets}")
        if self.kind in ROTATIONS:
            if (self.param_slot is None) == (self.angle is None):
                raise ValueError(f"{self.kind} needs a param_slot or a bound angle")
        elif self.param_slot is not None or self.angle is not None:
            raise ValueError(f"{self.kind} takes no parameter")


def zero_state(n: int) -> np.ndarray:
    psi = np.zeros(1 << n, dtype=np.complex128)
    psi[0] = 1.0
    return psi


def num_qubits(psi: np.ndarray) -> int:
    n = int(math.log2(len(psi)))
    if 1 << n != len(psi):
        raise ValueError(f"statevector length {len(psi)} is not a power of two")
    return n


def _apply_1q(psi: np.ndarray, q: int, u00, u01, u10, u11) -> None:
    view = psi.reshape(-1, 2, 1 << q)
    a = view[:, 0, :].copy()
    b = view[:, 1, :]
    view[:, 0, :] = u00 * a + u01 * b
    view[:, 1, :] = u10 * a + u11 * b


@lru_cache(maxsize=512)
def _flip_indices(n: int, controls: tuple[int, ...], target: int) -> np.ndarray:
    """Indices with all control bits set and the target bit clear."""
    idx = np.arange(1 << n)
    mask = (idx >> target) & 1 == 0
    for c in controls:
        mask &= (idx >> c) & 1 == 1
    out = idx[mask]
    out.setflags(write=False)
    return out


@lru_cache(maxsize=512)
def _swap_indices(n: int, qa: int, qb: int) -> np.ndarray:
    """Indices with bit qa set and bit qb clear (partners differ in both bits)."""
    idx = np.arange(1 << n)
    out = idx[((idx >> qa) & 1 == 1) & ((idx >> qb) & 1 == 0)]
    out.setflags(write=False)
    return out


def apply(psi: np.ndarray, op: GateOp, theta: float | None = None) -> np.ndarray:
    """Apply one gate in place and return the same array.

    Rotations take the angle from `theta`, or from the gate's bound angle
    when `theta` is None.
    """
    n = num_qubits(psi)
    if any(t >= n for t in op.targets):
        raise ValueError(f"gate {op.kind}{op.targets} out of range for {n} qubits")
    kind = op.kind

    if kind in ROTATIONS:
        if theta is None:
            theta = op.angle
        if theta is None:
            raise ValueError(f"{kind} gate requires an angle")
        c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
        if kind == "RX":
            _apply_1q(psi, op.targets[0], c, -1j * s, -1j * s, c)
        else:
            _apply_1q(psi, op.targets[0], c, -s, s, c)
        return psi

    if kind == "H":
        r = 1.0 / math.sqrt(2.0)
        _apply_1q(psi, op.targets[0], r, r, r, -r)
        return psi

    if kind in ("CNOT", "CCNOT"):
        *controls, target = op.targets
        i0 = _flip_indices(n, tuple(controls), target)
        i1 = i0 + (1 << target)
        tmp = psi[i0].copy()
        psi[i0] = psi[i1]
        psi[i1] = tmp
        return psi

    # SWAP
    qa, qb = op.targets
    i10 = _swap_indices(n, qa, qb)
    i01 = i10 - (1 << qa) + (1 << qb)
    tmp = psi[i10].copy()
    psi[i10] = psi[i01]
    psi[i01] = tmp
    return psi


def run(circuit: Iterable[GateOp], params: Sequence[float], n: int,
        state: np.ndarray | None = None) -> np.ndarray:
    """Run a gate list on |0...0> (or on a copy of `state`) and return the result."""
    psi = zero_state(n) if state is None else np.array(state, dtype=np.complex128)
    n_params = len(params)
    for op in circuit:
        if op.param_slot is not None:
            if op.param_slot >= n_params:
                raise ValueError(f"parameter slot {op.param_slot} out of range "
                                 f"for {n_params} parameters")
            apply(psi, op, params[op.param_slot])
        else:
            apply(psi, op)
    return psi


def gate_matrix(op: GateOp, theta: float | None = None) -> np.ndarray:
    """Dense matrix of the gate on its own wires (oracle/testing helper)."""
    if op.kind in ROTATIONS:
        if theta is None:
            theta = op.angle
        c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
        if op.kind == "RX":
            return np.array([[c, -1j * s], [-1j * s, c]])
        return np.array([[c, -s], [s, c]], dtype=complex)
    if op.kind == "H":
        return np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2.0)
    if op.kind == "CNOT":
        m = np.eye(4, dtype=complex)
        m[[2, 3]] = m[[3, 2]]
        return m
    if op.kind == "CCNOT":
        m = np.eye(8, dtype=complex)
        m[[6, 7]] = m[[7, 6]]
        return m
    m = np.eye(4, dtype=complex)  # SWAP
    m[[1, 2]] = m[[2, 1]]
    return m


def save_statevector(path, psi: np.ndarray) -> None:
    """Binary export: one ASCII header line "svec <n> <length>", then
    little-endian float64 (real, imag) pairs."""
    n = num_qubits(psi)
    flat = np.empty(2 * len(psi))
    flat[0::2] = psi.real
    flat[1::2] = psi.imag
    with open(path, "wb") as fh:
        fh.write(f"svec {n} {len(psi)}\n".encode("ascii"))
        fh.write(flat.astype("<f8").tobytes())


def load_statevector(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        if len(header) != 3 or header[0] != "svec":
            raise ValueError(f"{path}: not a statevector file")
        n, length = int(header[1]), int(header[2])
        if length != 1 << n:
            raise ValueError(f"{path}: header length {length} != 2^{n}")
        flat = np.frombuffer(fh.read(), dtype="<f8")
    if len(flat) != 2 * length:
        raise ValueError(f"{path}: truncated payload")
    return flat[0::2] + 1j * flat[1::2]
