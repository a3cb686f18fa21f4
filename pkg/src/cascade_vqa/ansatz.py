"""Layered rotation/entangler circuit families and their composed variant.

Every family alternates parameterized rotation layers with a fixed entangling
layer and always ends on a rotation-only layer.  Entanglers are linear
chains: CNOT chains where qubit q controls q+1, or CCNOT chains where
(q, q+1) control q+2.  Each parameter slot is used exactly once.

Parameter counting: param_count = qubits * (number of rotation layers).
Families with an RX and an RY layer per block can end on either a single
(RY) or a double (RX+RY) rotation layer; the published benchmark sizes mix
both conventions, so the choice is an explicit field and `default_spec`
returns the combination matching the reference parameter counts
(36 / 108 / 252 / 330 at 6 / 9 / 12 / 15 qubits).
"""

from __future__ import annotations

from dataclasses import dataclass

from .qsim import GateOp

FAMILIES = ("ry", "ry_cnot", "ry_toffoli", "ry_1cnot", "rx_ry_cnot", "rx_ry_toffoli")

# aliases accepted in configs, mapping to canonical family names
_FAMILY_ALIASES = {
    "ry": "ry", "ry-cnot": "ry_cnot", "ry-toffoli": "ry_toffoli",
    "ry-1cnot": "ry_1cnot", "rx-ry-cnot": "rx_ry_cnot",
    "rx-ry-toffoli": "rx_ry_toffoli",
}

# (reps, final_rotations) reproducing the reference parameter counts per size
_DEFAULT_LAYOUT = {
    "single_rotation": {6: (5, "single"), 9: (11, "single"),
                        12: (20, "single"), 15: (21, "single")},
    "double_rotation": {6: (2, "double"), 9: (5, "double"),
                        12: (10, "single"), 15: (10, "double")},
}


def canonical_family(name: str) -> str:
    key = name.strip().lower().replace(" ", "")
    key = _FAMILY_ALIASES.get(key, key)
    if key not in FAMILIES:
        raise ValueError(f"unknown ansatz family {name!r}, expected one of {FAMILIES}")
    return key


@dataclass(frozen=True)
class AnsatzSpec:
    family: str
    qubits: int
    reps: int
    final_rotations: str = "double"  # only meaningful for rx_ry_* families

    def __post_init__(self):
        object.__setattr__(self, "family", canonical_family(self.family))
        if self.qubits < 2:
            raise ValueError("need at least 2 qubits")
        if self.reps < 0:
            raise ValueError("reps must be non-negative")
        if self.final_rotations not in ("single", "double"):
            raise ValueError("final_rotations must be 'single' or 'double'")

    @property
    def uses_rx(self) -> bool:
        return self.family.startswith("rx_ry")

    @property
    def rotation_layers(self) -> int:
        if not self.uses_rx:
            return self.reps + 1
        return 2 * self.reps + (2 if self.final_rotations == "double" else 1)

    @property
    def param_count(self) -> int:
        return self.qubits * self.rotation_layers


@dataclass(frozen=True)
class BoundCircuit:
    gates: tuple[GateOp, ...]
    qubits: int
    param_count: int


def default_spec(family: str, qubits: int) -> AnsatzSpec:
    """Spec with the reference parameter count for the given size."""
    family = canonical_family(family)
    table = _DEFAULT_LAYOUT["double_rotation" if family.startswith("rx_ry")
                            else "single_rotation"]
    if qubits not in table:
        raise ValueError(f"no default layout for {qubits} qubits "
                         f"(known sizes: {sorted(table)})")
    reps, final = table[qubits]
    return AnsatzSpec(family=family, qubits=qubits, reps=reps, final_rotations=final)


def _rotation_layer(kind: str, n: int, next_slot: int) -> tuple[list[GateOp], int]:
    gates = [GateOp(kind, (q,), param_slot=next_slot + q) for q in range(n)]
    return gates, next_slot + n


def _entangler(family: str, n: int) -> list[GateOp]:
    if family.endswith("toffoli"):
        return [GateOp("CCNOT", (q, q + 1, q + 2)) for q in range(n - 2)]
    return [GateOp("CNOT", (q, q + 1)) for q in range(n - 1)]


def _rotation_block(spec: AnsatzSpec, next_slot: int, final: bool) -> tuple[list[GateOp], int]:
    gates: list[GateOp] = []
    if spec.uses_rx and not (final and spec.final_rotations == "single"):
        layer, next_slot = _rotation_layer("RX", spec.qubits, next_slot)
        gates += layer
    layer, next_slot = _rotation_layer("RY", spec.qubits, next_slot)
    gates += layer
    return gates, next_slot


def build(spec: AnsatzSpec) -> BoundCircuit:
    """Gate list of the ansatz with sequentially numbered parameter slots."""
    gates: list[GateOp] = []
    slot = 0
    if spec.family == "ry_1cnot":
        # reps plain rotation layers, one CNOT chain, final rotation layer
        for _ in range(spec.reps):
            block, slot = _rotation_block(spec, slot, final=False)
            gates += block
        gates += _entangler("ry_cnot", spec.qubits)
    else:
        for _ in range(spec.reps):
            block, slot = _rotation_block(spec, slot, final=False)
            gates += block
            if spec.family != "ry":
                gates += _entangler(spec.family, spec.qubits)
    block, slot = _rotation_block(spec, slot, final=True)
    gates += block
    assert slot == spec.param_count
    return BoundCircuit(gates=tuple(gates), qubits=spec.qubits, param_count=slot)


def build_composed(spec: AnsatzSpec) -> BoundCircuit:
    """Circuit for A(theta) . A(0)^dagger, identity when all parameters are 0.

    At zero angles the rotations vanish, so A(0)^dagger reduces to the
    entangling chains applied in reverse order (CNOT and CCNOT are their own
    inverses).  That prefix carries no parameter slots; the suffix is the
    full ansatz.
    """
    inner = build(spec)
    entanglers = [g for g in inner.gates if g.param_slot is None]
    prefix = tuple(reversed(entanglers))
    return BoundCircuit(gates=prefix + inner.gates, qubits=spec.qubits,
                        param_count=inner.param_count)


def first_block_slots(spec: AnsatzSpec) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Parameter slots of the first rotation block as (rx_slots, ry_slots)."""
    n = spec.qubits
    if spec.uses_rx and spec.reps > 0:
        return tuple(range(n)), tuple(range(n, 2 * n))
    if spec.uses_rx:  # reps == 0: the final block is the first block
        if spec.final_rotations == "double":
            return tuple(range(n)), tuple(range(n, 2 * n))
        return (), tuple(range(n))
    return (), tuple(range(n))


def dump_gates(circuit: BoundCircuit) -> str:
    """Plain-text gate list, one gate per line: kind, targets, slot or angle."""
    lines = [f"qubits {circuit.qubits} params {circuit.param_count}"]
    for g in circuit.gates:
        targets = ",".join(str(t) for t in g.targets)
        if g.param_slot is not None:
            lines.append(f"{g.kind} {targets} slot={g.param_slot}")
        elif g.angle is not None:
            lines.append(f"{g.kind} {targets} angle={g.angle!r}")
        else:
            lines.append(f"{g.kind} {targets}")
    return "\n".join(lines) + "\n"
