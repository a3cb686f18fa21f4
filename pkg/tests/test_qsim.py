import numpy as np
import pytest

from cascade_vqa.qsim import (GateOp, apply, gate_matrix, load_statevector, run,
                              save_statevector, zero_state)

from conftest import random_unit_state


def dense_apply(psi, op, theta=None):
    """Independent oracle: tensor contraction over the target axes."""
    n = int(np.log2(len(psi)))
    u = gate_matrix(op, theta)
    k = len(op.targets)
    # axis j of the tensor corresponds to qubit n-1-j (row-major reshape)
    axes = [n - 1 - t for t in op.targets]
    tensor = psi.reshape((2,) * n)
    u_tensor = u.reshape((2,) * (2 * k))
    moved = np.moveaxis(tensor, axes, range(k))
    contracted = np.tensordot(u_tensor, moved, axes=(list(range(k, 2 * k)),
                                                     list(range(k))))
    return np.moveaxis(contracted, range(k), axes).reshape(-1)


def dense_unitary(circuit, params, n):
    """64x64 (or 2^n) unitary as an explicit matrix product of embeddings."""
    u = np.eye(1 << n, dtype=complex)
    for op in circuit:
        theta = None if op.param_slot is None else params[op.param_slot]
        cols = [dense_apply(np.eye(1 << n, dtype=complex)[:, j], op, theta)
                for j in range(1 << n)]
        u = np.column_stack(cols) @ u
    return u


def test_gate_op_validation():
    with pytest.raises(ValueError, match="unknown gate"):
        GateOp("RZ", (0,), param_slot=0)
    with pytest.raises(ValueError, match="expects"):
        GateOp("CNOT", (0,), param_slot=None)
    with pytest.raises(ValueError, match="distinct"):
        GateOp("SWAP", (1, 1))
    with pytest.raises(ValueError, match="param_slot or a bound angle"):
        GateOp("RY", (0,))
    with pytest.raises(ValueError, match="param_slot or a bound angle"):
        GateOp("RY", (0,), param_slot=0, angle=1.0)
    with pytest.raises(ValueError, match="takes no parameter"):
        GateOp("H", (0,), param_slot=0)


def test_ry_half_pi_prepares_plus():
    psi = apply(zero_state(1), GateOp("RY", (0,), param_slot=0), np.pi / 2)
    np.testing.assert_allclose(psi, np.array([1, 1]) / np.sqrt(2), atol=1e-15)


def test_rx_zero_is_identity():
    rng = np.random.default_rng(0)
    psi = random_unit_state(rng, 8)
    out = apply(psi.copy(), GateOp("RX", (1,), param_slot=0), 0.0)
    np.testing.assert_allclose(out, psi, atol=1e-15)


def test_ccnot_truth_table():
    # |110> with qubits 0,1 set flips qubit 2 -> |111>
    psi = zero_state(3)
    psi[0b011] = 1.0
    psi[0] = 0.0
    out = apply(psi, GateOp("CCNOT", (0, 1, 2)))
    expected = np.zeros(8, complex)
    expected[0b111] = 1.0
    np.testing.assert_allclose(out, expected, atol=1e-15)
    # full 8x8 table against the dense oracle
    for b in range(8):
        basis = np.zeros(8, complex)
        basis[b] = 1.0
        out = apply(basis.copy(), GateOp("CCNOT", (0, 1, 2)))
        np.testing.assert_allclose(out, dense_apply(basis, GateOp("CCNOT", (0, 1, 2))),
                                   atol=1e-15)


@pytest.mark.parametrize("op,needs_theta", [
    (GateOp("RX", (2,), param_slot=0), True),
    (GateOp("RY", (0,), param_slot=0), True),
    (GateOp("H", (1,)), False),
    (GateOp("CNOT", (2, 0)), False),
    (GateOp("CNOT", (0, 3)), False),
    (GateOp("CCNOT", (3, 1, 2)), False),
    (GateOp("SWAP", (0, 2)), False),
    (GateOp("SWAP", (3, 1)), False),
])
def test_gates_match_dense_oracle(op, needs_theta):
    rng = np.random.default_rng(1234 + 7 * sum(op.targets) + len(op.kind))
    for trial in range(5):
        psi = random_unit_state(rng, 16)
        theta = rng.uniform(-np.pi, np.pi) if needs_theta else None
        got = apply(psi.copy(), op, theta)
        np.testing.assert_allclose(got, dense_apply(psi, op, theta), atol=1e-13)


def test_run_empty_circuit():
    np.testing.assert_allclose(run([], [], 3), zero_state(3))


def test_run_bell_state():
    psi = run([GateOp("H", (0,)), GateOp("CNOT", (0, 1))], [], 2)
    expected = np.zeros(4, complex)
    expected[0b00] = expected[0b11] = 1 / np.sqrt(2)
    np.testing.assert_allclose(psi, expected, atol=1e-15)


def test_run_rejects_out_of_range_slot():
    with pytest.raises(ValueError, match="slot"):
        run([GateOp("RY", (0,), param_slot=2)], [0.1, 0.2], 1)


def test_apply_rejects_out_of_range_target():
    with pytest.raises(ValueError, match="out of range"):
        apply(zero_state(2), GateOp("H", (5,)))


def test_rotation_requires_angle():
    with pytest.raises(ValueError, match="angle"):
        apply(zero_state(1), GateOp("RY", (0,), param_slot=0))


def _random_circuit(rng, n, length):
    ops, n_params = [], 0
    kinds = ["RX", "RY", "H", "CNOT", "SWAP"] + (["CCNOT"] if n >= 3 else [])
    for _ in range(length):
        kind = rng.choice(kinds)
        wires = tuple(rng.choice(n, size={"RX": 1, "RY": 1, "H": 1, "CNOT": 2,
                                          "SWAP": 2, "CCNOT": 3}[kind],
                                 replace=False).tolist())
        if kind in ("RX", "RY"):
            ops.append(GateOp(kind, wires, param_slot=n_params))
            n_params += 1
        else:
            ops.append(GateOp(kind, wires))
    return ops, n_params


def test_norm_preserved_over_random_circuits():
    rng = np.random.default_rng(42)
    for _ in range(300):
        n = int(rng.integers(2, 6))
        circuit, n_params = _random_circuit(rng, n, 12)
        params = rng.uniform(-np.pi, np.pi, n_params)
        psi = run(circuit, params, n)
        assert abs(np.linalg.norm(psi) - 1.0) <= 1e-12


def test_gate_followed_by_inverse_restores_state():
    rng = np.random.default_rng(5)
    psi0 = random_unit_state(rng, 16)
    cases = [
        (GateOp("RX", (1,), param_slot=0), 0.7, GateOp("RX", (1,), param_slot=0), -0.7),
        (GateOp("RY", (3,), param_slot=0), 1.3, GateOp("RY", (3,), param_slot=0), -1.3),
        (GateOp("H", (2,)), None, GateOp("H", (2,)), None),
        (GateOp("CNOT", (0, 2)), None, GateOp("CNOT", (0, 2)), None),
        (GateOp("CCNOT", (0, 1, 3)), None, GateOp("CCNOT", (0, 1, 3)), None),
        (GateOp("SWAP", (1, 2)), None, GateOp("SWAP", (1, 2)), None),
    ]
    for op, theta, inv, inv_theta in cases:
        psi = apply(apply(psi0.copy(), op, theta), inv, inv_theta)
        assert np.abs(psi - psi0).max() <= 1e-12


def test_six_qubit_circuit_vs_dense_unitary_product():
    rng = np.random.default_rng(99)
    circuit, n_params = _random_circuit(rng, 6, 20)
    for _ in range(5):
        params = rng.uniform(-np.pi, np.pi, n_params)
        u = dense_unitary(circuit, params, 6)
        np.testing.assert_allclose(run(circuit, params, 6), u[:, 0], atol=1e-12)


def test_statevector_file_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    psi = random_unit_state(rng, 64)
    path = tmp_path / "state.svec"
    save_statevector(path, psi)
    with open(path, "rb") as fh:
        assert fh.readline() == b"svec 6 64\n"
    np.testing.assert_allclose(load_statevector(path), psi, atol=0)


def test_statevector_load_rejects_garbage(tmp_path):
    path = tmp_path / "bad.svec"
    path.write_bytes(b"nonsense\n")
    with pytest.raises(ValueError, match="not a statevector"):
        load_statevector(path)
    path.write_bytes(b"svec 2 4\n" + b"\x00" * 8)
    with pytest.raises(ValueError, match="truncated"):
        load_statevector(path)
