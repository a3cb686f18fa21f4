import json

import numpy as np
import pytest
import scipy.io

from cascade_vqa.fem_grid import (BoundarySpec, DirichletFace, GridSpec, GridSystem,
                                  NeumannPatch, NotPositiveDefiniteError, assemble,
                                  default_boundary, element_stiffness,
                                  export_matrix_market, face_nodes, problem_from_config,
                                  prolong, raw_stiffness, solve_classical)


def test_grid_spec_rejects_bad_qubits():
    with pytest.raises(ValueError, match="divisible by 3"):
        GridSpec(7)
    with pytest.raises(ValueError):
        GridSpec(3)


def test_grid_spec_geometry():
    spec = GridSpec(6)
    assert spec.nodes_per_axis == 4
    assert spec.size == 64
    assert spec.spacing == pytest.approx(1.0 / 3.0)


def assemble_1d_chain(h):
    """Hand assembly of a 2-element 1D chain with unit conductivity."""
    ke = (1.0 / h) * np.array([[1.0, -1.0], [-1.0, 1.0]])
    k = np.zeros((3, 3))
    for e in range(2):
        k[e:e + 2, e:e + 2] += ke
    return k


def test_1d_two_element_chain_matches_stencil():
    h = 0.5
    k = assemble_1d_chain(h)
    expected = (1.0 / h) * np.array([[1, -1, 0], [-1, 2, -1], [0, -1, 1]], dtype=float)
    np.testing.assert_allclose(k, expected, atol=1e-14)


def test_element_stiffness_properties():
    ke = element_stiffness(0.25)
    # symmetric, rows sum to zero (constants cost nothing), PSD
    np.testing.assert_allclose(ke, ke.T, atol=1e-14)
    np.testing.assert_allclose(ke @ np.ones(8), np.zeros(8), atol=1e-14)
    eigs = np.linalg.eigvalsh(ke)
    assert eigs[0] > -1e-14
    # known closed form for the trilinear cube: diagonal = h/3
    np.testing.assert_allclose(np.diag(ke), 0.25 / 3.0, atol=1e-14)
    # scales linearly with h and conductivity
    np.testing.assert_allclose(element_stiffness(0.5, 2.0), 4.0 * ke, atol=1e-14)


@pytest.mark.parametrize("qubits", [6, 9])
def test_raw_stiffness_annihilates_constants(qubits):
    spec = GridSpec(qubits)
    k0 = raw_stiffness(spec)
    ones = np.ones(spec.size)
    bound = 1e-10 * np.abs(k0.data).max()
    assert np.abs(k0 @ ones).max() <= bound
    # symmetry of the raw matrix
    assert abs(k0 - k0.T).max() <= 1e-12 * np.abs(k0.data).max()


def test_assemble_requires_dirichlet():
    spec = GridSpec(6)
    bc = BoundarySpec(dirichlet=(), neumann=(NeumannPatch("y-", "full", 1.0),))
    with pytest.raises(ValueError, match="Dirichlet"):
        assemble(spec, bc)


def test_boundary_spec_validation():
    with pytest.raises(ValueError, match="both Dirichlet and Neumann"):
        BoundarySpec(dirichlet=(DirichletFace("z-", 0.0),),
                     neumann=(NeumannPatch("z-", "full", 1.0),))
    with pytest.raises(ValueError, match="region"):
        BoundarySpec(dirichlet=(), neumann=(NeumannPatch("z-", "top", 1.0),))
    with pytest.raises(ValueError, match="unknown face"):
        BoundarySpec(dirichlet=(DirichletFace("w-", 0.0),), neumann=())


def test_face_nodes_layout():
    nodes = face_nodes("y-", 4)
    assert nodes.shape == (4, 4)
    # [t2][t1] with t1 = x, t2 = z on the y faces
    assert nodes[0, 0] == 0
    assert nodes[0, 3] == 3               # x = 3, y = 0, z = 0
    assert nodes[2, 1] == 2 * 16 + 0 + 1  # x = 1, y = 0, z = 2


def test_default_solution_properties(system6):
    k, f, u = system6.matrix, system6.load, system6.u_ref
    assert np.linalg.norm(k @ u - f) / np.linalg.norm(f) <= 1e-10
    assert system6.e_ref == pytest.approx(-0.5 * f @ u, rel=1e-12)
    # symmetric after imposition
    assert abs(k - k.T).max() <= 1e-12 * system6.matrix_scale
    # Dirichlet values are reproduced exactly on both fixed faces
    n_ax = system6.spec.nodes_per_axis
    np.testing.assert_allclose(u[face_nodes("z-", n_ax).ravel()], 0.0, atol=1e-12)
    np.testing.assert_allclose(u[face_nodes("z+", n_ax).ravel()], 1.0, atol=1e-10)


def test_pure_dirichlet_solution_is_linear_in_z():
    # without flux the exact solution is the linear interpolant between the
    # two fixed faces, which the trilinear space represents exactly
    spec = GridSpec(6)
    bc = BoundarySpec(dirichlet=(DirichletFace("z-", 0.0), DirichletFace("z+", 1.0)),
                      neumann=())
    system = assemble(spec, bc)
    u = solve_classical(system)
    n_ax = spec.nodes_per_axis
    expected = np.repeat(np.arange(n_ax) / (n_ax - 1), n_ax * n_ax)
    np.testing.assert_allclose(u, expected, atol=1e-10)


def test_solve_consistency_with_manufactured_load(system6):
    rng = np.random.default_rng(3)
    v = rng.standard_normal(system6.spec.size)
    manufactured = GridSystem(spec=system6.spec, bc=system6.bc,
                              matrix=system6.matrix, load=system6.matrix @ v)
    u = solve_classical(manufactured)
    assert np.linalg.norm(u - v) / np.linalg.norm(v) <= 1e-9


def test_solve_rejects_indefinite_matrix(system6):
    import scipy.sparse as sp
    bad = GridSystem(spec=system6.spec, bc=system6.bc,
                     matrix=(-sp.identity(64, format="csr")),
                     load=np.ones(64))
    with pytest.raises(NotPositiveDefiniteError) as err:
        solve_classical(bad)
    assert err.value.pivot_index == 0


def test_half_neumann_region_is_smaller_than_full():
    spec = GridSpec(6)
    full = assemble(spec, BoundarySpec(
        dirichlet=(DirichletFace("z-", 0.0),),
        neumann=(NeumannPatch("y+", "full", 1.0),)))
    half = assemble(spec, BoundarySpec(
        dirichlet=(DirichletFace("z-", 0.0),),
        neumann=(NeumannPatch("y+", "half", 1.0),)))
    assert 0 < half.load.sum() < full.load.sum()
    # half region only touches nodes with x below the midpoint
    n_ax = spec.nodes_per_axis
    nodes = face_nodes("y+", n_ax)
    loaded_cols = [i for i in range(n_ax) if half.load[nodes[:, i]].any()]
    assert max(loaded_cols) < n_ax // 2


def test_prolong_single_cell_expansion():
    spec = GridSpec(6)
    e0 = np.zeros(64)
    e0[0] = 1.0
    fine = prolong(e0, spec)
    assert len(fine) == 512
    n_f = 8
    expected_idx = [(z * n_f + y) * n_f + x for z in (0, 1) for y in (0, 1) for x in (0, 1)]
    np.testing.assert_allclose(fine[expected_idx], 1.0 / np.sqrt(8.0))
    mask = np.ones(512, bool)
    mask[expected_idx] = False
    assert not fine[mask].any()


def test_prolong_is_isometry():
    spec = GridSpec(6)
    rng = np.random.default_rng(11)
    for _ in range(100):
        v = rng.standard_normal(64) + 1j * rng.standard_normal(64)
        assert np.linalg.norm(prolong(v, spec)) == pytest.approx(np.linalg.norm(v))


def test_prolong_twice_is_4x4x4_expansion():
    spec = GridSpec(6)
    rng = np.random.default_rng(12)
    v = rng.standard_normal(64)
    twice = prolong(prolong(v, spec), GridSpec(9))
    w = v.reshape(4, 4, 4)
    for axis in range(3):
        w = np.repeat(w, 4, axis=axis)
    np.testing.assert_allclose(twice, w.ravel() / 8.0, atol=1e-14)


def test_prolong_rejects_wrong_length():
    with pytest.raises(ValueError, match="expected length"):
        prolong(np.ones(60), GridSpec(6))


def test_matrix_market_round_trip(tmp_path, system6):
    export_matrix_market(system6, tmp_path / "k.mtx", tmp_path / "f.mtx")
    k_back = scipy.io.mmread(tmp_path / "k.mtx").tocsr()
    f_back = np.asarray(scipy.io.mmread(tmp_path / "f.mtx")).ravel()
    assert abs(system6.matrix - k_back).max() <= 1e-15 * system6.matrix_scale
    np.testing.assert_allclose(f_back, system6.load, atol=1e-15)


def test_problem_from_config_defaults():
    system = problem_from_config({"qubits": 6})
    assert system.bc == default_boundary()
    explicit = problem_from_config({
        "qubits": 6, "conductivity": 2.0,
        "dirichlet": [{"face": "z-", "value": 0.0}, {"face": "z+", "value": 1.0}],
        "neumann": [{"face": "y-", "flux": 1.0}],
    })
    assert explicit.conductivity == 2.0
    assert len(explicit.bc.neumann) == 1


def test_problem_from_config_rejects_bad_qubits():
    with pytest.raises(ValueError, match="divisible by 3"):
        problem_from_config({"qubits": 7})
    with pytest.raises(ValueError, match="qubits"):
        problem_from_config({})


def test_conductivity_scales_stiffness():
    spec = GridSpec(6)
    k1 = raw_stiffness(spec, 1.0)
    k3 = raw_stiffness(spec, 3.0)
    assert abs(k3 - 3.0 * k1).max() <= 1e-12
