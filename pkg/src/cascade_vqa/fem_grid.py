"""Stiffness system for the stationary heat equation on a structured cube grid.

The domain is the unit cube meshed with 8-node trilinear hexahedral elements,
N nodes per axis with N = 2^(n/3), so the N^3 nodes map one-to-one onto the
2^n basis states of an n-qubit register.  Node (x, y, z) has linear index
z*N^2 + y*N + x: x varies fastest, matching the ket bit layout used by the
circuit side of the package (qubit 0 is the least significant bit of x).

Boundary conditions are fixed temperatures on whole faces (Dirichlet, applied
by symmetric elimination that keeps the full 2^n dimension) and uniform heat
flux on whole or half faces (Neumann, integrated into the load vector).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg

FACES = ("x-", "x+", "y-", "y+", "z-", "z+")
_AXIS_OF = {"x": 0, "y": 1, "z": 2}


class NotPositiveDefiniteError(ValueError):
    """Stiffness matrix failed the Cholesky SPD check."""

    def __init__(self, pivot_index: int):
        self.pivot_index = pivot_index
        super().__init__(
            f"matrix is not positive definite: pivot {pivot_index} is the "
            f"first non-positive one (is the Dirichlet set empty?)"
        )


@dataclass(frozen=True)
class GridSpec:
    """Cube grid sized so the node count equals a qubit register dimension."""

    qubits: int

    def __post_init__(self):
        if self.qubits % 3 != 0:
            raise ValueError(f"qubits must be divisible by 3, got {self.qubits}")
        if self.qubits < 6:
            raise ValueError(f"qubits must be at least 6, got {self.qubits}")

    @property
    def nodes_per_axis(self) -> int:
        return 1 << (self.qubits // 3)

    @property
    def spacing(self) -> float:
        return 1.0 / (self.nodes_per_axis - 1)

    @property
    def size(self) -> int:
        return 1 << self.qubits


@dataclass(frozen=True)
class DirichletFace:
    face: str
    value: float


@dataclass(frozen=True)
class NeumannPatch:
    face: str
    region: str  # "full" or "half"
    flux: float


@dataclass(frozen=True)
class BoundarySpec:
    dirichlet: tuple[DirichletFace, ...]
    neumann: tuple[NeumannPatch, ...]

    def __post_init__(self):
        for d in self.dirichlet:
            if d.face not in FACES:
                raise ValueError(f"unknown face {d.face!r}, expected one of {FACES}")
        for p in self.neumann:
            if p.face not in FACES:
                raise ValueError(f"unknown face {p.face!r}, expected one of {FACES}")
            if p.region not in ("full", "half"):
                raise ValueError(f"region must be 'full' or 'half', got {p.region!r}")
        dir_faces = {d.face for d in self.dirichlet}
        if len(dir_faces) != len(self.dirichlet):
            raise ValueError("duplicate Dirichlet face")
        overlap = dir_faces & {p.face for p in self.neumann}
        if overlap:
            raise ValueError(f"faces {sorted(overlap)} are both Dirichlet and Neumann")


def default_boundary() -> BoundarySpec:
    """Temperature fixed on the two z faces, flux on y- and half of y+."""
    return BoundarySpec(
        dirichlet=(DirichletFace("z-", 0.0), DirichletFace("z+", 1.0)),
        neumann=(NeumannPatch("y-", "full", 1.0), NeumannPatch("y+", "half", 1.0)),
    )


@dataclass
class GridSystem:
    """Assembled stiffness system, plus the classical reference solution."""

    spec: GridSpec
    bc: BoundarySpec
    matrix: sp.csr_matrix          # K, after Dirichlet imposition (SPD)
    load: np.ndarray               # f, with flux and Dirichlet terms folded in
    conductivity: float = 1.0
    u_ref: np.ndarray | None = None
    e_ref: float | None = None     # -1/2 f.u_ref, filled by solve_classical

    @property
    def matrix_scale(self) -> float:
        """Magnitude reference for degenerate-denominator checks."""
        return float(np.abs(self.matrix.diagonal()).max())


@lru_cache(maxsize=None)
def _unit_element_stiffness() -> np.ndarray:
    """8x8 stiffness of the trilinear hex on the unit cube, unit conductivity.

    Local node a = (ax, ay, az) in {0,1}^3 is numbered az*4 + ay*2 + ax.
    2-point Gauss per axis integrates the trilinear gradients exactly.
    """
    gp = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
    corners = [(ax, ay, az) for az in (0, 1) for ay in (0, 1) for ax in (0, 1)]

    def shape1d(c, t):
        return t if c else 1.0 - t

    def dshape1d(c):
        return 1.0 if c else -1.0

    ke = np.zeros((8, 8))
    for gx in gp:
        for gy in gp:
            for gz in gp:
                grads = np.empty((8, 3))
                for a, (ax, ay, az) in enumerate(corners):
                    nx, ny, nz = shape1d(ax, gx), shape1d(ay, gy), shape1d(az, gz)
                    grads[a] = (dshape1d(ax) * ny * nz,
                                nx * dshape1d(ay) * nz,
                                nx * ny * dshape1d(az))
                ke += 0.125 * grads @ grads.T  # weight (1/2)^3
    return ke


def element_stiffness(h: float, conductivity: float = 1.0) -> np.ndarray:
    """Stiffness of one hexahedral element with edge length h."""
    # gradients scale with 1/h, volume with h^3
    return conductivity * h * _unit_element_stiffness()


def raw_stiffness(spec: GridSpec, conductivity: float = 1.0) -> sp.csr_matrix:
    """Pre-boundary-condition stiffness matrix (singular: annihilates constants)."""
    n_ax = spec.nodes_per_axis
    ke = element_stiffness(spec.spacing, conductivity)

    ex, ey, ez = np.meshgrid(np.arange(n_ax - 1), np.arange(n_ax - 1),
                             np.arange(n_ax - 1), indexing="ij")
    base = (ez.ravel() * n_ax + ey.ravel()) * n_ax + ex.ravel()
    corner_off = np.array([(dz * n_ax + dy) * n_ax + dx
                           for dz in (0, 1) for dy in (0, 1) for dx in (0, 1)])
    elem_nodes = base[:, None] + corner_off[None, :]  # (nelem, 8)

    rows = np.repeat(elem_nodes, 8, axis=1).ravel()
    cols = np.tile(elem_nodes, (1, 8)).ravel()
    vals = np.tile(ke.ravel(), elem_nodes.shape[0])
    k0 = sp.coo_matrix((vals, (rows, cols)), shape=(spec.size, spec.size))
    return k0.tocsr()


def face_nodes(face: str, n_ax: int) -> np.ndarray:
    """Linear node indices of a face as an (n_ax, n_ax) grid.

    Entry [t2][t1] follows the face's tangential axes in (x, y, z) order,
    e.g. for the y faces t1 runs along x and t2 along z.
    """
    axis = _AXIS_OF[face[0]]
    side = 0 if face[1] == "-" else n_ax - 1
    t = np.arange(n_ax)
    t1, t2 = np.meshgrid(t, t, indexing="xy")  # t1 varies along columns
    coords = [None, None, None]
    coords[axis] = np.full_like(t1, side)
    tang = [a for a in range(3) if a != axis]
    coords[tang[0]], coords[tang[1]] = t1, t2
    x, y, z = coords
    return (z * n_ax + y) * n_ax + x


def _neumann_load(patch: NeumannPatch, spec: GridSpec) -> np.ndarray:
    """Flux integrated against the bilinear face shape functions."""
    n_ax = spec.nodes_per_axis
    h = spec.spacing
    nodes = face_nodes(patch.face, n_ax)
    f = np.zeros(spec.size)
    quad = patch.flux * h * h / 4.0  # each corner of each face cell
    n_cells = n_ax - 1
    # half region: face cells whose nodes all lie below the axis midpoint
    # along the first tangential axis (node coordinate < n_ax/2)
    t1_stop = n_cells if patch.region == "full" else n_ax // 2 - 1
    for i2 in range(n_cells):
        for i1 in range(t1_stop):
            for d2 in (0, 1):
                for d1 in (0, 1):
                    f[nodes[i2 + d2, i1 + d1]] += quad
    return f


def assemble(spec: GridSpec, bc: BoundarySpec, conductivity: float = 1.0) -> GridSystem:
    """Assemble K and f and impose the boundary conditions.

    Dirichlet rows/columns are eliminated symmetrically while keeping the
    2^n dimension: known values are folded into f, the eliminated diagonal is
    set to the mean pre-elimination diagonal so conditioning stays sane, and
    f at those nodes is chosen so the solve reproduces the fixed values.
    """
    if not bc.dirichlet:
        raise ValueError("at least one Dirichlet face is required (singular system)")
    k0 = raw_stiffness(spec, conductivity)
    n_ax = spec.nodes_per_axis

    f = np.zeros(spec.size)
    for patch in bc.neumann:
        f += _neumann_load(patch, spec)

    fixed = np.full(spec.size, np.nan)
    for d in bc.dirichlet:
        idx = face_nodes(d.face, n_ax).ravel()
        clash = ~np.isnan(fixed[idx]) & (fixed[idx] != d.value)
        if clash.any():
            raise ValueError(f"conflicting Dirichlet values on face {d.face}")
        fixed[idx] = d.value
    mask = ~np.isnan(fixed)
    g = np.where(mask, fixed, 0.0)

    d_ref = float(element_stiffness(spec.spacing, conductivity)[0, 0])
    keep = (~mask).astype(float)
    f = keep * (f - k0 @ g) + d_ref * g
    dk = sp.diags(keep)
    k = (dk @ k0 @ dk + sp.diags(d_ref * mask.astype(float))).tocsr()
    k.sum_duplicates()
    return GridSystem(spec=spec, bc=bc, matrix=k, load=f, conductivity=conductivity)


def solve_classical(system: GridSystem) -> np.ndarray:
    """Reference solution of K u = f; dense Cholesky up to 12 qubits, CG above.

    Stores u_ref and the reference energy -1/2 f.u on the system and returns u.
    Raises NotPositiveDefiniteError with the first failing pivot if K is not SPD.
    """
    k, f = system.matrix, system.load
    if system.spec.qubits <= 12:
        try:
            cho = scipy.linalg.cho_factor(k.toarray(), lower=True, check_finite=False)
        except scipy.linalg.LinAlgError as exc:
            # message format: "N-th leading minor of the array is not positive definite"
            first = str(exc).split("-")[0]
            raise NotPositiveDefiniteError(int(first) - 1 if first.isdigit() else -1) from exc
        u = scipy.linalg.cho_solve(cho, f, check_finite=False)
    else:
        diag = k.diagonal()
        if (diag <= 0).any():
            raise NotPositiveDefiniteError(int(np.argmax(diag <= 0)))
        precond = sp.diags(1.0 / diag)
        u, info = scipy.sparse.linalg.cg(k, f, rtol=1e-12, atol=0.0, M=precond,
                                         maxiter=20 * system.spec.nodes_per_axis ** 2)
        if info != 0:
            raise RuntimeError(f"CG did not converge (info={info})")

    residual = np.linalg.norm(k @ u - f) / np.linalg.norm(f)
    if residual > 1e-10:
        raise RuntimeError(f"classical solve residual {residual:.3e} exceeds 1e-10")
    system.u_ref = u
    system.e_ref = -0.5 * float(f @ u)
    return u


def prolong(coarse: np.ndarray, spec: GridSpec) -> np.ndarray:
    """Embed a coarse grid vector into the next finer grid (one level up).

    Every coarse node value is copied to its 2x2x2 block of fine nodes and
    scaled by 1/sqrt(8), so the map is an isometry and a normalized state
    stays normalized.
    """
    if len(coarse) != spec.size:
        raise ValueError(f"expected length {spec.size} for {spec.qubits} qubits, "
                         f"got {len(coarse)}")
    n_ax = spec.nodes_per_axis
    w = np.asarray(coarse).reshape(n_ax, n_ax, n_ax)  # [z][y][x]
    for axis in range(3):
        w = np.repeat(w, 2, axis=axis)
    return (w / np.sqrt(8.0)).ravel()


def export_matrix_market(system: GridSystem, matrix_path, load_path=None) -> None:
    """Write K (and optionally f) in Matrix Market text format."""
    scipy.io.mmwrite(matrix_path, system.matrix.tocoo(), symmetry="symmetric")
    if load_path is not None:
        scipy.io.mmwrite(load_path, system.load.reshape(-1, 1))


def boundary_from_config(cfg: dict) -> BoundarySpec:
    dirichlet = tuple(DirichletFace(d["face"], float(d["value"]))
                      for d in cfg.get("dirichlet", []))
    neumann = tuple(NeumannPatch(p["face"], p.get("region", "full"), float(p["flux"]))
                    for p in cfg.get("neumann", []))
    return BoundarySpec(dirichlet=dirichlet, neumann=neumann)


def problem_from_config(cfg: dict) -> GridSystem:
    """Build a GridSystem from a problem config dict.

    Keys: qubits (required); dirichlet / neumann (lists, default boundary if
    both absent); conductivity (default 1.0).
    """
    if "qubits" not in cfg:
        raise ValueError("problem config requires 'qubits'")
    qubits = cfg["qubits"]
    if not isinstance(qubits, int) or qubits % 3 != 0:
        raise ValueError("qubits must be divisible by 3")
    spec = GridSpec(qubits)
    if "dirichlet" in cfg or "neumann" in cfg:
        bc = boundary_from_config(cfg)
    else:
        bc = default_boundary()
    return assemble(spec, bc, conductivity=float(cfg.get("conductivity", 1.0)))


def load_problem(path) -> GridSystem:
    with open(path) as fh:
        return problem_from_config(json.load(fh))
