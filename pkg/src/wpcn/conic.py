"""Real-valued conic program container and the solver contract.

A :class:`ConicProblem` is the standard embedding

    maximize    objective @ x  (+ obj_offset)
    subject to  offsets - A @ x  in  K_1 x ... x K_m

with nonnegative, zero (equality), second-order, rotated second-order and
PSD-triangle cones.  Complex quantities enter through the usual real
embeddings (helpers below); the PSD cone uses the scaled svec convention
(off-diagonal entries times sqrt(2), column-major upper triangle).

``solve`` hands the problem to Clarabel's interior-point solver; rotated
second-order cones are lowered to plain second-order cones by a unitary row
recombination first.  The rest of the package only talks to this contract.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

import clarabel

__all__ = [
    "Cone",
    "ConicProblem",
    "ConicSolution",
    "ProblemBuilder",
    "solve",
    "embed_complex_matrix",
    "embed_complex_vector",
    "embed_hermitian_quadratic",
    "psd_factor",
    "hermitian_basis",
    "svec",
]


@dataclass(frozen=True)
class Cone:
    """One cone block: rows for vector cones, matrix side for 'psd'."""

    kind: str  # "zero" | "nonneg" | "soc" | "rsoc" | "psd"
    dim: int

    def rows(self) -> int:
        if self.kind == "psd":
            return self.dim * (self.dim + 1) // 2
        return self.dim


@dataclass
class ConicProblem:
    num_vars: int
    objective: np.ndarray
    cones: list[Cone]
    A: sparse.csc_matrix
    offsets: np.ndarray
    var_map: dict[str, slice]
    obj_offset: float = 0.0

    def validate(self) -> None:
        rows = sum(c.rows() for c in self.cones)
        if self.A.shape != (rows, self.num_vars):
            raise ValueError("cone dimensions do not match the constraint matrix")
        if self.offsets.shape != (rows,):
            raise ValueError("offset vector has the wrong length")


@dataclass
class ConicSolution:
    status: str  # "Optimal" | "Infeasible" | "NumericalLimit"
    x: np.ndarray
    objective_value: float
    kkt_residuals: dict[str, float] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# complex -> real embeddings
# ---------------------------------------------------------------------------

def embed_complex_vector(v: np.ndarray) -> np.ndarray:
    """[Re v; Im v]; preserves norms and Re{v^H s} = embed(v) @ embed(s)."""
    return np.concatenate([v.real, v.imag])


def embed_complex_matrix(W: np.ndarray) -> np.ndarray:
    """Real action of a complex matrix on embedded vectors (norm preserving)."""
    return np.block([[W.real, -W.imag], [W.imag, W.real]])


def psd_factor(C: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """Square root of a Hermitian PSD matrix with tiny eigenvalues clipped."""
    lam, U = np.linalg.eigh(0.5 * (C + C.conj().T))
    lam = np.clip(lam, tol, None)
    return (U * np.sqrt(lam)) @ U.conj().T


def embed_hermitian_quadratic(core: np.ndarray, streams: int) -> np.ndarray:
    """Real factor Wr with ||Wr s_r||^2 = s^H (I_streams (x) core) s.

    ``s = vec(X)`` for an ``core.shape[0] x streams`` factor ``X``; the
    quadratic equals ``tr(X^H core X)``.
    """
    W = np.kron(np.eye(streams), psd_factor(core))
    return embed_complex_matrix(W)


def hermitian_basis(m: int) -> list[np.ndarray]:
    """Real-parameter basis of Hermitian matrices: diagonals, then Re/Im pairs."""
    basis = []
    for i in range(m):
        E = np.zeros((m, m), dtype=complex)
        E[i, i] = 1.0
        basis.append(E)
    for i in range(m):
        for j in range(i + 1, m):
            E = np.zeros((m, m), dtype=complex)
            E[i, j] = E[j, i] = 1.0
            basis.append(E)
            E = np.zeros((m, m), dtype=complex)
            E[i, j] = 1j
            E[j, i] = -1j
            basis.append(E)
    return basis


def svec(S: np.ndarray) -> np.ndarray:
    """Scaled upper-triangle vectorization of a real symmetric matrix."""
    m = S.shape[0]
    out = np.empty(m * (m + 1) // 2)
    idx = 0
    for j in range(m):
        for i in range(j + 1):
            out[idx] = S[i, j] * (1.0 if i == j else np.sqrt(2.0))
            idx += 1
    return out


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

class ProblemBuilder:
    """Accumulates variables and cone blocks, then assembles a ConicProblem."""

    def __init__(self):
        self._nvars = 0
        self.var_map: dict[str, slice] = {}
        self._blocks: list[tuple[Cone, list, np.ndarray]] = []
        self.objective_terms: list[tuple[slice, np.ndarray]] = []
        self.obj_offset = 0.0

    def add_var(self, name: str, dim: int) -> slice:
        sl = slice(self._nvars, self._nvars + dim)
        self.var_map[name] = sl
        self._nvars += dim
        return sl

    def set_objective(self, name: str, coeffs) -> None:
        sl = self.var_map[name]
        arr = np.atleast_1d(np.asarray(coeffs, dtype=float))
        if arr.size == 1 and (sl.stop - sl.start) > 1:
            arr = np.full(sl.stop - sl.start, arr[0])
        self.objective_terms.append((sl, arr))

    def add_block(self, kind: str, dim: int, entries, b) -> None:
        """One cone block.  ``entries`` is a list of (cols, matrix) pairs
        whose matrices stack horizontally into the block's A rows; ``b`` is
        the offset vector (``b - A x`` lands in the cone)."""
        self._blocks.append((Cone(kind, dim), entries, np.atleast_1d(np.asarray(b, float))))

    # -- convenience wrappers ------------------------------------------------

    def add_upper_bound(self, entries, rhs: float) -> None:
        """sum(coeffs @ x[cols]) <= rhs; entries are (cols, coeffs) pairs."""
        self.add_block("nonneg", 1,
                       [(cols, np.atleast_2d(np.asarray(c, float))) for cols, c in entries],
                       [rhs])

    def add_equality(self, entries, rhs: float) -> None:
        self.add_block("zero", 1,
                       [(cols, np.atleast_2d(np.asarray(c, float))) for cols, c in entries],
                       [rhs])

    def add_quad_le_affine(self, w_entries, w_rows: int, u_entries, u_offset: float) -> None:
        """||w||^2 <= u as a rotated second-order cone (v fixed to 1/2).

        ``w_entries``: list of (cols, matrix) pairs stacking vertically into
        ``w = sum matrix @ x[cols]``; ``u_entries``: list of (cols, coeffs)
        pairs with ``u = u_offset + sum coeffs @ x[cols]``.
        """
        entries = []
        b = np.zeros(2 + w_rows)
        b[0] = u_offset
        b[1] = 0.5
        for cols, coeffs in u_entries:
            coeffs = np.atleast_1d(np.asarray(coeffs, float))
            m = np.zeros((2 + w_rows, coeffs.size))
            m[0, :] = -coeffs
            entries.append((cols, m))
        row0 = 2
        for cols, mat in w_entries:
            mat = np.atleast_2d(np.asarray(mat, float))
            m = np.zeros((2 + w_rows, mat.shape[1]))
            m[row0:row0 + mat.shape[0], :] = -mat
            entries.append((cols, m))
            row0 += mat.shape[0]
        if row0 != 2 + w_rows:
            raise ValueError("w row count mismatch")
        self.add_block("rsoc", 2 + w_rows, entries, b)

    def build(self) -> ConicProblem:
        obj = np.zeros(self._nvars)
        for sl, arr in self.objective_terms:
            obj[sl] += arr
        rows = sum(c.rows() for c, _, _ in self._blocks)
        data, ri, ci = [], [], []
        b = np.zeros(rows)
        cones = []
        r0 = 0
        for cone, entries, bvec in self._blocks:
            nr = cone.rows()
            if bvec.size != nr:
                raise ValueError(f"offset size mismatch in {cone.kind} block")
            b[r0:r0 + nr] = bvec
            for cols, mat in entries:
                mat = np.atleast_2d(np.asarray(mat, float))
                if isinstance(cols, slice):
                    col_idx = np.arange(cols.start, cols.stop)
                else:
                    col_idx = np.asarray(cols, dtype=int)
                rr, cc = np.nonzero(mat)
                data.append(mat[rr, cc])
                ri.append(rr + r0)
                ci.append(col_idx[cc])
            cones.append(cone)
            r0 += nr
        A = sparse.csc_matrix(
            (np.concatenate(data) if data else [],
             (np.concatenate(ri) if ri else [], np.concatenate(ci) if ci else [])),
            shape=(rows, self._nvars))
        prob = ConicProblem(num_vars=self._nvars, objective=obj, cones=cones,
                            A=A, offsets=b, var_map=dict(self.var_map),
                            obj_offset=self.obj_offset)
        prob.validate()
        return prob


# ---------------------------------------------------------------------------
# backend
# ---------------------------------------------------------------------------

_RSOC_T = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)


def _lower_rsoc(problem: ConicProblem) -> tuple[sparse.csc_matrix, np.ndarray, list]:
    """Rewrite rotated-SOC row blocks as plain SOC via (u, v) recombination."""
    A = problem.A.tolil(copy=True)
    b = problem.offsets.copy()
    cones = []
    r0 = 0
    for cone in problem.cones:
        nr = cone.rows()
        if cone.kind == "rsoc":
            top = A[r0:r0 + 2, :].toarray()
            A[r0:r0 + 2, :] = _RSOC_T @ top
            b[r0:r0 + 2] = _RSOC_T @ b[r0:r0 + 2]
            cones.append(clarabel.SecondOrderConeT(nr))
        elif cone.kind == "soc":
            cones.append(clarabel.SecondOrderConeT(nr))
        elif cone.kind == "nonneg":
            cones.append(clarabel.NonnegativeConeT(nr))
        elif cone.kind == "zero":
            cones.append(clarabel.ZeroConeT(nr))
        elif cone.kind == "psd":
            cones.append(clarabel.PSDTriangleConeT(cone.dim))
        else:
            raise ValueError(f"unknown cone kind {cone.kind!r}")
        r0 += nr
    return A.tocsc(), b, cones


def solve(problem: ConicProblem, tol: float = 1e-8,
          max_iter: int = 200) -> ConicSolution:
    """Solve a ConicProblem; deterministic for identical input."""
    A, b, cones = _lower_rsoc(problem)
    P = sparse.csc_matrix((problem.num_vars, problem.num_vars))
    q = -problem.objective  # clarabel minimizes
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = max_iter
    settings.tol_feas = tol
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    solver = clarabel.DefaultSolver(P, q, A, b, cones, settings)
    sol = solver.solve()

    status = str(sol.status)
    x = np.asarray(sol.x)
    if status in ("Solved", "AlmostSolved"):
        mapped = "Optimal"
    elif status in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        mapped = "Infeasible"
    else:
        mapped = "NumericalLimit"
    gap = abs(sol.obj_val - sol.obj_val_dual)
    return ConicSolution(
        status=mapped,
        x=x,
        objective_value=float(-sol.obj_val + problem.obj_offset),
        kkt_residuals={"primal": float(sol.r_prim), "dual": float(sol.r_dual),
                       "gap": float(gap)},
    )


def dump_problem(problem: ConicProblem, path) -> None:
    """Sparse text dump (cone table + COO triplets) for external cross-checks."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"vars {problem.num_vars}\n")
        for i, c in enumerate(problem.cones):
            fh.write(f"cone {i} {c.kind} {c.dim}\n")
        fh.write("objective " + " ".join(f"{v:.17g}" for v in problem.objective) + "\n")
        fh.write("offsets " + " ".join(f"{v:.17g}" for v in problem.offsets) + "\n")
        coo = problem.A.tocoo()
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {v:.17g}\n")
