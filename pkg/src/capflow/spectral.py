"""P1 finite elements for Q_{p,q}(u) = int |grad u|^2 - p u^2 - int_boundary q u^2.

Robin, Dirichlet and Steklov (Dirichlet-to-Robin) spectra of the form,
with the Dirichlet kernel deflated out of the boundary problem, and the
index bookkeeping that ties them together.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .config import DEFAULT, Tolerances
from .errors import DomainError, NumericError
from .mesh import TriMesh

MODULE = "spectral_forms"


@dataclass(frozen=True)
class FormSpec:
    """Mesh plus per-vertex interior weight p and boundary weight q.

    ``q`` has one entry per mesh vertex; entries at interior vertices are
    ignored.
    """

    mesh: TriMesh
    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        n = self.mesh.n_vertices
        p = np.broadcast_to(np.asarray(self.p, float), (n,)).copy()
        q = np.broadcast_to(np.asarray(self.q, float), (n,)).copy()
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
            raise DomainError("p and q must be finite", MODULE)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    def with_weights(self, p=None, q=None) -> "FormSpec":
        return FormSpec(self.mesh, self.p if p is None else p, self.q if q is None else q)


@dataclass(frozen=True)
class AssembledForm:
    K: sp.csr_matrix
    M: sp.csr_matrix
    M_p: sp.csr_matrix
    B: sp.csr_matrix
    B_q: sp.csr_matrix
    interior: np.ndarray
    boundary: np.ndarray
    form: FormSpec

    @property
    def A(self) -> sp.csr_matrix:
        """Interior part K - M_p."""
        return (self.K - self.M_p).tocsr()

    @property
    def Q_matrix(self) -> sp.csr_matrix:
        return (self.K - self.M_p - self.B_q).tocsr()

    def Q(self, u) -> float:
        u = np.asarray(u, float)
        return float(u @ (self.Q_matrix @ u))

    def zero_tol(self, tol: Tolerances = DEFAULT) -> float:
        h = self.form.mesh.h
        if not np.isfinite(h):
            raise DomainError("mesh has no target size; pass zero_tol explicitly", MODULE)
        return tol.zero_tol_constant * h * h


_STIFF_D = np.array([[-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])


def assemble(form: FormSpec) -> AssembledForm:
    """Stiffness, consistent masses and boundary masses of the P1 space."""
    mesh = form.mesh
    if len(mesh.triangles) < 1:
        raise DomainError("mesh has no triangles", MODULE)
    n = mesh.n_vertices
    tri = mesh.triangles
    g = mesh.metrics
    det = g[:, 0, 0] * g[:, 1, 1] - g[:, 0, 1] ** 2
    if np.any(det <= 0):
        raise NumericError("degenerate triangle metric", MODULE)
    area = 0.5 * np.sqrt(det)
    ginv = np.linalg.inv(g)
    k_loc = area[:, None, None] * np.einsum("ai,tab,bj->tij", _STIFF_D, ginv, _STIFF_D)

    m_loc = area[:, None, None] * (np.ones((3, 3)) + np.eye(3))[None] / 12.0
    pv = form.p[tri]
    psum = pv.sum(1)
    mp_loc = np.empty_like(m_loc)
    for i in range(3):
        for j in range(3):
            if i == j:
                mp_loc[:, i, i] = area * (pv[:, i] / 10.0 + (psum - pv[:, i]) / 30.0)
            else:
                k = 3 - i - j
                mp_loc[:, i, j] = area * ((pv[:, i] + pv[:, j]) / 30.0 + pv[:, k] / 60.0)

    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()

    def build(local, r=rows, c=cols, size=n):
        return sp.coo_matrix((local.ravel(), (r, c)), shape=(size, size)).tocsr()

    K, M, Mp = build(k_loc), build(m_loc), build(mp_loc)

    be = mesh.boundary_edges
    if len(be):
        length = np.linalg.norm(mesh.positions[be[:, 1]] - mesh.positions[be[:, 0]], axis=1)
        b_loc = length[:, None, None] * (np.ones((2, 2)) + np.eye(2))[None] / 6.0
        qa, qb = form.q[be[:, 0]], form.q[be[:, 1]]
        bq_loc = np.empty_like(b_loc)
        bq_loc[:, 0, 0] = length * (qa / 4.0 + qb / 12.0)
        bq_loc[:, 1, 1] = length * (qb / 4.0 + qa / 12.0)
        bq_loc[:, 0, 1] = bq_loc[:, 1, 0] = length * (qa + qb) / 12.0
        br = np.repeat(be, 2, axis=1).ravel()
        bc = np.tile(be, (1, 2)).ravel()
        B, Bq = build(b_loc, br, bc), build(bq_loc, br, bc)
    else:
        B = Bq = sp.csr_matrix((n, n))
    return AssembledForm(K, M, Mp, B, Bq, mesh.interior_vertices, mesh.boundary_vertices, form)


# --------------------------------------------------------------------------
# dense generalized eigensolver


def _round_robin(n: int):
    """Pairings of 0..n-1 (n even) so every pair meets once per n-1 rounds."""
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        half = n // 2
        rounds.append((np.array(players[:half]), np.array(players[half:][::-1])))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def jacobi_eigh(C: np.ndarray, max_sweeps: int = DEFAULT.jacobi_sweeps, rtol: float = 1e-14):
    """Cyclic Jacobi for a symmetric matrix, rotating n/2 disjoint pairs at a time.

    An entry is skipped once it is negligible against its diagonal pair
    (the classical test |a_pq| <= eps sqrt|a_pp a_qq|); iteration stops when
    a sweep rotates nothing or the off-diagonal norm falls below rtol |A|.
    """
    C = np.array(C, dtype=float)
    n0 = C.shape[0]
    n = n0 + (n0 % 2)
    A = np.zeros((n, n))
    A[:n0, :n0] = 0.5 * (C + C.T)
    V = np.eye(n)
    scale = np.linalg.norm(A)
    if scale == 0.0 or n0 <= 1:
        return np.diag(A)[:n0].copy(), V[:n0, :n0]
    rounds = _round_robin(n)
    eps = np.finfo(float).eps
    for _ in range(max_sweeps):
        # direct norm: sum(A^2) - sum(diag^2) cancels once the diagonal dominates
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= rtol * scale:
            break
        rotated = False
        for P, Q in rounds:
            apq = A[P, Q]
            app, aqq = A[P, P], A[Q, Q]
            active = np.abs(apq) > np.maximum(eps * np.sqrt(np.abs(app * aqq)), 1e-300)
            if not np.any(active):
                continue
            rotated = True
            tau = np.where(active, (aqq - app) / (2.0 * np.where(active, apq, 1.0)), 0.0)
            big = np.abs(tau) > 1e150
            tau_safe = np.where(big, 1.0, tau)
            t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau_safe) + np.sqrt(1.0 + tau_safe * tau_safe))
            t = np.where(big, 0.5 / np.where(big, tau, 1.0), t)
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            colP, colQ = A[:, P].copy(), A[:, Q].copy()
            A[:, P] = c * colP - s * colQ
            A[:, Q] = s * colP + c * colQ
            rowP, rowQ = A[P, :].copy(), A[Q, :].copy()
            A[P, :] = c[:, None] * rowP - s[:, None] * rowQ
            A[Q, :] = s[:, None] * rowP + c[:, None] * rowQ
            vP, vQ = V[:, P].copy(), V[:, Q].copy()
            V[:, P] = c * vP - s * vQ
            V[:, Q] = s * vP + c * vQ
        if not rotated:
            break
    else:
        raise NumericError("Jacobi iteration did not converge", MODULE)
    keep = np.arange(n0)
    return np.diag(A)[keep].copy(), V[:n0, :][:, keep]


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def solve_gevp(A, B, count: Optional[int] = None, method: str = "auto", tol: Tolerances = DEFAULT):
    """Lowest eigenpairs of A v = lambda B v for dense symmetric A and SPD B.

    B = L L^T reduces the problem to L^-1 A L^-T; the standard problem is
    solved by cyclic Jacobi (``method="jacobi"``) or LAPACK
    (``method="lapack"``).  ``auto`` uses Jacobi up to ``tol.jacobi_max``.
    Vectors are B-orthonormal, ordered by eigenvalue then index, with their
    largest entry positive.
    """
    A = np.asarray(A.toarray() if sp.issparse(A) else A, float)
    B = np.asarray(B.toarray() if sp.issparse(B) else B, float)
    if A.shape != B.shape or A.shape[0] != A.shape[1]:
        raise DomainError("A and B must be square and of equal size", MODULE)
    n = A.shape[0]
    try:
        L = np.linalg.cholesky(0.5 * (B + B.T))
    except np.linalg.LinAlgError as exc:
        raise NumericError("B is not positive definite", MODULE) from exc
    Linv_A = sla.solve_triangular(L, 0.5 * (A + A.T), lower=True)
    C = sla.solve_triangular(L, Linv_A.T, lower=True)
    C = 0.5 * (C + C.T)
    if method == "auto":
        method = "jacobi" if n <= tol.jacobi_max else "lapack"
    if method == "jacobi":
        vals, W = jacobi_eigh(C, tol.jacobi_sweeps)
    elif method == "lapack":
        vals, W = np.linalg.eigh(C)
    else:
        raise DomainError(f"unknown method {method!r}", MODULE)
    order = np.lexsort((np.arange(n), vals))
    vals, W = vals[order], W[:, order]
    V = sla.solve_triangular(L.T, W, lower=False)
    k = n if count is None else min(count, n)
    return vals[:k], _fix_signs(V[:, :k])


def _rayleigh_ritz(A, M, V):
    Ar = V.T @ (A @ V)
    Mr = V.T @ (M @ V)
    vals, W = sla.eigh(0.5 * (Ar + Ar.T), 0.5 * (Mr + Mr.T))
    return vals, V @ W


def lowest_eigenpairs(A, M, count: int, tol: Tolerances = DEFAULT, lower_bound: Optional[float] = None):
    """Lowest ``count`` eigenpairs of a sparse pencil.

    Small pencils go to solve_gevp; large ones to shift-invert Lanczos with
    the shift placed below the spectrum, then a Rayleigh-Ritz clean-up.
    """
    n = A.shape[0]
    count = min(count, n)
    if n <= max(tol.jacobi_max, 3 * count + 10):
        return solve_gevp(A, M, count, tol=tol)
    sigma = -1.0 if lower_bound is None else lower_bound
    A = sp.csc_matrix(A)
    M = sp.csc_matrix(M)
    for _ in range(8):
        k = min(count + 4, n - 2)
        vals, vecs = spla.eigsh(A, k=k, M=M, sigma=sigma, which="LM", tol=1e-13, v0=np.ones(n))
        if np.min(vals) > sigma:
            break
        sigma = 2.0 * np.min(vals) - 1.0
    else:
        raise NumericError("could not place the shift below the spectrum", MODULE)
    vals, vecs = _rayleigh_ritz(A, M, vecs)
    order = np.lexsort((np.arange(len(vals)), vals))
    vals, vecs = vals[order][:count], vecs[:, order][:, :count]
    return vals, _fix_signs(vecs)


# --------------------------------------------------------------------------
# spectra


@dataclass
class SpectrumReport:
    kind: str
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    zero_tol: float
    counts: tuple
    mass: Optional[object] = None
    operator: Optional[object] = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        neg, zero, pos = self.counts
        return {
            "kind": self.kind,
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "counts": {"negative": int(neg), "zero": int(zero), "positive": int(pos)},
            "zero_tol": float(self.zero_tol),
        }


def _counts(vals, zero_tol):
    vals = np.asarray(vals)
    return (int(np.sum(vals < -zero_tol)), int(np.sum(np.abs(vals) <= zero_tol)), int(np.sum(vals > zero_tol)))


def _as_assembled(form) -> AssembledForm:
    return form if isinstance(form, AssembledForm) else assemble(form)


def _lower_bound(af: AssembledForm) -> float:
    pmax = max(float(np.max(af.form.p)), 0.0)
    qmax = max(float(np.max(af.form.q[af.boundary])) if len(af.boundary) else 0.0, 0.0)
    return -(pmax + 4.0 * qmax * qmax + 4.0 * qmax + 1.0)


def _enough(solver, count, zero_tol, limit):
    """Grow ``count`` until the top computed eigenvalue clears zero_tol."""
    while True:
        vals, vecs = solver(count)
        if len(vals) >= limit or vals[-1] > 2.0 * zero_tol:
            return vals, vecs
        count = min(2 * count, limit)


def robin_spectrum(form, count: int = 12, zero_tol: Optional[float] = None, tol: Tolerances = DEFAULT) -> SpectrumReport:
    """(K - M_p - B_q) v = lambda M v; at least every eigenvalue up to 2 zero_tol."""
    af = _as_assembled(form)
    zt = af.zero_tol(tol) if zero_tol is None else zero_tol
    Qm = af.Q_matrix
    lb = _lower_bound(af)
    vals, vecs = _enough(lambda k: lowest_eigenpairs(Qm, af.M, k, tol, lb), count, zt, Qm.shape[0])
    return SpectrumReport("robin", vals, vecs, zt, _counts(vals, zt), af.M, Qm)


def dirichlet_spectrum(form, count: int = 12, zero_tol: Optional[float] = None, tol: Tolerances = DEFAULT) -> SpectrumReport:
    """Interior block of (K - M_p) against M; eigenfunctions padded with zeros."""
    af = _as_assembled(form)
    zt = af.zero_tol(tol) if zero_tol is None else zero_tol
    I = af.interior
    if len(I) == 0:
        raise DomainError("mesh has no interior vertices", MODULE)
    A_II = af.A[I][:, I]
    M_II = af.M[I][:, I]
    lb = _lower_bound(af)
    vals, vecs = _enough(lambda k: lowest_eigenpairs(A_II, M_II, k, tol, lb), count, zt, len(I))
    full = np.zeros((af.form.mesh.n_vertices, vecs.shape[1]))
    full[I] = vecs
    return SpectrumReport("dirichlet", vals, full, zt, _counts(vals, zt), af.M, af.A)


def dirichlet_kernel(form, zero_tol: Optional[float] = None, tol: Tolerances = DEFAULT, spectrum: Optional[SpectrumReport] = None):
    """Basis (per-vertex, M-orthonormal) of Dirichlet eigenfunctions with |lambda| <= zero_tol."""
    spec = spectrum or dirichlet_spectrum(form, zero_tol=zero_tol, tol=tol)
    mask = np.abs(spec.eigenvalues) <= spec.zero_tol
    return spec.eigenfunctions[:, mask], spec


@dataclass
class DtRMap:
    """Boundary reduction of the form, possibly with the Dirichlet kernel deflated.

    ``S`` is the Schur complement on boundary dofs, ``basis`` an orthonormal
    basis of the admissible traces (orthogonal to the discrete normal traces
    of the kernel), ``extension`` maps traces to interior values.
    """

    S: np.ndarray
    basis: np.ndarray
    extension: np.ndarray
    kernel: np.ndarray
    normal_traces: np.ndarray


def dtr_map(form, zero_tol: Optional[float] = None, tol: Tolerances = DEFAULT, dirichlet: Optional[SpectrumReport] = None) -> DtRMap:
    af = _as_assembled(form)
    I, G = af.interior, af.boundary
    if len(G) == 0:
        raise DomainError("Steklov problem needs a boundary", MODULE)
    A = af.A
    A_II = A[I][:, I].tocsc()
    A_IG = A[I][:, G].toarray()
    A_GG = A[G][:, G].toarray()
    kernel, _ = dirichlet_kernel(af, zero_tol, tol, dirichlet)
    W = kernel[I]
    k = W.shape[1]
    if k:
        MW = af.M[I][:, I] @ W
        bordered = sp.bmat([[A_II, sp.csc_matrix(MW)], [sp.csc_matrix(MW.T), None]], format="csc")
        rhs = np.vstack([-A_IG, np.zeros((k, len(G)))])
    else:
        bordered, rhs = A_II, -A_IG
    try:
        lu = spla.splu(sp.csc_matrix(bordered))
        sol = lu.solve(rhs)
    except RuntimeError as exc:
        raise NumericError(f"interior solve failed after deflating a kernel of dimension {k}", MODULE) from exc
    if not np.all(np.isfinite(sol)):
        raise NumericError(f"interior solve singular (kernel dimension {k})", MODULE)
    U = sol[: len(I)]
    S = A_GG + A_IG.T @ U
    S = 0.5 * (S + S.T)
    traces = A_IG.T @ W if k else np.zeros((len(G), 0))
    basis = sla.null_space(traces.T) if k else np.eye(len(G))
    return DtRMap(S, basis, U, kernel, traces)


def steklov_spectrum(form, count: Optional[int] = None, zero_tol: Optional[float] = None, tol: Tolerances = DEFAULT, dirichlet: Optional[SpectrumReport] = None) -> SpectrumReport:
    """(S - B_q) f = lambda B f on the boundary, deflated by the Dirichlet kernel.

    Eigenfunctions are stored as full per-vertex vectors: the trace on the
    boundary and its (Delta + p)-harmonic extension inside.
    """
    af = _as_assembled(form)
    zt = af.zero_tol(tol) if zero_tol is None else zero_tol
    dtr = dtr_map(af, zt, tol, dirichlet)
    G, I = af.boundary, af.interior
    B_GG = af.B[G][:, G].toarray()
    Bq_GG = af.B_q[G][:, G].toarray()
    P = dtr.basis
    vals, C = solve_gevp(P.T @ (dtr.S - Bq_GG) @ P, P.T @ B_GG @ P, count, tol=tol)
    traces = P @ C
    full = np.zeros((af.form.mesh.n_vertices, traces.shape[1]))
    full[G] = traces
    full[I] = dtr.extension @ traces
    rep = SpectrumReport("steklov", vals, full, zt, _counts(vals, zt), af.B, dtr.S - Bq_GG)
    rep.extra.update({"kernel_dim": dtr.kernel.shape[1], "dtr": dtr})
    return rep


@dataclass
class IndexReport:
    a: int
    b: int
    ind: int
    ind_robin: int
    nullity: int
    agreement: bool
    zero_tol: float
    warnings: list
    robin: SpectrumReport
    dirichlet: SpectrumReport
    steklov: Optional[SpectrumReport]
    closed: bool = False

    def summary(self) -> dict:
        out = {
            "a": self.a,
            "b": self.b,
            "ind": self.ind,
            "ind_robin": self.ind_robin,
            "nullity": self.nullity,
            "agreement": self.agreement,
            "zero_tol": self.zero_tol,
            "robin_lowest": [float(v) for v in self.robin.eigenvalues[:8]],
            "dirichlet_lowest": [float(v) for v in self.dirichlet.eigenvalues[:8]],
            "warnings": list(self.warnings),
        }
        if self.steklov is not None:
            out["steklov_lowest"] = [float(v) for v in self.steklov.eigenvalues[:8]]
            out["kernel_dim"] = int(self.steklov.extra.get("kernel_dim", 0))
        return out


def _ambiguous(vals, zt, label):
    vals = np.asarray(vals)
    bad = vals[(np.abs(vals) > zt) & (np.abs(vals) < 2 * zt)]
    return [f"{label} eigenvalue {v:.6g} within (zero_tol, 2 zero_tol) of zero" for v in bad]


def index_count(form, zero_tol: Optional[float] = None, tol: Tolerances = DEFAULT) -> IndexReport:
    """ind = #{Dirichlet <= 0} + #{Steklov < 0}, checked against #{Robin < 0}.

    On a closed surface there is no boundary, the Dirichlet problem is the
    whole problem and its kernel counts towards the nullity, not the index.
    """
    af = _as_assembled(form)
    zt = af.zero_tol(tol) if zero_tol is None else zero_tol
    robin = robin_spectrum(af, zero_tol=zt, tol=tol)
    closed = len(af.boundary) == 0
    dirichlet = dirichlet_spectrum(af, zero_tol=zt, tol=tol)
    notes = _ambiguous(robin.eigenvalues, zt, "Robin") + _ambiguous(dirichlet.eigenvalues, zt, "Dirichlet")
    if closed:
        a = int(np.sum(dirichlet.eigenvalues < -zt))
        b = 0
        nullity = int(np.sum(np.abs(dirichlet.eigenvalues) <= zt))
        steklov = None
    else:
        a = int(np.sum(dirichlet.eigenvalues <= zt))
        steklov = steklov_spectrum(af, zero_tol=zt, tol=tol, dirichlet=dirichlet)
        b = int(np.sum(steklov.eigenvalues < -zt))
        nullity = int(np.sum(np.abs(steklov.eigenvalues) <= zt))
        notes += _ambiguous(steklov.eigenvalues, zt, "Steklov")
    ind_robin = int(np.sum(robin.eigenvalues < -zt))
    if notes:
        warnings.warn("; ".join(notes), RuntimeWarning, stacklevel=2)
    return IndexReport(a, b, a + b, ind_robin, nullity, a + b == ind_robin, zt, notes, robin, dirichlet, steklov, closed)


# --------------------------------------------------------------------------
# comparison inequalities


def comparison_check(form, trials: Optional[np.ndarray] = None, n_trials: int = 100, seed: int = 0, zero_tol: Optional[float] = None, tol: Tolerances = DEFAULT) -> dict:
    """Check the discrete comparison inequalities on random per-vertex trials.

    Returns, per check, the smallest slack (left minus right side, scaled
    by the trial norm) and whether it is above -1e-8.
    """
    af = _as_assembled(form)
    zt = af.zero_tol(tol) if zero_tol is None else zero_tol
    n = af.form.mesh.n_vertices
    I, G = af.interior, af.boundary
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((n, n_trials)) if trials is None else np.asarray(trials, float).reshape(n, -1)
    dirichlet = dirichlet_spectrum(af, zero_tol=zt, tol=tol)
    lam_d0 = float(dirichlet.eigenvalues[0])
    kernel_present = abs(lam_d0) <= zt
    steklov = steklov_spectrum(af, zero_tol=zt, tol=tol, dirichlet=dirichlet) if len(G) else None
    A, M, B, Bq, Qm = af.A, af.M, af.B, af.B_q, af.Q_matrix
    out = {}

    def record(name, slacks):
        slacks = np.asarray(slacks, float)
        out[name] = {"min_slack": float(np.min(slacks)), "passed": bool(np.min(slacks) >= -1e-8)}

    # item 1: boundary-zero trials
    Z = U.copy()
    Z[G] = 0.0
    norms = np.einsum("ij,ij->j", Z, M @ Z)
    q_vals = np.einsum("ij,ij->j", Z, Qm @ Z)
    record("dirichlet_bottom", (q_vals - lam_d0 * norms) / norms)

    # almost coercivity
    alpha = max(float(np.max(af.form.p)), float(np.max(af.form.q[G])) if len(G) else 0.0) + 1.0
    h1 = np.einsum("ij,ij->j", U, (af.K + M) @ U)
    l2 = np.einsum("ij,ij->j", U, M @ U)
    b2 = np.einsum("ij,ij->j", U, B @ U)
    qU = np.einsum("ij,ij->j", U, Qm @ U)
    record("almost_coercive", (qU - h1 + alpha * (l2 + b2)) / (l2 + b2))

    if steklov is None:
        return out
    dtr = steklov.extra["dtr"]
    lam_s = steklov.eigenvalues
    Bg = B[G][:, G].toarray()
    Bqg = Bq[G][:, G].toarray()
    kernel = dtr.kernel

    def project_kernel(V):
        if kernel.shape[1] == 0:
            return V
        return V - kernel @ (kernel.T @ (M @ V))

    def admissible(V):
        """Trace projected onto the admissible subspace, interior kept."""
        V = V.copy()
        P = dtr.basis
        V[G] = P @ (P.T @ V[G])
        return project_kernel(V)

    V = admissible(U)
    f = V[G]
    lhs = np.einsum("ij,ij->j", V, A @ V)
    bnorm = np.einsum("ij,ij->j", f, Bg @ f)
    qf = np.einsum("ij,ij->j", f, Bqg @ f)
    label = "steklov_bottom_deflated" if kernel_present else "steklov_bottom"
    record(label, (lhs - qf - lam_s[0] * bnorm) / bnorm)

    ext = V.copy()
    ext[I] = dtr.extension @ f
    q_ext = np.einsum("ij,ij->j", ext, Qm @ ext)
    q_v = np.einsum("ij,ij->j", V, Qm @ V)
    record("extension_minimal", (q_v - q_ext) / np.einsum("ij,ij->j", V, M @ V))

    if lam_d0 > zt and len(lam_s) > 1:
        phi0 = steklov.eigenfunctions[G, 0]
        W = V.copy()
        W[G] = f - np.outer(phi0, phi0 @ (Bg @ f))
        W = project_kernel(W)
        fw = W[G]
        lhs = np.einsum("ij,ij->j", W, A @ W)
        bn = np.einsum("ij,ij->j", fw, Bg @ fw)
        qw = np.einsum("ij,ij->j", fw, Bqg @ fw)
        record("steklov_second", (lhs - qw - lam_s[1] * bn) / bn)
        gap = float(lam_s[1] - lam_s[0])
        out["steklov_simple"] = {"gap": gap, "passed": bool(gap > zt)}
    return out
