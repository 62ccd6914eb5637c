"""Interior-point solver for linear objectives over products of PSD blocks.

The algorithm is a primal-dual path-following method with Nesterov-Todd
scaling and Mehrotra's predictor-corrector, run on the homogeneous self-dual
embedding so that primal or dual infeasibility surfaces as a certificate
instead of a divergence.  In conic standard form the problem is

    minimize c'z   subject to   G z + s = h,   s in K,

where K is a product of vectorized PSD cones, G's column i is -svec(F_i)
stacked over blocks, and h stacks svec(F0).  Symmetric matrices are
vectorized with sqrt(2)-scaled off-diagonals so Euclidean inner products of
vectors equal trace inner products of matrices.

Homogeneous embedding variables are (u, w, s, tau, kappa) with residuals

    rx  = G'w + c tau        (dual)
    rz  = s + G u - h tau    (primal)
    rtau = kappa + c'u + h'w (gap)

and z = u/tau recovered at convergence.  Each Newton solve eliminates
(s, w, kappa) down to a positive definite normal system in u whose matrix is
(C G)'(C G), where C is the block congruence by the NT scaling factor
R^{-1}; the system is assembled densely per iteration (blocks here are
small) and factored with a static regularization plus iterative refinement,
because the data-driven programs have exactly singular normal matrices on
their (consistent) optimal faces.

Equality constraints are removed up front by a deterministic SVD null-space
reduction: z = z_p + N xi with A_eq z_p = b_eq and A_eq N = 0, after which
the core solver sees a pure LMI problem in xi.

Blocks of equal size are processed as one batched stack, so a problem with
hundreds of small epigraph blocks costs a handful of vectorized kernel calls
per iteration rather than a Python loop over blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._util import EPS
from .lmi import LmiProblem, SolveResult, SolveStatus, block_min_eigs


@dataclass(frozen=True)
class SolverSettings:
    """Termination and robustness knobs for :func:`solve`."""

    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    max_iter: int = 200
    step_fraction: float = 0.99
    static_reg: float = 1e-16
    refine_steps: int = 10
    verbose: bool = False


# ---------------------------------------------------------------------------
# symmetric vectorization
# ---------------------------------------------------------------------------

_SQRT2 = math.sqrt(2.0)


def _svec_cache(d: int):
    rows, cols = np.tril_indices(d)
    scale = np.where(rows == cols, 1.0, _SQRT2)
    return rows, cols, scale


def _svec(M: np.ndarray, cache) -> np.ndarray:
    """svec of a (…, d, d) stack -> (…, d(d+1)/2)."""
    rows, cols, scale = cache
    return M[..., rows, cols] * scale


def _smat(v: np.ndarray, cache, d: int) -> np.ndarray:
    """Inverse of :func:`_svec` on a (…, dd) stack (dtype-preserving)."""
    rows, cols, scale = cache
    vals = v / scale
    out = np.zeros(v.shape[:-1] + (d, d), dtype=v.dtype)
    out[..., rows, cols] = vals
    out[..., cols, rows] = vals
    return out


class _Group:
    """All blocks of one size, stacked for batched kernels."""

    def __init__(self, d: int, f0s: np.ndarray, coeffs: np.ndarray, row0: int):
        self.d = d
        self.k = f0s.shape[0]
        self.cache = _svec_cache(d)
        self.dd = d * (d + 1) // 2
        self.f0s = f0s          # (k, d, d)
        self.coeffs = coeffs    # (k, p, d, d)
        self.rows = slice(row0, row0 + self.k * self.dd)

    def vec_to_mats(self, vec: np.ndarray) -> np.ndarray:
        return _smat(vec[self.rows].reshape(self.k, self.dd), self.cache, self.d)

    def mats_to_vec(self, mats: np.ndarray, out: np.ndarray) -> None:
        out[self.rows] = _svec(mats, self.cache).reshape(-1)


def _build_groups(blocks, p: int, z_p=None, basis=None):
    """Stack blocks by size; optionally apply the equality reduction maps."""
    by_size: dict[int, list] = {}
    order: list[int] = []
    for b in blocks:
        if b.size not in by_size:
            by_size[b.size] = []
            order.append(b.size)
        by_size[b.size].append(b)
    groups: list[_Group] = []
    row0 = 0
    for d in order:
        blocks_d = by_size[d]
        k = len(blocks_d)
        f0s = np.empty((k, d, d))
        dense = np.zeros((k, p, d, d))
        for j, b in enumerate(blocks_d):
            f0s[j] = b.f0
            for i, F in b.coeff.items():
                dense[j, i] = F
        if basis is not None:
            f0s = f0s + np.einsum("i,kiab->kab", z_p, dense)
            dense = np.einsum("kiab,ij->kjab", dense, basis)
        g = _Group(d, f0s, dense, row0)
        groups.append(g)
        row0 += g.k * g.dd
    return groups, row0


def _assemble_gh(groups, p_eff: int, n_rows: int):
    G = np.empty((n_rows, p_eff))
    h = np.empty(n_rows)
    for g in groups:
        sv = _svec(g.coeffs, g.cache)           # (k, p, dd)
        G[g.rows] = -sv.transpose(0, 2, 1).reshape(g.k * g.dd, p_eff)
        h[g.rows] = _svec(g.f0s, g.cache).reshape(-1)
    return G, h


class _Scaling:
    """Per-group NT scaling state for one iteration."""

    def __init__(self, groups, s_vec, w_vec):
        self.R = []
        self.Rinv = []
        self.lam = []
        self.Ls = []
        self.Lz = []
        self.W = []
        for g in groups:
            S = g.vec_to_mats(s_vec)
            Z = g.vec_to_mats(w_vec)
            Ls = np.linalg.cholesky(S)
            Lz = np.linalg.cholesky(Z)
            U, sig, Vt = np.linalg.svd(np.matmul(Lz.transpose(0, 2, 1), Ls))
            isr = 1.0 / np.sqrt(sig)
            R = np.matmul(Ls, Vt.transpose(0, 2, 1)) * isr[:, None, :]
            Rinv = isr[:, :, None] * np.matmul(U.transpose(0, 2, 1), Lz.transpose(0, 2, 1))
            self.R.append(R)
            self.Rinv.append(Rinv)
            self.lam.append(sig)
            self.Ls.append(Ls)
            self.Lz.append(Lz)
            self.W.append(np.matmul(R, R.transpose(0, 2, 1)))


def _scaled_gram_rows(groups, scal: _Scaling, p_eff: int, n_rows: int) -> np.ndarray:
    """The matrix C G: per block, svec(R^{-1} (-F_i) R^{-T}) as columns i."""
    CG = np.empty((n_rows, p_eff))
    for g, Rinv in zip(groups, scal.Rinv):
        Rit = Rinv.transpose(0, 2, 1)
        A1 = np.matmul(Rinv[:, None], g.coeffs)
        A2 = np.matmul(A1, Rit[:, None])
        CG[g.rows] = -_svec(A2, g.cache).transpose(0, 2, 1).reshape(g.k * g.dd, p_eff)
    return CG


def _apply_congruence(groups, mats_left, vec, mats_right, out):
    """out[rows] = svec(L @ smat(vec) @ R) per group, batched."""
    for g, L, R in zip(groups, mats_left, mats_right):
        V = g.vec_to_mats(vec)
        g.mats_to_vec(np.matmul(np.matmul(L, V), R), out)
    return out


def _max_step_cone(groups, chols, vec_cur, vec_delta) -> float:
    """Largest alpha with cur + alpha*delta staying PSD, per Cholesky bound."""
    alpha = math.inf
    for g, L in zip(groups, chols):
        D = g.vec_to_mats(vec_delta)
        t1 = np.linalg.solve(L, D)
        t2 = np.linalg.solve(L, t1.transpose(0, 2, 1))
        t2 = 0.5 * (t2 + t2.transpose(0, 2, 1))
        lmin = float(np.linalg.eigvalsh(t2)[:, 0].min())
        if lmin < 0.0:
            alpha = min(alpha, -1.0 / lmin)
    return alpha


def solve(problem: LmiProblem, settings: SolverSettings | None = None) -> SolveResult:
    """Solve an :class:`LmiProblem` to the settings' tolerances.

    Returns a :class:`SolveResult`; failures are reported through the status
    field (never raised), and ``feas`` is always recomputed from the original
    problem data at the returned point.
    """
    st = settings or SolverSettings()
    c_orig = problem.c
    p = problem.num_vars

    # -- equality presolve: restrict to the affine subspace A_eq z = b_eq
    z_p = None
    basis = None
    offset = 0.0
    if problem.eq_matrix is not None and problem.eq_matrix.shape[0] > 0:
        A = problem.eq_matrix
        b = problem.eq_rhs
        U, sig, Vt = np.linalg.svd(A, full_matrices=True)
        tol = max(A.shape) * EPS * (sig[0] if sig.size else 0.0) * 100.0
        r = int(np.count_nonzero(sig > tol))
        z_p = Vt[:r].T @ ((U[:, :r].T @ b) / sig[:r]) if r > 0 else np.zeros(p)
        if np.linalg.norm(A @ z_p - b) > 1e-9 * max(1.0, np.linalg.norm(b)):
            return SolveResult(
                z=np.full(p, np.nan), objective_value=math.nan,
                status=SolveStatus.PRIMAL_INFEASIBLE, gap=math.nan,
                feas=-math.inf, iterations=0,
                message="equality constraints are inconsistent",
            )
        basis = Vt[r:].T
        offset = float(c_orig @ z_p)

    def lift(xi: np.ndarray) -> np.ndarray:
        if basis is None:
            return xi
        return z_p + basis @ xi

    c_eff = c_orig if basis is None else basis.T @ c_orig
    p_eff = c_eff.shape[0]

    if p_eff == 0:
        # equalities pin the point completely; only feasibility is in question
        z = lift(np.zeros(0))
        feas = min(block_min_eigs(problem, z))
        ok = feas >= -st.feas_tol
        return SolveResult(
            z=z, objective_value=float(c_orig @ z),
            status=SolveStatus.OPTIMAL if ok else SolveStatus.PRIMAL_INFEASIBLE,
            gap=0.0, feas=feas, iterations=0,
            message="point fully determined by equalities",
        )

    groups, n_rows = _build_groups(problem.blocks, p, z_p, basis)
    G, h = _assemble_gh(groups, p_eff, n_rows)
    norm_h = max(1.0, float(np.linalg.norm(h)))
    norm_c = max(1.0, float(np.linalg.norm(c_eff)))
    nu_deg = sum(g.k * g.d for g in groups) + 1
    # extended-precision copies for refinement residuals: float64 residual
    # evaluation caps the attainable accuracy on degenerate problems
    G_ld = G.astype(np.longdouble)
    h_ld = h.astype(np.longdouble)
    c_ld = c_eff.astype(np.longdouble)

    # -- homogeneous embedding state
    u = np.zeros(p_eff)
    w = np.zeros(n_rows)
    s = np.zeros(n_rows)
    for g in groups:
        eye = np.broadcast_to(np.eye(g.d), (g.k, g.d, g.d))
        g.mats_to_vec(eye, w)
        g.mats_to_vec(eye, s)
    tau = 1.0
    kappa = 1.0

    status = SolveStatus.ITER_LIMIT
    message = ""
    rel_gap = math.inf
    stall = 0
    iters_done = 0
    best_score = math.inf
    best_state = None

    def finalize(stat, msg, gap_out, it):
        z = lift(u / max(tau, 1e-300))
        feas = min(block_min_eigs(problem, z))
        obj = float(c_orig @ z)
        if stat == SolveStatus.OPTIMAL and feas < -st.feas_tol:
            stat = SolveStatus.NUMERICAL_TROUBLE
            msg = f"converged point violates a block by {feas:.3e}"
        return SolveResult(
            z=z, objective_value=obj, status=stat, gap=gap_out,
            feas=feas, iterations=it, message=msg,
        )

    for it in range(1, st.max_iter + 1):
        iters_done = it
        # ---- metrics and exit tests
        x = u / tau
        pcost = float(c_eff @ x) + offset
        dcost = -float(h @ w) / tau + offset
        gap_abs = float(s @ w) / (tau * tau)
        rel_gap = gap_abs / max(1.0, abs(pcost), abs(dcost))
        pres = float(np.linalg.norm(G @ x + s / tau - h)) / norm_h
        dres = float(np.linalg.norm(G.T @ (w / tau) + c_eff)) / norm_c
        score = max(pres, dres, rel_gap)
        if score < best_score:
            best_score = score
            best_state = (u.copy(), w.copy(), s.copy(), tau, kappa, rel_gap)
        if pres <= st.feas_tol and dres <= st.feas_tol and rel_gap <= st.gap_tol:
            z_cand = lift(x)
            if min(block_min_eigs(problem, z_cand)) >= -st.feas_tol:
                status = SolveStatus.OPTIMAL
                break
            # keep polishing: the slack is interior but the recovered point
            # still violates a block by more than feas_tol
        hw = float(h @ w)
        if hw < 0 and float(np.linalg.norm(G.T @ w)) / (-hw) <= st.feas_tol * norm_c:
            status = SolveStatus.PRIMAL_INFEASIBLE
            message = "Farkas certificate: G'w ~ 0, h'w < 0"
            break
        cu = float(c_eff @ u)
        if cu < 0 and float(np.linalg.norm(G @ u + s)) / (-cu) <= st.feas_tol * norm_h:
            status = SolveStatus.DUAL_INFEASIBLE
            message = "unboundedness certificate: G u + s ~ 0, c'u < 0"
            break
        if tau < 1e-12 * max(1.0, kappa):
            loose = 1e-6
            if hw < 0 and float(np.linalg.norm(G.T @ w)) / (-hw) <= loose * norm_c:
                status = SolveStatus.PRIMAL_INFEASIBLE
                message = "tau collapsed; loose Farkas certificate accepted"
            elif cu < 0 and float(np.linalg.norm(G @ u + s)) / (-cu) <= loose * norm_h:
                status = SolveStatus.DUAL_INFEASIBLE
                message = "tau collapsed; loose unboundedness certificate accepted"
            else:
                status = SolveStatus.NUMERICAL_TROUBLE
                message = "tau collapsed without a usable certificate"
            break

        rx = G.T @ w + c_eff * tau
        rz = s + G @ u - h * tau
        rtau = kappa + float(c_eff @ u) + float(h @ w)
        mu = (float(s @ w) + tau * kappa) / nu_deg

        # ---- NT scaling and normal matrix
        try:
            scal = _Scaling(groups, s, w)
        except np.linalg.LinAlgError:
            status = SolveStatus.NUMERICAL_TROUBLE
            message = "iterate left the cone (Cholesky failure in scaling)"
            break
        CG = _scaled_gram_rows(groups, scal, p_eff, n_rows)
        CG_ld = CG.astype(np.longdouble)
        W_ld = [Wm.astype(np.longdouble) for Wm in scal.W]
        M = CG.T @ CG
        delta = st.static_reg * (1.0 + float(np.abs(np.diag(M)).max()))
        fac = None
        for attempt in range(4):
            try:
                fac = scipy.linalg.cho_factor(
                    M + (delta * 10.0**(2 * attempt)) * np.eye(p_eff), lower=True
                )
                break
            except np.linalg.LinAlgError:
                continue
        if fac is None:
            status = SolveStatus.NUMERICAL_TROUBLE
            message = "normal matrix factorization failed"
            break

        def solve_m(rhs):
            rhs64 = np.asarray(rhs, dtype=float)
            rhs_ld = np.asarray(rhs, dtype=np.longdouble)
            xsol = scipy.linalg.cho_solve(fac, rhs64).astype(np.longdouble)
            rhs_scale = max(1.0, float(np.linalg.norm(rhs64)))
            prev = math.inf
            for _ in range(st.refine_steps):
                resid = rhs_ld - CG_ld.T @ (CG_ld @ xsol)
                rn = float(np.linalg.norm(resid.astype(float)))
                if rn <= 1e-16 * rhs_scale or rn >= 0.5 * prev:
                    break
                prev = rn
                xsol = xsol + scipy.linalg.cho_solve(fac, resid.astype(float))
            return xsol.astype(float)

        def apply_c_op(vec, out):
            return _apply_congruence(
                groups, scal.Rinv, vec, [Ri.transpose(0, 2, 1) for Ri in scal.Rinv], out
            )

        def apply_hinv(vec):
            tmp = apply_c_op(vec, np.empty(n_rows))
            out = np.empty(n_rows)
            for g, Rinv in zip(groups, scal.Rinv):
                Rit = Rinv.transpose(0, 2, 1)
                V = g.vec_to_mats(tmp)
                g.mats_to_vec(np.matmul(np.matmul(Rit, V), Rinv), out)
            return out

        def apply_h_ld(vec_ld):
            out = np.empty(n_rows, dtype=np.longdouble)
            for g, Wm in zip(groups, W_ld):
                V = g.vec_to_mats(vec_ld)
                g.mats_to_vec(np.matmul(np.matmul(Wm, V), Wm), out)
            return out

        Ch = apply_c_op(h, np.empty(n_rows))
        gthinv_h = CG.T @ Ch
        u2 = solve_m(gthinv_h - c_eff)
        w2 = apply_hinv(G @ u2 - h)
        den = float(c_eff @ u2) + float(h @ w2) - kappa / tau
        if not math.isfinite(den) or abs(den) < 1e-300:
            status = SolveStatus.NUMERICAL_TROUBLE
            message = "degenerate pivot in the tau equation"
            break

        def newton_solve(b1, b2, b3, b4, b5):
            # eliminate (s, w, kappa): M du = b1 - G'H^{-1}(b4 - b2), etc.
            b1 = np.asarray(b1, dtype=float)
            b2 = np.asarray(b2, dtype=float)
            b4 = np.asarray(b4, dtype=float)
            b3, b5 = float(b3), float(b5)
            q = b4 - b2
            u1 = solve_m(b1 - CG.T @ apply_c_op(q, np.empty(n_rows)))
            w1 = apply_hinv(G @ u1 + q)
            dtau = (b3 - float(c_eff @ u1) - float(h @ w1) - b5 / tau) / den
            du = u1 + dtau * u2
            dw = w1 + dtau * w2
            ds = b2 - G @ du + h * dtau
            dkappa = (b5 - kappa * dtau) / tau
            return du, dw, ds, dtau, dkappa

        aug_state = None

        def aug_solve(b1, b2, b3, b4, b5):
            # stable fallback: pivoted LU of the full reduced Newton system
            # in (du, dw, dtau); built at most once per iteration
            nonlocal aug_state
            if aug_state is None:
                Hd = np.zeros((n_rows, n_rows))
                for g, Wm in zip(groups, scal.W):
                    rr, cc, ss = g.cache
                    basis = np.zeros((g.dd, g.d, g.d))
                    idx = np.arange(g.dd)
                    basis[idx, rr, cc] = 1.0 / ss
                    basis[idx, cc, rr] = 1.0 / ss
                    cols = _svec(
                        np.einsum("kab,rbc,kcd->krad", Wm, basis, Wm), g.cache
                    )
                    start = g.rows.start
                    for j in range(g.k):
                        sl = slice(start + j * g.dd, start + (j + 1) * g.dd)
                        Hd[sl, sl] = cols[j].T
                dim = p_eff + n_rows + 1
                Kmat = np.zeros((dim, dim))
                Kmat[:p_eff, p_eff:-1] = G.T
                Kmat[:p_eff, -1] = c_eff
                Kmat[p_eff:-1, :p_eff] = G
                Kmat[p_eff:-1, p_eff:-1] = -Hd
                Kmat[p_eff:-1, -1] = -h
                Kmat[-1, :p_eff] = c_eff
                Kmat[-1, p_eff:-1] = h
                Kmat[-1, -1] = -kappa / tau
                # tiny primal-dual shift: G may have an exact null space
                # (unbounded optimal faces), which would make the matrix
                # singular; refinement absorbs the perturbation
                shift = 1e-12 * (1.0 + max(float(np.abs(G).max()), norm_c, norm_h))
                idx = np.arange(dim)
                Kmat[idx[:p_eff], idx[:p_eff]] += shift
                Kmat[idx[p_eff:], idx[p_eff:]] -= shift
                aug_state = (scipy.linalg.lu_factor(Kmat), Hd)
            lu, Hd = aug_state
            b1 = np.asarray(b1, dtype=float)
            b2 = np.asarray(b2, dtype=float)
            b4 = np.asarray(b4, dtype=float)
            b3, b5 = float(b3), float(b5)
            rhs = np.concatenate([b1, b2 - b4, [b3 - b5 / tau]])
            sol = scipy.linalg.lu_solve(lu, rhs)
            if not np.all(np.isfinite(sol)):
                raise np.linalg.LinAlgError("augmented system solve overflowed")
            du = sol[:p_eff]
            dw = sol[p_eff:-1]
            dtau = float(sol[-1])
            ds = b4 - Hd @ dw
            dkappa = (b5 - kappa * dtau) / tau
            return du, dw, ds, dtau, dkappa

        def newton_apply(du, dw, ds, dtau, dkappa):
            du_l = du.astype(np.longdouble)
            dw_l = dw.astype(np.longdouble)
            ds_l = ds.astype(np.longdouble)
            return (
                G_ld.T @ dw_l + c_ld * np.longdouble(dtau),
                G_ld @ du_l + ds_l - h_ld * np.longdouble(dtau),
                c_ld @ du_l + h_ld @ dw_l + np.longdouble(dkappa),
                ds_l + apply_h_ld(dw_l),
                np.longdouble(kappa) * dtau + np.longdouble(tau) * dkappa,
            )

        def _stack_norm(parts):
            total = 0.0
            for part in parts:
                total += float(np.dot(part, part)) if isinstance(part, np.ndarray) else part * part
            return math.sqrt(total)

        def _refine(solver, rhs, rounds, target):
            # iterative refinement against the full Newton system, with
            # extended-precision residuals; keeps the best iterate seen
            sol = solver(*rhs)
            best_sol, best_rn = sol, math.inf
            for i in range(rounds + 1):
                lhs = newton_apply(*sol)
                resid = tuple(b - l for b, l in zip(rhs, lhs))
                rn = _stack_norm(resid)
                if math.isfinite(rn) and rn < best_rn:
                    best_sol, best_rn = sol, rn
                if i == rounds or rn <= target or not math.isfinite(rn):
                    break
                sol = tuple(a + b for a, b in zip(sol, solver(*resid)))
            return best_sol, best_rn

        def direction(t, dc, dkt):
            # solve via the eliminated normal equations; when refinement
            # cannot push the Newton residual to target (degenerate endgame),
            # retry through the slower but stabler augmented factorization
            rhs = (-t * rx, -t * rz, -t * rtau, dc, dkt)
            rhs_norm = _stack_norm(rhs)
            target = 1e-13 * (1.0 + rhs_norm)
            sol, rn = _refine(newton_solve, rhs, 3, target)
            if rn > target:
                try:
                    sol2, rn2 = _refine(aug_solve, rhs, 3, target)
                except np.linalg.LinAlgError:
                    pass
                else:
                    if rn2 < rn:
                        sol, rn = sol2, rn2
            unreliable = rn > 1e-5 * (1.0 + rhs_norm)
            return sol, unreliable

        def max_step(du, dw, ds, dtau, dkappa):
            alpha = _max_step_cone(groups, scal.Ls, s, ds)
            alpha = min(alpha, _max_step_cone(groups, scal.Lz, w, dw))
            if dtau < 0:
                alpha = min(alpha, -tau / dtau)
            if dkappa < 0:
                alpha = min(alpha, -kappa / dkappa)
            return alpha

        # ---- predictor
        aff, aff_bad = direction(1.0, -s, -tau * kappa)
        if aff_bad:
            status = SolveStatus.NUMERICAL_TROUBLE
            message = "search direction lost accuracy (predictor)"
            break
        a_aff = min(1.0, max_step(*aff))
        du_a, dw_a, ds_a, dtau_a, dkap_a = aff
        mu_aff = (
            float((s + a_aff * ds_a) @ (w + a_aff * dw_a))
            + (tau + a_aff * dtau_a) * (kappa + a_aff * dkap_a)
        ) / nu_deg
        sigma = min(1.0, max(0.0, (max(mu_aff, 0.0) / mu) ** 3))

        # ---- corrector (scaled-space Mehrotra second-order term)
        dc = np.empty(n_rows)
        for g, R, Rinv, lam in zip(groups, scal.R, scal.Rinv, scal.lam):
            Rt = R.transpose(0, 2, 1)
            Rit = Rinv.transpose(0, 2, 1)
            Ds = np.matmul(np.matmul(Rinv, g.vec_to_mats(ds_a)), Rit)
            Dz = np.matmul(np.matmul(Rt, g.vec_to_mats(dw_a)), R)
            dmat = -0.5 * (np.matmul(Ds, Dz) + np.matmul(Dz, Ds))
            idx = np.arange(g.d)
            dmat[:, idx, idx] += sigma * mu - lam**2
            nu_mat = 2.0 * dmat / (lam[:, :, None] + lam[:, None, :])
            g.mats_to_vec(np.matmul(np.matmul(R, nu_mat), Rt), dc)
        dkt = sigma * mu - tau * kappa - dtau_a * dkap_a
        comb, comb_bad = direction(1.0 - sigma, dc, dkt)
        if comb_bad:
            status = SolveStatus.NUMERICAL_TROUBLE
            message = "search direction lost accuracy (corrector)"
            break
        alpha = min(1.0, st.step_fraction * max_step(*comb))
        if st.verbose:
            print(
                f"iter {it:3d}  mu={mu:9.2e}  gap={rel_gap:9.2e}  pres={pres:9.2e} "
                f"dres={dres:9.2e}  sigma={sigma:5.3f}  alpha={alpha:6.4f}"
            )
        if alpha < 1e-8:
            stall += 1
            if stall >= 3:
                status = SolveStatus.NUMERICAL_TROUBLE
                message = "step length collapsed"
                break
        else:
            stall = 0
        du, dw, ds, dtau, dkappa = comb
        u = u + alpha * du
        w = w + alpha * dw
        s = s + alpha * ds
        tau = tau + alpha * dtau
        kappa = kappa + alpha * dkappa

    if status == SolveStatus.ITER_LIMIT:
        message = f"no convergence in {st.max_iter} iterations"
    if status in (SolveStatus.PRIMAL_INFEASIBLE, SolveStatus.DUAL_INFEASIBLE):
        z = lift(u / max(tau, 1e-300))
        return SolveResult(
            z=z, objective_value=math.nan, status=status, gap=math.nan,
            feas=min(block_min_eigs(problem, z)), iterations=iters_done,
            message=message,
        )
    if status in (SolveStatus.NUMERICAL_TROUBLE, SolveStatus.ITER_LIMIT) and best_state:
        # the last iterate may have drifted after the linear algebra gave
        # out; return the best point seen instead
        u, w, s, tau, kappa, rel_gap = best_state
    return finalize(status, message, rel_gap, iters_done)
