"""Primal-dual interior-point solver for small dense semidefinite programs.

Problems are given in standard conic form

    minimize    c' x
    subject to  h - G x  in  K,        (conic inequality, slack s = h - G x)
                A x = b                (optional equalities)

where K is a product of dense PSD blocks and a nonnegative orthant.  PSD
blocks travel in scaled symmetric vectorization ("svec"): the upper triangle
row by row, off-diagonal entries multiplied by sqrt(2), so that the dot
product of two svec vectors equals the trace inner product and the cone is
self-dual in these coordinates.

The algorithm is a homogeneous self-dual embedding with Nesterov-Todd
scaling and a Mehrotra predictor-corrector step:

  * the HSD model augments (x, y, z, s) with scalars (tau, kappa); an
    optimal point has tau > 0, an infeasibility or unboundedness certificate
    has kappa > 0,
  * each iteration factors one dense Schur complement G' W^-1 W^-T G and
    reuses it for the predictor, the corrector and iterative refinement of
    the Newton directions (refinement is what keeps the dual residual from
    flooring when the scaling matrix becomes ill-conditioned near the
    optimum),
  * steps take a 0.99 fraction of the distance to the cone boundary, with a
    Cholesky-guarded backtrack against round-off leaving the cone,
  * if the strict tolerances are out of reach, the driver re-equilibrates
    the problem from the magnitudes of the first-pass solution (columns by
    |x|, cone rows by |z|) and re-solves; this rescues problems whose
    solutions span many orders of magnitude.

Built for cone dimensions up to a few hundred; everything is dense.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cholesky as _chol, lu_factor, lu_solve, solve_triangular

__all__ = [
    "ConeSpec",
    "SdpProblem",
    "SdpSolution",
    "SolverOptions",
    "Status",
    "IterationRecord",
    "FeasibilityReport",
    "solve",
    "check_feasible_point",
    "dump_problem",
    "svec",
    "smat",
    "svec_len",
]

_SQRT2 = np.sqrt(2.0)


def svec_len(d: int) -> int:
    return d * (d + 1) // 2


def svec(m: np.ndarray) -> np.ndarray:
    """Scaled upper-triangle vectorization of a symmetric matrix."""
    d = m.shape[0]
    iu, ju = np.triu_indices(d)
    v = m[iu, ju].astype(float).copy()
    v[iu != ju] *= _SQRT2
    return v

def smat(v: np.ndarray, d: int) -> np.ndarray:
    """Inverse of :func:`svec`."""
    iu, ju = np.triu_indices(d)
    w = np.asarray(v, dtype=float).copy()
    w[iu != ju] /= _SQRT2
    m = np.zeros((d, d))
    m[iu, ju] = w
    m[ju, iu] = w
    return m


def _smat_batch(V: np.ndarray, d: int) -> np.ndarray:
    iu, ju = np.triu_indices(d)
    W = V.copy()
    W[:, iu != ju] /= _SQRT2
    out = np.zeros((V.shape[0], d, d))
    out[:, iu, ju] = W
    out[:, ju, iu] = W
    return out


def _svec_batch(ms: np.ndarray) -> np.ndarray:
    d = ms.shape[1]
    iu, ju = np.triu_indices(d)
    V = ms[:, iu, ju].copy()
    V[:, iu != ju] *= _SQRT2
    return V


def _chol_ok(m: np.ndarray) -> bool:
    try:
        _chol(m, lower=True)
        return True
    except np.linalg.LinAlgError:
        return False


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    MAX_ITERS = "max_iters"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True)
class ConeSpec:
    """Product cone: dense PSD blocks followed by a nonnegative orthant."""

    psd_dims: tuple[int, ...] = ()
    nonneg_dim: int = 0

    def __post_init__(self):
        object.__setattr__(self, "psd_dims", tuple(int(d) for d in self.psd_dims))
        if any(d < 1 for d in self.psd_dims):
            raise ValueError("PSD block dimensions must be >= 1")
        if self.nonneg_dim < 0:
            raise ValueError("nonneg_dim must be >= 0")
        if not self.psd_dims and self.nonneg_dim == 0:
            raise ValueError("cone must contain at least one block")

    @property
    def dim(self) -> int:
        """Total vectorized cone dimension."""
        return sum(svec_len(d) for d in self.psd_dims) + self.nonneg_dim

    @property
    def degree(self) -> int:
        return sum(self.psd_dims) + self.nonneg_dim

    @property
    def psd_offsets(self) -> list[tuple[int, int]]:
        """(offset, side) for each PSD block in the vectorized layout."""
        offs, off = [], 0
        for d in self.psd_dims:
            offs.append((off, d))
            off += svec_len(d)
        return offs

    @property
    def orthant_offset(self) -> int:
        return self.dim - self.nonneg_dim

    def identity(self) -> np.ndarray:
        e = np.zeros(self.dim)
        for off, d in self.psd_offsets:
            e[off:off + svec_len(d)] = svec(np.eye(d))
        e[self.orthant_offset:] = 1.0
        return e

    def contains(self, v: np.ndarray, strict: bool = True) -> bool:
        for off, d in self.psd_offsets:
            if not _chol_ok(smat(v[off:off + svec_len(d)], d)):
                return False
        o = v[self.orthant_offset:]
        return bool(np.all(o > 0.0) if strict else np.all(o >= 0.0))


@dataclass
class SdpProblem:
    """Standard-form conic program ``min c'x  s.t.  h - Gx in K, Ax = b``."""

    c: np.ndarray
    G: np.ndarray
    h: np.ndarray
    cone: ConeSpec
    A: np.ndarray | None = None
    b: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.atleast_1d(np.asarray(self.c, dtype=float))
        self.G = np.asarray(self.G, dtype=float)
        self.h = np.atleast_1d(np.asarray(self.h, dtype=float))
        if self.G.ndim != 2:
            raise ValueError("G must be a 2-D array")
        m, n = self.G.shape
        if self.c.shape != (n,):
            raise ValueError(f"c has length {self.c.shape[0]}, expected {n}")
        if self.h.shape != (m,):
            raise ValueError(f"h has length {self.h.shape[0]}, expected {m}")
        if m != self.cone.dim:
            raise ValueError(
                f"G has {m} rows but the cone dimension is {self.cone.dim}"
            )
        if (self.A is None) != (self.b is None):
            raise ValueError("A and b must be given together")
        if self.A is not None:
            self.A = np.asarray(self.A, dtype=float)
            self.b = np.atleast_1d(np.asarray(self.b, dtype=float))
            if self.A.ndim != 2 or self.A.shape[1] != n:
                raise ValueError("A must be 2-D with one column per variable")
            if self.b.shape != (self.A.shape[0],):
                raise ValueError("b length must match the rows of A")
        for arr in (self.c, self.G, self.h):
            if not np.all(np.isfinite(arr)):
                raise ValueError("problem data contains non-finite entries")

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 200
    feastol: float = 1e-9           # strict target
    gaptol: float = 1e-9
    acceptable: float = 1e-7        # contract level for declaring Optimal
    step: float = 0.99              # fraction to boundary
    refine: int = 10                # max refinement passes per Newton solve
    equilibrate_passes: int = 3     # total solve passes incl. rescaled ones
    cert_tol: float = 1e-7          # certificate residual for INFEASIBLE/UNBOUNDED


@dataclass
class IterationRecord:
    pobj: float
    dobj: float
    primal_residual: float
    dual_residual: float
    gap: float
    weak_duality_slack: float


@dataclass
class SdpSolution:
    status: Status
    x: np.ndarray | None = None
    s: np.ndarray | None = None
    z: np.ndarray | None = None
    y: np.ndarray | None = None
    pobj: float = np.nan
    dobj: float = np.nan
    primal_residual: float = np.nan
    dual_residual: float = np.nan
    duality_gap: float = np.nan     # relative
    iterations: int = 0
    certificate_residual: float = np.nan
    history: list[IterationRecord] = field(default_factory=list)


@dataclass
class FeasibilityReport:
    psd_margins: list[float]        # min eigenvalue of each PSD slack block
    orthant_margin: float | None    # min orthant slack entry
    eq_residual: float              # ||Ax - b||, 0.0 when no equalities

    @property
    def margin(self) -> float:
        vals = list(self.psd_margins)
        if self.orthant_margin is not None:
            vals.append(self.orthant_margin)
        return min(vals) if vals else np.inf


class _Scaling:
    """Nesterov-Todd scaling point for the current (s, z) pair."""

    def __init__(self, cone: ConeSpec, s: np.ndarray, z: np.ndarray):
        self.cone = cone
        self.R, self.Rinv, self.lam_psd, self.H = [], [], [], []
        for off, d in cone.psd_offsets:
            S = smat(s[off:off + svec_len(d)], d)
            Z = smat(z[off:off + svec_len(d)], d)
            Ls = _chol(S, lower=True)
            Lz = _chol(Z, lower=True)
            U, sig, Vt = np.linalg.svd(Lz.T @ Ls)
            R = Ls @ Vt.T * (sig ** -0.5)
            Rinv = (sig[:, None] ** 0.5) * (
                Vt @ solve_triangular(Ls, np.eye(d), lower=True))
            self.R.append(R)
            self.Rinv.append(Rinv)
            self.lam_psd.append(sig)
            self.H.append(Rinv.T @ Rinv)
        so = s[cone.orthant_offset:]
        zo = z[cone.orthant_offset:]
        self.w_ort = np.sqrt(so / zo) if so.size else np.zeros(0)
        self.lam_ort = np.sqrt(so * zo) if so.size else np.zeros(0)

    def lam_vec(self) -> np.ndarray:
        c = self.cone
        v = np.zeros(c.dim)
        for (off, d), sig in zip(c.psd_offsets, self.lam_psd):
            v[off:off + svec_len(d)] = svec(np.diag(sig))
        v[c.orthant_offset:] = self.lam_ort
        return v

    def _congruence(self, v, left, right_t):
        c = self.cone
        out = np.empty_like(v)
        for i, (off, d) in enumerate(c.psd_offsets):
            t = svec_len(d)
            M = smat(v[off:off + t], d)
            L, Rt = left(i), right_t(i)
            out[off:off + t] = svec(L @ M @ Rt)
        return out

    def W(self, v):
        out = self._congruence(v, lambda i: self.R[i].T, lambda i: self.R[i])
        o = self.cone.orthant_offset
        out[o:] = v[o:] * self.w_ort
        return out

    def WinvT(self, v):
        out = self._congruence(v, lambda i: self.Rinv[i], lambda i: self.Rinv[i].T)
        o = self.cone.orthant_offset
        out[o:] = v[o:] / self.w_ort
        return out

    def Winv(self, v):
        out = self._congruence(v, lambda i: self.Rinv[i].T, lambda i: self.Rinv[i])
        o = self.cone.orthant_offset
        out[o:] = v[o:] / self.w_ort
        return out

    def lam_apply(self, V):
        """Apply Lambda = W^-1 W^-T columnwise: H M H per PSD block."""
        c = self.cone
        one = V.ndim == 1
        V2 = V[:, None] if one else V
        out = np.empty_like(V2)
        for i, (off, d) in enumerate(c.psd_offsets):
            t = svec_len(d)
            mats = _smat_batch(V2[off:off + t, :].T, d)
            out[off:off + t, :] = _svec_batch(self.H[i] @ mats @ self.H[i]).T
        o = c.orthant_offset
        out[o:, :] = V2[o:, :] / (self.w_ort ** 2)[:, None]
        return out[:, 0] if one else out

    def max_step(self, dv):
        """Largest alpha with lambda + alpha*dv still in the cone."""
        c = self.cone
        amax = np.inf
        for i, (off, d) in enumerate(c.psd_offsets):
            t = svec_len(d)
            sig = self.lam_psd[i]
            D = smat(dv[off:off + t], d) / np.sqrt(np.outer(sig, sig))
            emin = np.linalg.eigvalsh(D)[0]
            if emin < 0:
                amax = min(amax, -1.0 / emin)
        dvo = dv[c.orthant_offset:]
        neg = dvo < 0
        if neg.any():
            amax = min(amax, float(np.min(-self.lam_ort[neg] / dvo[neg])))
        return amax

    def comp_rhs(self, sig_mu, ds_sc, dz_sc):
        """lambda^-1 o (sig_mu*e - lam o lam - ds_sc o dz_sc), scaled space."""
        c = self.cone
        out = np.zeros(c.dim)
        for i, (off, d) in enumerate(c.psd_offsets):
            t = svec_len(d)
            sig = self.lam_psd[i]
            X = sig_mu * np.eye(d) - np.diag(sig ** 2)
            if ds_sc is not None:
                Ds = smat(ds_sc[off:off + t], d)
                Dz = smat(dz_sc[off:off + t], d)
                X = X - 0.5 * (Ds @ Dz + Dz @ Ds)
            out[off:off + t] = svec(X * (2.0 / np.add.outer(sig, sig)))
        o = c.orthant_offset
        lam = self.lam_ort
        r = sig_mu - lam ** 2
        if ds_sc is not None:
            r = r - ds_sc[o:] * dz_sc[o:]
        out[o:] = r / lam
        return out


class _NewtonSystem:
    """One factorization of the HSD Newton system plus refinement solves."""

    def __init__(self, W, G, h, c, A, b, tau, kappa):
        self.W, self.G, self.h, self.c, self.A, self.b = W, G, h, c, A, b
        self.tau, self.kappa = tau, kappa
        n, p = c.size, A.shape[0]
        self.n, self.p = n, p
        self.Lh = W.lam_apply(h)
        M = G.T @ W.lam_apply(G)
        K = np.zeros((n + p, n + p))
        K[:n, :n] = 0.5 * (M + M.T)
        if p:
            K[:n, n:] = A.T
            K[n:, :n] = A
        self.Kf = lu_factor(K)
        u2v2 = lu_solve(self.Kf, np.concatenate([G.T @ self.Lh - c, b]))
        self.u2, self.v2 = u2v2[:n], u2v2[n:]
        self.den = (-c @ self.u2 - b @ self.v2 - self.Lh @ (G @ self.u2)
                    + h @ self.Lh + kappa / tau)

    def _solve_once(self, q1, q2, q3, q4, qs, qtk):
        W, G, h, c, A, b = self.W, self.G, self.h, self.c, self.A, self.b
        tau, kappa = self.tau, self.kappa
        gs = W.Winv(qs)
        Lq3 = W.lam_apply(q3)
        u1v1 = lu_solve(self.Kf, np.concatenate([q1 - G.T @ gs - G.T @ Lq3, -q2]))
        u1, v1 = u1v1[:self.n], u1v1[self.n:]
        num = (q4 + c @ u1 + b @ v1 + h @ gs + h @ Lq3
               + self.Lh @ (G @ u1) + qtk / tau)
        dtau = num / self.den
        dx = u1 + dtau * self.u2
        dy = v1 + dtau * self.v2
        ds = -q3 - G @ dx + h * dtau
        dz = gs + Lq3 + W.lam_apply(G @ dx) - self.Lh * dtau
        dkap = (qtk - kappa * dtau) / tau
        return dx, dy, dz, ds, dtau, dkap

    def _residual(self, d, q1, q2, q3, q4, qs, qtk):
        W, G, h, c, A, b = self.W, self.G, self.h, self.c, self.A, self.b
        tau, kappa = self.tau, self.kappa
        dx, dy, dz, ds, dtau, dkap = d
        p1 = q1 - (A.T @ dy + G.T @ dz + c * dtau)
        p2 = q2 - (-A @ dx + b * dtau)
        p3 = q3 - (-G @ dx + h * dtau - ds)
        p4 = q4 - (-c @ dx - b @ dy - h @ dz - dkap)
        ps = qs - (W.WinvT(ds) + W.W(dz))
        ptk = qtk - (kappa * dtau + tau * dkap)
        nrm = max(np.max(np.abs(p1)), np.max(np.abs(p3)), abs(p4),
                  np.max(np.abs(ps)), abs(ptk),
                  float(np.max(np.abs(p2))) if p2.size else 0.0)
        return (p1, p2, p3, p4, ps, ptk), nrm

    def solve(self, q1, q2, q3, q4, qs, qtk, refine):
        scale = max(np.max(np.abs(q1)), np.max(np.abs(q3)), abs(q4),
                    np.max(np.abs(qs)), abs(qtk), 1.0)
        d = self._solve_once(q1, q2, q3, q4, qs, qtk)
        p, nrm = self._residual(d, q1, q2, q3, q4, qs, qtk)
        best_d, best_nrm = d, nrm
        for _ in range(refine):
            if nrm <= 1e-13 * scale:
                break
            e = self._solve_once(*p)
            d = tuple(a + da for a, da in zip(d, e))
            p, new_nrm = self._residual(d, q1, q2, q3, q4, qs, qtk)
            if new_nrm < best_nrm:
                best_d, best_nrm = d, new_nrm
            if new_nrm > 0.3 * nrm:
                break   # refinement has stagnated; more passes cannot help
            nrm = new_nrm
        return best_d


def _solve_raw(problem: SdpProblem, opts: SolverOptions) -> SdpSolution:
    c, G, h, cone = problem.c, problem.G, problem.h, problem.cone
    A = problem.A if problem.A is not None else np.zeros((0, problem.n_vars))
    b = problem.b if problem.b is not None else np.zeros(0)
    n, p = problem.n_vars, A.shape[0]

    e = cone.identity()
    x = np.zeros(n)
    y = np.zeros(p)
    z = e.copy()
    s = e.copy()
    tau, kappa = 1.0, 1.0
    nu = cone.degree + 1
    nh, nb, nc = np.linalg.norm(h), np.linalg.norm(b), np.linalg.norm(c)

    history: list[IterationRecord] = []
    best = (x, y, z, s, tau)
    best_metric = np.inf
    metric_log: list[float] = []
    stalls = 0
    failed = False

    def measure(x, y, z, s, tau):
        xh, yh, zh, sh = x / tau, y / tau, z / tau, s / tau
        pres = np.linalg.norm(G @ xh + sh - h)
        peq = np.linalg.norm(A @ xh - b) if p else 0.0
        dres = np.linalg.norm(G.T @ zh + A.T @ yh + c)
        pobj = float(c @ xh)
        dobj = float(-h @ zh - b @ yh)
        gap = float(sh @ zh)
        relgap = gap / max(1.0, abs(pobj))
        slack = (dres * np.linalg.norm(xh) + pres * np.linalg.norm(zh)
                 + peq * np.linalg.norm(yh))
        return xh, yh, zh, sh, pres, peq, dres, pobj, dobj, gap, relgap, slack

    def finish(status, x, y, z, s, tau, iters, cert=np.nan):
        xh, yh, zh, sh, pres, peq, dres, pobj, dobj, gap, relgap, _ = measure(
            x, y, z, s, tau)
        return SdpSolution(
            status=status, x=xh, s=sh, z=zh, y=yh, pobj=pobj, dobj=dobj,
            primal_residual=max(pres, peq), dual_residual=dres,
            duality_gap=relgap, iterations=iters,
            certificate_residual=cert, history=history)

    it = 0
    for it in range(opts.max_iters):
        r1 = A.T @ y + G.T @ z + c * tau
        r2 = -A @ x + b * tau
        r3 = -G @ x + h * tau - s
        r4 = -c @ x - b @ y - h @ z - kappa
        mu = (s @ z + tau * kappa) / nu

        (xh, yh, zh, sh, pres, peq, dres,
         pobj, dobj, gap, relgap, slack) = measure(x, y, z, s, tau)
        history.append(IterationRecord(pobj, dobj, max(pres, peq), dres, gap, slack))
        metric = max(pres / (1 + nh), peq / (1 + nb), dres / (1 + nc), relgap)
        if metric < best_metric:
            best_metric = metric
            best = (x.copy(), y.copy(), z.copy(), s.copy(), tau)
        metric_log.append(best_metric)
        # a long plateau means the iteration is numerically exhausted
        if it >= 24 and best_metric > metric_log[-13] / 1.5:
            break

        if (pres <= opts.feastol * (1 + nh) and peq <= opts.feastol * (1 + nb)
                and dres <= opts.feastol * (1 + nc) and relgap <= opts.gaptol):
            return finish(Status.OPTIMAL, x, y, z, s, tau, it)

        # Farkas-type certificates from the homogeneous embedding
        hz_by = h @ z + b @ y
        if hz_by < -1e-12 and tau <= 1e-6 * max(1.0, kappa):
            zb, yb = z / (-hz_by), y / (-hz_by)
            cert = np.linalg.norm(G.T @ zb + A.T @ yb)
            if cert <= opts.cert_tol:
                sol = SdpSolution(
                    status=Status.INFEASIBLE, z=zb, y=yb, iterations=it,
                    certificate_residual=float(cert), history=history)
                return sol
        cx = c @ x
        if cx < -1e-12 and tau <= 1e-6 * max(1.0, kappa):
            xb, sb = x / (-cx), s / (-cx)
            cert = np.linalg.norm(G @ xb + sb) + (np.linalg.norm(A @ xb) if p else 0.0)
            if cert <= opts.cert_tol:
                sol = SdpSolution(
                    status=Status.UNBOUNDED, x=xb, s=sb, iterations=it,
                    certificate_residual=float(cert), history=history)
                return sol

        try:
            W = _Scaling(cone, s, z)
            NS = _NewtonSystem(W, G, h, c, A, b, tau, kappa)
        except (np.linalg.LinAlgError, ValueError):
            failed = True
            break
        lam = W.lam_vec()

        da = NS.solve(-r1, -r2, -r3, -r4, -lam, -tau * kappa, opts.refine)
        if any(not np.all(np.isfinite(np.atleast_1d(v))) for v in da):
            failed = True
            break
        ds_sc = W.WinvT(da[3])
        dz_sc = W.W(da[2])
        amax = min(W.max_step(ds_sc), W.max_step(dz_sc))
        if da[4] < 0:
            amax = min(amax, -tau / da[4])
        if da[5] < 0:
            amax = min(amax, -kappa / da[5])
        alpha_aff = min(1.0, amax)
        mu_aff = ((s + alpha_aff * da[3]) @ (z + alpha_aff * da[2])
                  + (tau + alpha_aff * da[4]) * (kappa + alpha_aff * da[5])) / nu
        sigma = max(0.0, min(1.0, mu_aff / mu)) ** 3

        qs = W.comp_rhs(sigma * mu, ds_sc, dz_sc)
        qtk = sigma * mu - tau * kappa - da[4] * da[5]
        d = NS.solve(-r1, -r2, -r3, -r4, qs, qtk, opts.refine)
        dx, dy, dz, ds, dtau, dkap = d
        if not all(np.all(np.isfinite(np.atleast_1d(v))) for v in d):
            failed = True
            break
        amax = min(W.max_step(W.WinvT(ds)), W.max_step(W.W(dz)))
        if dtau < 0:
            amax = min(amax, -tau / dtau)
        if dkap < 0:
            amax = min(amax, -kappa / dkap)
        alpha = min(1.0, opts.step * amax)

        # round-off can push s or z out of the cone at 99% of the boundary
        ok = False
        for _ in range(40):
            s_n = s + alpha * ds
            z_n = z + alpha * dz
            t_n = tau + alpha * dtau
            k_n = kappa + alpha * dkap
            if t_n > 0 and k_n > 0 and cone.contains(s_n) and cone.contains(z_n):
                ok = True
                break
            alpha *= 0.8
        if not ok or alpha < 1e-10:
            stalls += 1
            if stalls >= 2:
                break
            continue
        x = x + alpha * dx
        y = y + alpha * dy
        s, z, tau, kappa = s_n, z_n, t_n, k_n
        if alpha < 1e-5:
            stalls += 1
            if stalls >= 3:
                break
        else:
            stalls = 0

    x, y, z, s, tau = best
    sol = finish(Status.MAX_ITERS, x, y, z, s, tau, it + 1)
    if (sol.primal_residual <= opts.acceptable * (1 + max(nh, nb))
            and sol.dual_residual <= opts.acceptable * (1 + nh)
            and sol.duality_gap <= opts.acceptable):
        sol.status = Status.OPTIMAL
    elif failed and sol.status is Status.MAX_ITERS:
        sol.status = Status.NUMERICAL_FAILURE
    return sol


def _equilibrated(problem: SdpProblem, sol: SdpSolution):
    """Column/row scalings sized from a previous solution's magnitudes."""
    cone = problem.cone
    d = np.maximum(1.0, np.abs(sol.x))
    rho = np.ones(cone.dim)
    for off, dim in cone.psd_offsets:
        t = svec_len(dim)
        rho[off:off + t] = max(1.0, np.linalg.norm(sol.z[off:off + t]))
    oo = cone.orthant_offset
    rho[oo:] = np.maximum(1.0, np.abs(sol.z[oo:]))
    req = np.maximum(1.0, np.abs(sol.y)) if problem.A is not None else None
    scaled = SdpProblem(
        c=problem.c * d,
        G=(problem.G * d[None, :]) * rho[:, None],
        h=problem.h * rho,
        cone=cone,
        A=(problem.A * d[None, :]) * (req[:, None]) if problem.A is not None else None,
        b=problem.b * req if problem.A is not None else None,
    )
    return scaled, d, rho, req


def solve(problem: SdpProblem, opts: SolverOptions | None = None) -> SdpSolution:
    """Solve a conic program, re-equilibrating when tolerances are missed.

    On ``Status.OPTIMAL`` the solution satisfies the residual contract
    ``primal_residual, dual_residual <= 1e-7 * (1 + ||h||)`` and relative
    duality gap ``<= 1e-7`` (strict targets are tighter).  ``INFEASIBLE``
    and ``UNBOUNDED`` carry a normalized improving-ray certificate whose
    residual is reported in ``certificate_residual``.
    """
    opts = opts or SolverOptions()
    nh, nc = np.linalg.norm(problem.h), np.linalg.norm(problem.c)
    nb = np.linalg.norm(problem.b) if problem.b is not None else 0.0

    def contract_ok(r: SdpSolution) -> bool:
        # the residual contract is normalized by the constant side only
        return (r.x is not None
                and r.primal_residual <= opts.acceptable * (1 + max(nh, nb))
                and r.dual_residual <= opts.acceptable * (1 + nh)
                and r.duality_gap <= opts.acceptable)

    # a short first pass suffices for well-scaled problems; badly scaled
    # ones are finished by the re-equilibrated passes below
    first_opts = opts if opts.equilibrate_passes <= 1 else replace(
        opts, max_iters=min(opts.max_iters, 60))
    sol = _solve_raw(problem, first_opts)
    if sol.status in (Status.INFEASIBLE, Status.UNBOUNDED):
        return sol
    if sol.status is Status.OPTIMAL and contract_ok(sol):
        return sol
    best = sol
    if best.x is not None and max(
            best.primal_residual / (1 + nh), best.dual_residual / (1 + nh),
            best.duality_gap) > 1e-2:
        # nowhere near optimal: rescaling from this iterate cannot help
        return best
    for _ in range(max(0, opts.equilibrate_passes - 1)):
        if best.x is None:
            return best
        scaled, d, rho, req = _equilibrated(problem, best)
        r2 = _solve_raw(scaled, opts)
        if r2.status in (Status.INFEASIBLE, Status.UNBOUNDED):
            # map the ray back and re-verify against the original data
            if r2.status is Status.INFEASIBLE and r2.z is not None:
                z0 = r2.z * rho
                y0 = r2.y * req if req is not None else r2.y
                den = -(problem.h @ z0 + (problem.b @ y0 if problem.b is not None else 0.0))
                if den > 0:
                    z0, y0 = z0 / den, y0 / den
                    AtY = problem.A.T @ y0 if problem.A is not None else 0.0
                    cert = np.linalg.norm(problem.G.T @ z0 + AtY)
                    if cert <= 1e-6:
                        r2.z, r2.y = z0, y0
                        r2.certificate_residual = float(cert)
                        return r2
            return best
        if r2.x is None:
            return best
        r2.x = r2.x * d
        r2.s = r2.s / rho
        r2.z = r2.z * rho
        if req is not None:
            r2.y = r2.y * req
        x, z, y2, s2 = r2.x, r2.z, r2.y, r2.s
        AtY = problem.A.T @ y2 if problem.A is not None else 0.0
        peq = np.linalg.norm(problem.A @ x - problem.b) if problem.A is not None else 0.0
        r2.primal_residual = max(np.linalg.norm(problem.G @ x + s2 - problem.h), peq)
        r2.dual_residual = np.linalg.norm(problem.G.T @ z + AtY + problem.c)
        r2.duality_gap = float(s2 @ z) / max(1.0, abs(problem.c @ x))
        m2 = max(r2.primal_residual / (1 + nh), r2.dual_residual / (1 + nc),
                 r2.duality_gap)
        m1 = max(best.primal_residual / (1 + nh), best.dual_residual / (1 + nc),
                 best.duality_gap)
        if m2 < m1:
            best = r2
        if contract_ok(best):
            best.status = Status.OPTIMAL
            return best
    best.status = Status.OPTIMAL if contract_ok(best) else (
        best.status if best.status is not Status.OPTIMAL else Status.MAX_ITERS)
    return best


def check_feasible_point(problem: SdpProblem, x) -> FeasibilityReport:
    """Report the cone margins of ``h - Gx`` without side effects."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (problem.n_vars,):
        raise ValueError(
            f"x has length {x.shape[0]}, expected {problem.n_vars}")
    slack = problem.h - problem.G @ x
    cone = problem.cone
    margins = []
    for off, d in cone.psd_offsets:
        margins.append(float(np.linalg.eigvalsh(
            smat(slack[off:off + svec_len(d)], d))[0]))
    o = slack[cone.orthant_offset:]
    ort = float(o.min()) if o.size else None
    eq = (float(np.linalg.norm(problem.A @ x - problem.b))
          if problem.A is not None else 0.0)
    return FeasibilityReport(psd_margins=margins, orthant_margin=ort, eq_residual=eq)


def dump_problem(problem: SdpProblem) -> str:
    """Plain-text sparse triplet dump for cross-checking with other solvers.

    One line per nonzero, five whitespace-separated fields:

        block row col var value

    * ``block`` indexes PSD blocks from 0; the orthant is block ``P`` (the
      number of PSD blocks) with ``row == col`` the orthant entry; equality
      rows use block -2.
    * ``row``/``col`` index within the block (PSD entries upper triangle).
    * ``var`` is the decision-variable index of a G/A coefficient, or -1
      for the constant side (h or b).
    * objective entries are written as block -1 with row = col = 0.

    PSD coefficients are the plain matrix entries (no sqrt(2) scaling).
    """
    out = io.StringIO()
    out.write("# sparse conic problem dump v1\n")
    out.write("# block row col var value\n")
    for j, cj in enumerate(problem.c):
        if cj != 0.0:
            out.write(f"-1 0 0 {j} {cj:.17g}\n")
    cone = problem.cone
    nb = len(cone.psd_dims)
    cols = [problem.h] + [problem.G[:, j] for j in range(problem.n_vars)]
    for var, colvec in enumerate(cols, start=-1):
        for blk, (off, d) in enumerate(cone.psd_offsets):
            M = smat(colvec[off:off + svec_len(d)], d)
            iu, ju = np.triu_indices(d)
            for i, j in zip(iu, ju):
                if M[i, j] != 0.0:
                    out.write(f"{blk} {i} {j} {var} {M[i, j]:.17g}\n")
        o = cone.orthant_offset
        for i, v in enumerate(colvec[o:]):
            if v != 0.0:
                out.write(f"{nb} {i} {i} {var} {v:.17g}\n")
    if problem.A is not None:
        for i in range(problem.A.shape[0]):
            for j in range(problem.n_vars):
                if problem.A[i, j] != 0.0:
                    out.write(f"-2 {i} 0 {j} {problem.A[i, j]:.17g}\n")
            if problem.b[i] != 0.0:
                out.write(f"-2 {i} 0 -1 {problem.b[i]:.17g}\n")
    return out.getvalue()
