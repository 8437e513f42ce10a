"""Lowering of the two observer-synthesis matrix-inequality problems into
standard conic form.

Both problems minimize a weighted l1 norm of the sensor scaling vector beta
subject to block LMIs in (X, Y, beta) and, for the H2 case, an auxiliary
matrix Q with a trace bound.  The builders own all sign and scaling
conventions:

* inequalities are emitted in ">= 0" orientation with the strict "< 0" of
  the source inequalities replaced by a configurable margin shift,
* the state coordinates are balanced internally (a diagonal similarity
  computed from the column norms of the stacked [A; C_y; C_z]); this is
  invisible in the public results because :class:`VariableLayout` maps the
  stored variables back to the original coordinates,
* the fixed-attenuation H2 problem is additionally normalized by gamma
  (output matrix divided by gamma, trace bound rescaled to 1); without this
  the trace-bound multiplier grows like 1/gamma^2 and desk-scale solvers
  lose the dual residual at small gamma.  The layout records the factor, so
  extracted variables are always in original (unbalanced, unnormalized)
  units.

Margin shifts are chosen so that the *original-form* inequalities hold with
at least the requested margin for any feasible point of the lowered
problem.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .model import LtiPlant, PrecisionVector
from .sdp import ConeSpec, SdpProblem, SdpSolution, Status, svec, svec_len

__all__ = [
    "DesignSpec",
    "VariableLayout",
    "DesignResult",
    "DesignStatus",
    "ConditioningError",
    "build_h2",
    "build_hinf",
    "build_design_problem",
    "add_precision_bounds",
    "recover_design",
    "theorem_margins",
    "margins_feasible",
]

# caps that bound the optimal face when the attenuation penalty is zero
_FREE_T_CAP = 1e12
_FREE_GAMMA_CAP = 1e6


class ConditioningError(ValueError):
    """Recovered X is numerically singular; the gain is unreliable."""


class DesignStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    POLISH_INFEASIBLE = "polish_infeasible"
    MAX_ITERS = "max_iters"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True)
class DesignSpec:
    """What to design: norm type, attenuation handling, weights and bounds.

    Exactly one of ``gamma`` (fixed attenuation) and ``penalty`` (the
    attenuation enters the objective with weight ``penalty``) must be set.
    ``rho`` defaults to unit weights; ``kappa_sq_max`` entries of ``inf``
    mean unbounded.
    """

    norm: str                                # "h2" | "hinf"
    gamma: float | None = None
    penalty: float | None = None
    rho: np.ndarray | None = None
    kappa_sq_max: np.ndarray | None = None
    margin: float = 1e-8

    def __post_init__(self):
        if self.norm not in ("h2", "hinf"):
            raise ValueError(f"norm must be 'h2' or 'hinf', got {self.norm!r}")
        if (self.gamma is None) == (self.penalty is None):
            raise ValueError("exactly one of gamma and penalty must be given")
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.penalty is not None and self.penalty < 0:
            raise ValueError("penalty must be nonnegative")
        if self.margin <= 0:
            raise ValueError("margin must be positive")
        if self.rho is not None:
            r = np.atleast_1d(np.asarray(self.rho, dtype=float))
            if np.any(r < 0) or not np.all(np.isfinite(r)):
                raise ValueError("rho must be finite and nonnegative")
            object.__setattr__(self, "rho", r)
        if self.kappa_sq_max is not None:
            k = np.atleast_1d(np.asarray(self.kappa_sq_max, dtype=float))
            if np.any(k < 0):
                raise ValueError("kappa_sq_max must be nonnegative")
            object.__setattr__(self, "kappa_sq_max", k)

    @property
    def fixed(self) -> bool:
        return self.gamma is not None

    def rho_vector(self, ny: int) -> np.ndarray:
        if self.rho is None:
            return np.ones(ny)
        if self.rho.size != ny:
            raise ValueError(f"rho has length {self.rho.size}, expected {ny}")
        return self.rho


@dataclass
class VariableLayout:
    """Map between the scalar decision vector and the named variables.

    Stored variables live in balanced (and, for fixed-gamma H2, gamma
    normalized) coordinates; :meth:`extract` and :meth:`pack` convert to and
    from original-coordinate matrices.  Symmetric blocks use upper-triangle
    vectorization, row by row.
    """

    norm: str
    nx: int
    ny: int
    nz: int
    nd: int
    x_slice: slice
    y_slice: slice
    q_slice: slice | None
    beta_slice: slice
    gamma_index: int | None
    n_vars: int
    balance: np.ndarray            # diagonal T; stored X = T^-T X T^-1
    q_scale: float = 1.0           # original Q = q_scale * stored Q
    fixed_gamma: float | None = None

    def _triu(self, n):
        return np.triu_indices(n)

    def _sym_from(self, v, n):
        iu, ju = self._triu(n)
        m = np.zeros((n, n))
        m[iu, ju] = v
        m[ju, iu] = v
        return m

    def _sym_to(self, m, n):
        iu, ju = self._triu(n)
        return np.asarray(m, dtype=float)[iu, ju]

    def extract(self, x: np.ndarray) -> dict:
        """Named variables in original coordinates from a decision vector."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_vars,):
            raise ValueError(f"decision vector has length {x.size}, "
                             f"expected {self.n_vars}")
        T = self.balance
        X = self._sym_from(x[self.x_slice], self.nx) * np.outer(T, T)
        Y = x[self.y_slice].reshape(self.nx, self.ny) * T[:, None]
        out = {"X": X, "Y": Y, "beta": x[self.beta_slice].copy()}
        if self.q_slice is not None:
            out["Q"] = self._sym_from(x[self.q_slice], self.nz) * self.q_scale
        if self.gamma_index is not None:
            out["gamma_var"] = float(x[self.gamma_index])
        return out

    def pack(self, X, Y, beta, Q=None, gamma_var=None) -> np.ndarray:
        """Decision vector from original-coordinate variables."""
        T = self.balance
        x = np.zeros(self.n_vars)
        x[self.x_slice] = self._sym_to(np.asarray(X) / np.outer(T, T), self.nx)
        Y = np.asarray(Y, dtype=float).reshape(self.nx, self.ny)
        x[self.y_slice] = (Y / T[:, None]).ravel()
        beta = np.atleast_1d(np.asarray(beta, dtype=float))
        if beta.shape != (self.ny,):
            raise ValueError(f"beta has length {beta.size}, expected {self.ny}")
        x[self.beta_slice] = beta
        if self.q_slice is not None:
            if Q is None:
                raise ValueError("Q is required for the H2 layout")
            x[self.q_slice] = self._sym_to(np.asarray(Q) / self.q_scale, self.nz)
        if self.gamma_index is not None:
            if gamma_var is None:
                raise ValueError("gamma_var is required in penalized mode")
            x[self.gamma_index] = float(gamma_var)
        return x


@dataclass
class DesignResult:
    """Observer design output: gain, precisions, attenuation, diagnostics."""

    L: np.ndarray
    kappa_sq: PrecisionVector
    gamma: float
    objective: float               # weighted l1 norm of kappa_sq
    support: tuple[int, ...]
    status: DesignStatus
    iterations: list = field(default_factory=list)   # (beta, unit objective)
    diagnostics: dict = field(default_factory=dict)


def _balance_vector(plant: LtiPlant, cz: np.ndarray) -> np.ndarray:
    """Diagonal similarity scaling, normalized to entries >= 1.

    Entries >= 1 keep the margin shifts conservative when mapping the
    balanced inequalities back to original coordinates.
    """
    stack = np.vstack([plant.A, plant.C_y, cz])
    t = np.linalg.norm(stack, axis=0)
    t[t <= 0.0] = 1.0
    return t / t.min()


def _sym_basis(n):
    iu, ju = np.triu_indices(n)
    for i, j in zip(iu, ju):
        e = np.zeros((n, n))
        e[i, j] = 1.0
        e[j, i] = 1.0
        yield e


def build_h2(plant: LtiPlant, spec: DesignSpec):
    """Lower the H2 synthesis problem to conic form.

    Emits one PSD block for the main LMI (side nx+nd+ny), one for the
    trace-coupling LMI (side nz+nx), one for X positive definiteness, one
    for Q >= 0, and orthant rows for beta >= 0 plus the trace bound.  In
    penalized mode the trace bound couples to an extra scalar t >= trace(Q)
    with gamma = sqrt(t) recovered after the solve.
    """
    if spec.norm != "h2":
        raise ValueError("spec.norm must be 'h2'")
    nx, nd, ny, nz = plant.n_states, plant.n_dist, plant.n_sensors, plant.n_outputs
    eps = spec.margin
    fixed = spec.fixed
    if fixed:
        gamma = float(spec.gamma)
        if gamma * gamma <= 2.0 * eps:
            raise ValueError("gamma^2 must exceed twice the LMI margin")
        cz_eff = plant.C_z / gamma
        q_scale = gamma * gamma
        eps_c = eps / min(1.0, gamma * gamma)
        eps_t = eps / (gamma * gamma)
    else:
        cz_eff = plant.C_z
        q_scale = 1.0
        eps_c = eps
        eps_t = eps

    T = _balance_vector(plant, cz_eff)
    Ti = 1.0 / T
    Ab = (T[:, None] * plant.A) * Ti[None, :]
    Cyb = plant.C_y * Ti[None, :]
    Czb = cz_eff * Ti[None, :]
    BdS = (T[:, None] * plant.B_d) @ plant.S_d
    DdS = plant.D_d @ plant.S_d

    tX, nY, tQ = svec_len(nx), nx * ny, svec_len(nz)
    n = tX + nY + tQ + ny + (0 if fixed else 1)
    x_sl = slice(0, tX)
    y_sl = slice(tX, tX + nY)
    q_sl = slice(tX + nY, tX + nY + tQ)
    b_sl = slice(tX + nY + tQ, tX + nY + tQ + ny)
    g_idx = None if fixed else n - 1

    d1, d2 = nx + nd + ny, nz + nx
    n_orth = ny + 1
    cone = ConeSpec((d1, d2, nx, nz), n_orth)
    G = np.zeros((cone.dim, n))
    h = np.zeros(cone.dim)
    o1, o2 = 0, svec_len(d1)
    o3 = o2 + svec_len(d2)
    o4 = o3 + svec_len(nx)
    oo = o4 + svec_len(nz)

    # main LMI, negated: -[[M11, M12, Y], [M12', -I, 0], [Y', 0, -diag b]] >= eps I
    const = np.zeros((d1, d1))
    const[nx:nx + nd, nx:nx + nd] = -np.eye(nd)
    h[o1:o2] = svec(-const - eps * np.eye(d1))
    col = 0
    for E in _sym_basis(nx):
        m11 = E @ Ab
        m11 = m11 + m11.T
        m12 = E @ BdS
        blk = np.zeros((d1, d1))
        blk[:nx, :nx] = m11
        blk[:nx, nx:nx + nd] = m12
        blk[nx:nx + nd, :nx] = m12.T
        G[o1:o2, col] = svec(blk)
        col += 1
    for i in range(nx):
        for j in range(ny):
            Eij = np.zeros((nx, ny))
            Eij[i, j] = 1.0
            m11 = Eij @ Cyb
            m11 = m11 + m11.T
            m12 = Eij @ DdS
            blk = np.zeros((d1, d1))
            blk[:nx, :nx] = m11
            blk[:nx, nx:nx + nd] = m12
            blk[nx:nx + nd, :nx] = m12.T
            blk[:nx, nx + nd:] = Eij
            blk[nx + nd:, :nx] = Eij.T
            G[o1:o2, col] = svec(blk)
            col += 1
    col += tQ
    for j in range(ny):
        blk = np.zeros((d1, d1))
        blk[nx + nd + j, nx + nd + j] = -1.0
        G[o1:o2, col] = svec(blk)
        col += 1

    # coupling LMI, negated: [[Q, -Cz], [-Cz', X]] >= eps_c I
    const = np.zeros((d2, d2))
    const[:nz, nz:] = -Czb
    const[nz:, :nz] = -Czb.T
    h[o2:o3] = svec(const - eps_c * np.eye(d2))
    for k, E in enumerate(_sym_basis(nx)):
        blk = np.zeros((d2, d2))
        blk[nz:, nz:] = E
        G[o2:o3, k] = -svec(blk)
    for k, E in enumerate(_sym_basis(nz)):
        blk = np.zeros((d2, d2))
        blk[:nz, :nz] = E
        G[o2:o3, tX + nY + k] = -svec(blk)

    # X >= eps I
    h[o3:o4] = svec(-eps * np.eye(nx))
    for k, E in enumerate(_sym_basis(nx)):
        G[o3:o4, k] = -svec(E)

    # Q >= 0
    for k, E in enumerate(_sym_basis(nz)):
        G[o4:oo, tX + nY + k] = -svec(E)

    # orthant: beta >= 0 and the trace bound
    for j in range(ny):
        G[oo + j, tX + nY + tQ + j] = -1.0
    iq, jq = np.triu_indices(nz)
    for k in range(tQ):
        if iq[k] == jq[k]:
            G[oo + ny, tX + nY + k] = 1.0
    if fixed:
        h[oo + ny] = 1.0 - eps_t
    else:
        G[oo + ny, g_idx] = -1.0   # trace(Q) - t <= -eps
        h[oo + ny] = -eps

    c = np.zeros(n)
    c[b_sl] = spec.rho_vector(ny)
    if not fixed:
        c[g_idx] = spec.penalty

    layout = VariableLayout(
        norm="h2", nx=nx, ny=ny, nz=nz, nd=nd,
        x_slice=x_sl, y_slice=y_sl, q_slice=q_sl, beta_slice=b_sl,
        gamma_index=g_idx, n_vars=n, balance=T, q_scale=q_scale,
        fixed_gamma=spec.gamma)
    problem = SdpProblem(c=c, G=G, h=h, cone=cone)
    if not fixed and spec.penalty == 0.0:
        problem = _append_orthant_rows(
            problem, [( {g_idx: 1.0}, _FREE_T_CAP )])
    return problem, layout


def build_hinf(plant: LtiPlant, spec: DesignSpec):
    """Lower the H-infinity synthesis problem to conic form.

    Single main PSD block of side nx+nd+nz+ny plus X positive definiteness
    and beta >= 0.  The stored (X, Y) are the attenuation-rescaled pair of
    the underlying derivation, so the gain recovery L = X^-1 Y is identical
    to the H2 case and kappa^2 = beta / gamma.  In penalized mode gamma is
    a decision variable (it enters the LMI diagonal linearly).
    """
    if spec.norm != "hinf":
        raise ValueError("spec.norm must be 'hinf'")
    nx, nd, ny, nz = plant.n_states, plant.n_dist, plant.n_sensors, plant.n_outputs
    eps = spec.margin
    fixed = spec.fixed
    if fixed and spec.gamma <= 2.0 * eps:
        raise ValueError("gamma must exceed twice the LMI margin")

    T = _balance_vector(plant, plant.C_z)
    Ti = 1.0 / T
    Ab = (T[:, None] * plant.A) * Ti[None, :]
    Cyb = plant.C_y * Ti[None, :]
    Czb = plant.C_z * Ti[None, :]
    BdS = (T[:, None] * plant.B_d) @ plant.S_d
    DdS = plant.D_d @ plant.S_d

    tX, nY = svec_len(nx), nx * ny
    n = tX + nY + ny + (0 if fixed else 1)
    x_sl = slice(0, tX)
    y_sl = slice(tX, tX + nY)
    b_sl = slice(tX + nY, tX + nY + ny)
    g_idx = None if fixed else n - 1

    d1 = nx + nd + nz + ny
    cone = ConeSpec((d1, nx), ny)
    G = np.zeros((cone.dim, n))
    h = np.zeros(cone.dim)
    o1, o2 = 0, svec_len(d1)
    o3 = o2 + svec_len(nx)

    const = np.zeros((d1, d1))
    const[:nx, nx + nd:nx + nd + nz] = Czb.T
    const[nx + nd:nx + nd + nz, :nx] = Czb
    if fixed:
        const[nx:nx + nd, nx:nx + nd] = -spec.gamma * np.eye(nd)
        const[nx + nd:nx + nd + nz, nx + nd:nx + nd + nz] = -spec.gamma * np.eye(nz)
    h[o1:o2] = svec(-const - eps * np.eye(d1))
    col = 0
    for E in _sym_basis(nx):
        m11 = E @ Ab
        m11 = m11 + m11.T
        m12 = E @ BdS
        blk = np.zeros((d1, d1))
        blk[:nx, :nx] = m11
        blk[:nx, nx:nx + nd] = m12
        blk[nx:nx + nd, :nx] = m12.T
        G[o1:o2, col] = svec(blk)
        col += 1
    for i in range(nx):
        for j in range(ny):
            Eij = np.zeros((nx, ny))
            Eij[i, j] = 1.0
            m11 = Eij @ Cyb
            m11 = m11 + m11.T
            m12 = Eij @ DdS
            blk = np.zeros((d1, d1))
            blk[:nx, :nx] = m11
            blk[:nx, nx:nx + nd] = m12
            blk[nx:nx + nd, :nx] = m12.T
            blk[:nx, nx + nd + nz:] = Eij
            blk[nx + nd + nz:, :nx] = Eij.T
            G[o1:o2, col] = svec(blk)
            col += 1
    for j in range(ny):
        blk = np.zeros((d1, d1))
        blk[nx + nd + nz + j, nx + nd + nz + j] = -1.0
        G[o1:o2, col] = svec(blk)
        col += 1
    if not fixed:
        blk = np.zeros((d1, d1))
        blk[nx:nx + nd, nx:nx + nd] = -np.eye(nd)
        blk[nx + nd:nx + nd + nz, nx + nd:nx + nd + nz] = -np.eye(nz)
        G[o1:o2, g_idx] = svec(blk)

    h[o2:o3] = svec(-eps * np.eye(nx))
    for k, E in enumerate(_sym_basis(nx)):
        G[o2:o3, k] = -svec(E)

    for j in range(ny):
        G[o3 + j, tX + nY + j] = -1.0

    c = np.zeros(n)
    c[b_sl] = spec.rho_vector(ny)
    if not fixed:
        c[g_idx] = spec.penalty

    layout = VariableLayout(
        norm="hinf", nx=nx, ny=ny, nz=nz, nd=nd,
        x_slice=x_sl, y_slice=y_sl, q_slice=None, beta_slice=b_sl,
        gamma_index=g_idx, n_vars=n, balance=T, q_scale=1.0,
        fixed_gamma=spec.gamma)
    problem = SdpProblem(c=c, G=G, h=h, cone=cone)
    if not fixed and spec.penalty == 0.0:
        problem = _append_orthant_rows(
            problem, [({g_idx: 1.0}, _FREE_GAMMA_CAP)])
    return problem, layout


def _append_orthant_rows(problem: SdpProblem, rows) -> SdpProblem:
    """Append rows ``sum coeff_j x_j <= bound`` to the orthant block."""
    k = len(rows)
    if k == 0:
        return problem
    cone = ConeSpec(problem.cone.psd_dims, problem.cone.nonneg_dim + k)
    Gext = np.zeros((k, problem.n_vars))
    hext = np.zeros(k)
    for i, (coeffs, bound) in enumerate(rows):
        for j, v in coeffs.items():
            Gext[i, j] = v
        hext[i] = bound
    return SdpProblem(
        c=problem.c.copy(),
        G=np.vstack([problem.G, Gext]),
        h=np.concatenate([problem.h, hext]),
        cone=cone,
        A=None if problem.A is None else problem.A.copy(),
        b=None if problem.b is None else problem.b.copy(),
    )


def add_precision_bounds(problem: SdpProblem, layout: VariableLayout,
                         spec: DesignSpec) -> SdpProblem:
    """Append upper bounds on the precisions as orthant rows.

    H2 bounds the scaling variables directly (beta_i <= kmax_i); for the
    H-infinity problem beta = gamma * kappa^2, so the rows carry the gamma
    factor: beta_i <= gamma * kmax_i (a fixed coefficient for fixed gamma,
    a coupling to the gamma variable in penalized mode).
    """
    if spec.kappa_sq_max is None:
        raise ValueError("spec.kappa_sq_max is not set")
    kmax = spec.kappa_sq_max
    if kmax.size != layout.ny:
        raise ValueError(
            f"kappa_sq_max has length {kmax.size}, expected {layout.ny}")
    rows = []
    for i in range(layout.ny):
        if not np.isfinite(kmax[i]):
            continue
        bidx = layout.beta_slice.start + i
        if layout.norm == "h2":
            rows.append(({bidx: 1.0}, float(kmax[i])))
        elif layout.gamma_index is None:
            rows.append(({bidx: 1.0}, float(layout.fixed_gamma) * float(kmax[i])))
        else:
            rows.append(({bidx: 1.0, layout.gamma_index: -float(kmax[i])}, 0.0))
    return _append_orthant_rows(problem, rows)


def build_design_problem(plant: LtiPlant, spec: DesignSpec):
    """Build the full conic program for a spec, bounds included."""
    builder = build_h2 if spec.norm == "h2" else build_hinf
    problem, layout = builder(plant, spec)
    if spec.kappa_sq_max is not None:
        problem = add_precision_bounds(problem, layout, spec)
    return problem, layout


def recover_design(sol: SdpSolution, layout: VariableLayout, spec: DesignSpec,
                   plant: LtiPlant, support_tol: float = 1e-6) -> DesignResult:
    """Map an optimal conic solution back to (L, kappa^2, gamma).

    The gain is L = X^-1 Y for both norms.  Precisions are kappa^2 = beta
    for H2 and beta / gamma for H-infinity.  Raises
    :class:`ConditioningError` when X is numerically singular.
    """
    if sol.status is not Status.OPTIMAL:
        raise ValueError(f"cannot recover a design from status {sol.status}")
    var = layout.extract(sol.x)
    X, Y, beta = var["X"], var["Y"], var["beta"]
    # conditioning is judged in the balanced coordinates where the gain
    # solve actually happens; the original-coordinate X inherits an
    # artificial spread from the similarity scaling
    # the threshold sits below the builder's positive-definiteness floor:
    # peak-gain optima legitimately ride that floor, which is not a failure
    Xb = layout._sym_from(np.asarray(sol.x)[layout.x_slice], layout.nx)
    Yb = np.asarray(sol.x)[layout.y_slice].reshape(layout.nx, layout.ny)
    w = np.linalg.eigvalsh(0.5 * (Xb + Xb.T))
    if w[0] < 1e-12 * max(np.abs(w).max(), 1e-300):
        raise ConditioningError(
            f"X is numerically singular: min eigenvalue {w[0]:.3e}")
    if layout.ny:
        L = np.linalg.solve(Xb, Yb) / layout.balance[:, None]
    else:
        L = np.zeros((layout.nx, 0))
    beta = np.maximum(beta, 0.0)
    # below the margin shift a scaling is indistinguishable from zero
    beta[beta <= 10.0 * spec.margin] = 0.0
    if spec.fixed:
        gamma = float(spec.gamma)
    elif layout.norm == "h2":
        gamma = float(np.sqrt(max(var["gamma_var"], 0.0)))
    else:
        gamma = float(var["gamma_var"])
    kappa_sq = beta if layout.norm == "h2" else beta / gamma
    precision = PrecisionVector.from_values(kappa_sq, support_tol)
    rho = spec.rho_vector(layout.ny)
    objective = float(rho @ kappa_sq)
    diagnostics = {
        "solver_status": sol.status.value,
        "iterations": sol.iterations,
        "primal_residual": sol.primal_residual,
        "dual_residual": sol.dual_residual,
        "duality_gap": sol.duality_gap,
        "beta": beta.copy(),
        "X": var["X"],
        "Y": var["Y"],
    }
    if "Q" in var:
        diagnostics["Q"] = var["Q"]
    return DesignResult(
        L=L, kappa_sq=precision, gamma=gamma, objective=objective,
        support=precision.support, status=DesignStatus.OPTIMAL,
        diagnostics=diagnostics)


def theorem_margins(plant: LtiPlant, spec: DesignSpec, X, Y, beta,
                    Q=None, gamma=None) -> dict:
    """Evaluate the source matrix inequalities at a candidate point.

    Builds the block matrices directly from the plant data in original
    coordinates, independent of the conic lowering, and reports the largest
    eigenvalue (or scalar slack) of each inequality.  Feasible points make
    every entry negative.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).reshape(plant.n_states, -1)
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    nd, nz, ny = plant.n_dist, plant.n_outputs, plant.n_sensors
    if gamma is None:
        gamma = spec.gamma
    if gamma is None:
        raise ValueError("gamma is required in penalized mode")
    m11 = X @ plant.A + Y @ plant.C_y
    m11 = m11 + m11.T
    m12 = X @ plant.B_d @ plant.S_d + Y @ plant.D_d @ plant.S_d
    out = {}
    if spec.norm == "h2":
        main = np.block([
            [m11, m12, Y],
            [m12.T, -np.eye(nd), np.zeros((nd, ny))],
            [Y.T, np.zeros((ny, nd)), -np.diag(beta)],
        ])
        if Q is None:
            raise ValueError("Q is required for the H2 inequalities")
        Q = np.asarray(Q, dtype=float)
        coupling = np.block([[-Q, plant.C_z], [plant.C_z.T, -X]])
        out["coupling"] = float(np.linalg.eigvalsh(
            0.5 * (coupling + coupling.T))[-1])
        out["trace"] = float(np.trace(Q) - gamma ** 2)
    else:
        main = np.block([
            [m11, m12, plant.C_z.T, Y],
            [m12.T, -gamma * np.eye(nd), np.zeros((nd, nz)), np.zeros((nd, ny))],
            [plant.C_z, np.zeros((nz, nd)), -gamma * np.eye(nz), np.zeros((nz, ny))],
            [Y.T, np.zeros((ny, nd)), np.zeros((ny, nz)), -np.diag(beta)],
        ])
    out["main"] = float(np.linalg.eigvalsh(0.5 * (main + main.T))[-1])
    out["x_pd"] = float(-np.linalg.eigvalsh(0.5 * (X + X.T))[0])
    return out


def margins_feasible(margins: dict, tol: float) -> bool:
    """True when every inequality holds with at least ``tol`` to spare."""
    return all(v <= -tol for v in margins.values())
