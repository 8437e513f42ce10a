"""Outer design loops: iterative reweighting, support polishing, and the
exhaustive-search baseline.

The reweighted loop sharpens the l1 objective toward an l0-like count by
re-solving with weights rho_i = 1 / (epsilon + lambda * |beta_i|); small
scalings are driven to (numerical) zero within a few iterations.  The
result is then *polished*: sensors below the support threshold are removed
outright and the program is re-solved on the reduced set with unit weights,
which removes the reweighting bias from the reported precisions.

Everything here is deterministic: identical inputs produce bitwise
identical results.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import sdp
from .lmi import (ConditioningError, DesignResult, DesignSpec, DesignStatus,
                  build_design_problem, margins_feasible, recover_design,
                  theorem_margins)
from .model import LtiPlant, PrecisionVector, restrict_sensors

__all__ = [
    "ReweightOptions",
    "SubsetRecord",
    "reweighted_solve",
    "polish",
    "exhaustive_search",
]

_STATUS_MAP = {
    sdp.Status.OPTIMAL: DesignStatus.OPTIMAL,
    sdp.Status.INFEASIBLE: DesignStatus.INFEASIBLE,
    sdp.Status.UNBOUNDED: DesignStatus.NUMERICAL_FAILURE,
    sdp.Status.MAX_ITERS: DesignStatus.MAX_ITERS,
    sdp.Status.NUMERICAL_FAILURE: DesignStatus.NUMERICAL_FAILURE,
}


@dataclass(frozen=True)
class ReweightOptions:
    epsilon: float = 1e-4          # weight floor
    lam: float = 1.0               # weight slope on |beta|
    max_iters: int = 10
    support_tol: float = 1e-6      # relative threshold defining the support
    convergence_tol: float = 1e-4  # relative change of ||beta||_1

    def __post_init__(self):
        for name in ("epsilon", "lam", "support_tol", "convergence_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class SubsetRecord:
    """One row of the exhaustive-search feasibility table."""

    mask: int                      # bit i set <=> sensor i retained
    indices: tuple[int, ...]
    size: int
    status: str
    feasible: bool
    l1_kappa_sq: float             # nan when infeasible / failed
    kappa_sq: np.ndarray | None = None


def _empty_result(plant: LtiPlant, status: DesignStatus, gamma, diagnostics):
    ny = plant.n_sensors
    return DesignResult(
        L=np.zeros((plant.n_states, ny)),
        kappa_sq=PrecisionVector(np.zeros(ny), ()),
        gamma=float(gamma) if gamma is not None else np.nan,
        objective=np.nan,
        support=(),
        status=status,
        diagnostics=diagnostics,
    )


def reweighted_solve(plant: LtiPlant, spec: DesignSpec,
                     opts: ReweightOptions | None = None) -> DesignResult:
    """Iteratively reweighted l1 design (not yet polished).

    Weights start at unity and are updated from each iterate's beta.  The
    loop stops early once the support is unchanged between consecutive
    iterations and the unit-weight objective has settled, or immediately
    when no sensor is needed at all.  Infeasibility at the first iteration
    is reported as such; a failure later returns the last good iterate with
    the failing status.
    """
    opts = opts or ReweightOptions()
    ny = plant.n_sensors
    base_spec = replace(spec, rho=None)
    problem, layout = build_design_problem(plant, base_spec)
    rho = spec.rho_vector(ny).copy()

    trace: list[tuple[np.ndarray, float]] = []
    result: DesignResult | None = None
    prev_support: tuple[int, ...] | None = None
    prev_obj: float | None = None

    for it in range(opts.max_iters):
        c = problem.c.copy()
        # scaling the weights leaves the argmin unchanged; unit max keeps
        # the dual variables on the scale of the constraint data
        c[layout.beta_slice] = rho / rho.max() if rho.max() > 0 else rho
        sol = sdp.solve(replace(problem, c=c))
        if sol.status is not sdp.Status.OPTIMAL:
            status = _STATUS_MAP[sol.status]
            diagnostics = {
                "failed_iteration": it,
                "solver_status": sol.status.value,
                "certificate_residual": sol.certificate_residual,
            }
            if it == 0 or result is None:
                return _empty_result(plant, status, spec.gamma, diagnostics)
            result.status = status if status is not DesignStatus.INFEASIBLE \
                else DesignStatus.NUMERICAL_FAILURE
            result.diagnostics.update(diagnostics)
            result.iterations = trace
            return result

        rec = recover_design(sol, layout, spec, plant, opts.support_tol)
        beta = rec.diagnostics["beta"]
        unit_obj = float(np.sum(beta))
        trace.append((beta.copy(), unit_obj))
        result = rec
        support = rec.support
        if not support:
            break
        if (prev_support == support and prev_obj is not None
                and abs(unit_obj - prev_obj) <= opts.convergence_tol
                * max(abs(prev_obj), 1e-300)):
            break
        prev_support, prev_obj = support, unit_obj
        rho = 1.0 / (opts.epsilon + opts.lam * np.abs(beta))

    result.iterations = trace
    result.diagnostics["reweight_iterations"] = len(trace)
    return result


def _reduced_spec(spec: DesignSpec, support) -> DesignSpec:
    kmax = spec.kappa_sq_max
    if kmax is not None:
        kmax = kmax[list(support)]
    return replace(spec, rho=None, kappa_sq_max=kmax)


def _embed(plant: LtiPlant, support, reduced: DesignResult,
           support_tol: float) -> DesignResult:
    """Lift a reduced-sensor design back to the full sensor set."""
    ny = plant.n_sensors
    idx = list(support)
    L = np.zeros((plant.n_states, ny))
    kappa = np.zeros(ny)
    if idx:
        L[:, idx] = reduced.L
        kappa[idx] = reduced.kappa_sq.kappa_sq
    precision = PrecisionVector.from_values(kappa, support_tol)
    rho_full = np.zeros(ny)
    return DesignResult(
        L=L,
        kappa_sq=precision,
        gamma=reduced.gamma,
        objective=reduced.objective,
        support=precision.support,
        status=reduced.status,
        diagnostics=dict(reduced.diagnostics, polished_on=tuple(idx)),
    )


def polish(plant: LtiPlant, spec: DesignSpec, support,
           support_tol: float = 1e-6) -> DesignResult:
    """Re-solve with unit weights on the reduced sensor set.

    Sensors outside ``support`` are removed from the program entirely, so
    their precisions and gain columns are exactly zero in the embedded
    result.  An infeasible reduced problem signals that the truncation was
    too aggressive and is reported as ``POLISH_INFEASIBLE``.
    """
    support = tuple(sorted(int(i) for i in support))
    red_plant = restrict_sensors(plant, support)
    red_spec = _reduced_spec(spec, support)
    problem, layout = build_design_problem(red_plant, red_spec)
    sol = sdp.solve(problem)
    if sol.status is not sdp.Status.OPTIMAL:
        status = (DesignStatus.POLISH_INFEASIBLE
                  if sol.status is sdp.Status.INFEASIBLE
                  else _STATUS_MAP[sol.status])
        return _empty_result(plant, status, spec.gamma, {
            "solver_status": sol.status.value,
            "certificate_residual": sol.certificate_residual,
            "polished_on": support,
        })
    reduced = recover_design(sol, layout, red_spec, red_plant, support_tol)
    return _embed(plant, support, reduced, support_tol)


def _classify_subset(plant, spec, support, support_tol):
    """Solve one sensor subset and verify feasibility independently.

    The feasibility verdict does not trust the solver status alone: the
    recovered point is substituted into the source inequalities and must
    hold them with half the margin to spare.
    """
    red_plant = restrict_sensors(plant, support)
    red_spec = _reduced_spec(spec, support)
    problem, layout = build_design_problem(red_plant, red_spec)
    sol = sdp.solve(problem)
    status = _STATUS_MAP[sol.status]
    feasible = False
    result = None
    kappa_full = None
    if sol.x is not None and sol.status in (sdp.Status.OPTIMAL, sdp.Status.MAX_ITERS):
        var = layout.extract(sol.x)
        gamma = spec.gamma
        if gamma is None and layout.gamma_index is not None:
            gamma = var["gamma_var"] if spec.norm == "hinf" \
                else float(np.sqrt(max(var["gamma_var"], 0.0)))
        margins = theorem_margins(
            red_plant, red_spec, var["X"], var["Y"], var["beta"],
            Q=var.get("Q"), gamma=gamma)
        if margins_feasible(margins, spec.margin / 2.0):
            feasible = True
            if sol.status is sdp.Status.MAX_ITERS:
                sol.status = sdp.Status.OPTIMAL
            beta = np.maximum(var["beta"], 0.0)
            kappa_red = beta if spec.norm == "h2" else beta / gamma
            kappa_full = np.zeros(plant.n_sensors)
            kappa_full[list(support)] = kappa_red
            try:
                result = _embed(plant, support,
                                recover_design(sol, layout, red_spec,
                                               red_plant, support_tol),
                                support_tol)
            except ConditioningError:
                # certifiably feasible, but the gain solve is unreliable:
                # keep the row in the table, not winner-eligible
                result = None
    return status, feasible, result, kappa_full


def exhaustive_search(plant: LtiPlant, spec: DesignSpec,
                      support_tol: float = 1e-6, workers: int = 1):
    """Globally sparsest design by enumerating all sensor subsets.

    Subsets are enumerated by increasing size, lexicographically within a
    size, each solved with unit weights.  The winner is the smallest
    feasible subset size, ties broken by the least l1 norm of the
    precisions and then by enumeration order.  Returns the winning design
    together with the per-subset feasibility table.  Subsets may be
    evaluated concurrently; the table and the winner never depend on the
    completion schedule.
    """
    ny = plant.n_sensors
    if ny > 20:
        raise ValueError(f"{ny} sensors means 2^{ny} subsets; refusing > 20")
    subsets = []
    for r in range(ny + 1):
        subsets.extend(itertools.combinations(range(ny), r))

    def run(support):
        status, feasible, result, kappa = _classify_subset(
            plant, spec, support, support_tol)
        l1 = float(np.sum(kappa)) if feasible else np.nan
        record = SubsetRecord(
            mask=sum(1 << i for i in support),
            indices=tuple(support),
            size=len(support),
            status=status.value,
            feasible=feasible,
            l1_kappa_sq=l1,
            kappa_sq=kappa.copy() if feasible else None,
        )
        return record, result

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run, subsets))
    else:
        outcomes = [run(s) for s in subsets]

    table = [rec for rec, _ in outcomes]
    winner = None
    winner_rec = None
    for rec, result in outcomes:
        if not rec.feasible or result is None:
            continue
        if winner_rec is None:
            winner, winner_rec = result, rec
        elif rec.size < winner_rec.size:
            winner, winner_rec = result, rec
        elif rec.size == winner_rec.size and rec.l1_kappa_sq < winner_rec.l1_kappa_sq:
            winner, winner_rec = result, rec
    if winner is None:
        return (_empty_result(plant, DesignStatus.INFEASIBLE, spec.gamma,
                              {"subsets_tried": len(table)}), table)
    winner.diagnostics["winning_mask"] = winner_rec.mask
    return winner, table
