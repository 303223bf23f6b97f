"""Cross-validation of solver output against the bound structure.

Three diagnostics: per-fiber 1D energies along normals to the network
(lower-bound structure), the two-sided energy sandwich between the
constrained and free network energies, and the exponential decay of
|u - a| with distance to the free network inside each phase.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .connections import SurfaceTensionMatrix
from .errors import FiberOutsideGrid, SandwichViolation, TooFewQualifyingCells
from .field_solver import DomainGrid, PhaseField
from .network import Network, cross_side
from .potential import Potential


# -- fiber lower bounds --------------------------------------------------------


@dataclass
class FiberSample:
    base: np.ndarray
    normal: np.ndarray
    half_length: float
    ts: np.ndarray
    values: np.ndarray
    J_x: float
    endpoints_ok: bool


@dataclass
class FiberReport:
    beta: float
    alpha: float
    fibers: List[FiberSample] = field(repr=False, default_factory=list)
    fraction_ok: float = 0.0
    J_x_min: float = 0.0
    J_x_mean: float = 0.0
    covered_length: float = 0.0
    empirical_lb: float = 0.0
    J_field: float = 0.0
    lb_holds: bool = False


def fiber_energy(fieldv: PhaseField, grid: DomainGrid, p: Potential,
                 epsilon: float, base: np.ndarray, normal: np.ndarray,
                 half_length: float, n_t: Optional[int] = None) -> FiberSample:
    """1D energy of the field restricted to a normal fiber through base.

    Raises FiberOutsideGrid if the fiber leaves the grid interior.
    """
    base = np.asarray(base, dtype=float)
    normal = np.asarray(normal, dtype=float)
    normal = normal / np.linalg.norm(normal)
    if n_t is None:
        n_t = max(33, int(np.ceil(4.0 * half_length / grid.hgrid)) | 1)
    ts = np.linspace(-half_length, half_length, n_t)
    pts = base[None, :] + ts[:, None] * normal[None, :]
    fx = np.round((pts[:, 0] - grid.x0) / grid.hgrid).astype(int)
    fy = np.round((pts[:, 1] - grid.y0) / grid.hgrid).astype(int)
    ok = (fx >= 0) & (fx < grid.nx) & (fy >= 0) & (fy < grid.ny)
    if not np.all(ok) or not np.all((grid.interior | grid.ghost)[fy, fx]):
        raise FiberOutsideGrid(f"fiber at {base} leaves the grid")
    vals = fieldv.sample(grid, pts)
    dt = ts[1] - ts[0]
    du = vals[1:] - vals[:-1]
    kin = 0.5 * epsilon * float(np.sum(du * du)) / dt
    w = p.w(vals)
    pot = float(np.trapz(w, dx=dt)) / epsilon
    return FiberSample(base=base, normal=normal, half_length=half_length,
                       ts=ts, values=vals, J_x=kin + pot, endpoints_ok=False)


def fiber_lower_bound(fieldv: PhaseField, grid: DomainGrid, net: Network,
                      sigma: SurfaceTensionMatrix, p: Potential,
                      epsilon: float, beta: float = 1.0 / 3.0,
                      alpha: float = 1.0 / 6.0,
                      spacing: Optional[float] = None,
                      branch_exclusion_coeff: float = 1.0,
                      penalty_coeff: float = 1.0,
                      J_field: Optional[float] = None) -> FiberReport:
    """Sample fibers normal to each arc and compare their 1D energies to the
    surface tensions.

    Base points within C eps^(1/2 - alpha) of a branch point are excluded
    (the junction neighborhoods escape the per-fiber bound), as are fibers
    that would leave the grid.  The empirical lower bound is
    sum sigma * (covered length) - penalty, with penalty = C_pen delta^2
    per unit covered length.
    """
    half = epsilon ** beta
    delta = epsilon ** alpha
    if spacing is None:
        spacing = max(2.0 * grid.hgrid, half / 4.0)
    excl = branch_exclusion_coeff * epsilon ** (0.5 - alpha)
    branch_pos = [nd.position for nd in net.nodes if nd.kind == "branch"]

    report = FiberReport(beta=beta, alpha=alpha)
    lb = 0.0
    for arc in net.arcs:
        if arc.degenerate:
            continue
        p1, p2 = arc.points[0], arc.points[-1]
        L = arc.length
        tau = (p2 - p1) / L
        nu = np.array([-tau[1], tau[0]])
        s_vals = np.arange(0.5 * spacing, L, spacing)
        s_sigma = sigma.value(*arc.phases)
        n_used = 0
        for s in s_vals:
            base = p1 + s * tau
            if any(np.linalg.norm(base - q) < excl for q in branch_pos):
                continue
            try:
                fs = fiber_energy(fieldv, grid, p, epsilon, base, nu, half)
            except FiberOutsideGrid:
                continue
            left, right = arc.phases
            d_left = np.linalg.norm(fs.values[-1] - p.wells[left])
            d_right = np.linalg.norm(fs.values[0] - p.wells[right])
            fs.endpoints_ok = bool(d_left <= delta and d_right <= delta)
            report.fibers.append(fs)
            n_used += 1
        lb += s_sigma * n_used * spacing
        report.covered_length += n_used * spacing
    if report.fibers:
        good = [f for f in report.fibers if f.endpoints_ok]
        report.fraction_ok = len(good) / len(report.fibers)
        report.J_x_min = float(min(f.J_x for f in report.fibers))
        report.J_x_mean = float(np.mean([f.J_x for f in report.fibers]))
    report.empirical_lb = lb - penalty_coeff * delta ** 2 * report.covered_length
    report.J_field = float(J_field if J_field is not None else fieldv.energy)
    report.lb_holds = report.empirical_lb <= report.J_field + 1e-9
    return report


def fibers_to_csv(path, report: FiberReport) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x", "y", "J_x", "endpoints_ok"])
        for f in report.fibers:
            wr.writerow([repr(float(f.base[0])), repr(float(f.base[1])),
                         repr(f.J_x), int(f.endpoints_ok)])


# -- sandwich ------------------------------------------------------------------


@dataclass
class SandwichReport:
    J_min: float
    F_hat: float
    F_free: float
    eps: float
    budget: float
    lb_margin: float      # J - (F_hat - budget) >= 0
    ub_margin: float      # (F_free + budget) - J >= 0
    gap_margin: float     # budget - (F_hat - F_free) >= 0
    test_margin: Optional[float] = None   # J_test + tol - J >= 0
    ok: bool = True


def sandwich_report(J_min: float, F_hat: float, F_free: float, eps: float,
                    C1: float = 1.0, C_log: float = 1.0,
                    solver_tol: float = 0.0,
                    test_energy: Optional[float] = None,
                    raise_on_violation: bool = True) -> SandwichReport:
    """Assert the two-sided ordering within the error budget
    max(C1 eps^(1/3), C eps |ln eps|^2) + solver_tol.

    Enlarging the budget never turns a pass into a violation.
    """
    budget = max(C1 * eps ** (1.0 / 3.0),
                 C_log * eps * np.log(eps) ** 2) + solver_tol
    lb_margin = J_min - (F_hat - budget)
    ub_margin = (F_free + budget) - J_min
    gap_margin = budget - (F_hat - F_free)
    test_margin = None
    if test_energy is not None:
        test_margin = test_energy + solver_tol + 1e-9 - J_min
    ok = (lb_margin >= 0 and ub_margin >= 0 and gap_margin >= 0
          and (test_margin is None or test_margin >= 0))
    rep = SandwichReport(J_min=J_min, F_hat=F_hat, F_free=F_free, eps=eps,
                         budget=budget, lb_margin=lb_margin,
                         ub_margin=ub_margin, gap_margin=gap_margin,
                         test_margin=test_margin, ok=ok)
    if raise_on_violation and not ok:
        raise SandwichViolation(
            f"sandwich violated at eps={eps}: J={J_min:.6f}, F_hat={F_hat:.6f}, "
            f"F_free={F_free:.6f}, budget={budget:.6f}, "
            f"margins lb={lb_margin:.3e} ub={ub_margin:.3e} gap={gap_margin:.3e}"
            + (f" test={test_margin:.3e}" if test_margin is not None else ""))
    return rep


# -- exponential decay ----------------------------------------------------------


@dataclass
class PhaseDecay:
    well: int
    k_eps: float          # fitted rate times epsilon (grid-independent)
    intercept: float
    r_squared: float
    n_cells: int
    slope: float


@dataclass
class DecayFit:
    eps: float
    C_off: float
    phases: Dict[int, PhaseDecay]

    @property
    def passing(self) -> bool:
        return bool(self.phases) and all(
            ph.r_squared >= 0.9 and ph.slope < 0 for ph in self.phases.values())


def decay_fit(fieldv: PhaseField, grid: DomainGrid, net_free: Network,
              wells: np.ndarray, eps: float, C_off: float = 0.1,
              amp_floor: float = 1e-9, amp_cap: Optional[float] = None,
              min_cells: int = 50) -> DecayFit:
    """Regress log |u - a| against distance to the free network per phase.

    Only cells farther than C_off eps^(1/6) from the network qualify, with
    amplitudes between amp_floor (above solver noise) and amp_cap (inside
    the phase proper).  A passing fit has R^2 >= 0.9 and a negative slope;
    k_eps = -slope * eps should be stable across eps.
    """
    wells = np.asarray(wells, dtype=float)
    if amp_cap is None:
        amp_cap = eps ** (1.0 / 6.0)
    pts = grid.centers()
    vals = fieldv.u[grid.interior]
    d = net_free.distance_to(pts)
    offset = C_off * eps ** (1.0 / 6.0)

    # phase membership: side of the nearest nondegenerate arc
    best_d = np.full(len(pts), np.inf)
    labels = np.full(len(pts), -1, dtype=int)
    from . import geometry as geo
    for arc in net_free.arcs:
        if arc.degenerate:
            continue
        da = geo.point_polyline_distance(pts, arc.points)
        upd = da < best_d
        if np.any(upd):
            s = cross_side(arc.points, pts[upd])
            labels[upd] = np.where(s >= 0, arc.phases[0], arc.phases[1])
            best_d[upd] = da[upd]

    phases: Dict[int, PhaseDecay] = {}
    for w in range(len(wells)):
        sel = labels == w
        if not np.any(sel):
            continue
        amp = np.linalg.norm(vals[sel] - wells[w], axis=1)
        dd = d[sel]
        keep = (dd > offset) & (amp > amp_floor) & (amp < amp_cap)
        if keep.sum() < min_cells:
            continue
        x = dd[keep]
        y = np.log(amp[keep])
        coef = np.polyfit(x, y, 1)
        pred = np.polyval(coef, x)
        ss_res = float(np.sum((y - pred) ** 2))
        ss_tot = float(np.sum((y - np.mean(y)) ** 2))
        r2 = 1.0 - ss_res / max(ss_tot, 1e-300)
        phases[w] = PhaseDecay(well=w, k_eps=float(-coef[0] * eps),
                               intercept=float(coef[1]), r_squared=float(r2),
                               n_cells=int(keep.sum()), slope=float(coef[0]))
    if not phases:
        raise TooFewQualifyingCells(
            "no phase has enough cells in the decay window")
    return DecayFit(eps=float(eps), C_off=float(C_off), phases=phases)


def decay_scatter_csv(path, fieldv: PhaseField, grid: DomainGrid,
                      net_free: Network, wells: np.ndarray) -> None:
    wells = np.asarray(wells, dtype=float)
    pts = grid.centers()
    vals = fieldv.u[grid.interior]
    d = net_free.distance_to(pts)
    dist = np.linalg.norm(vals[:, None, :] - wells[None, :, :], axis=-1)
    near = dist.argmin(axis=1)
    amp = dist.min(axis=1)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x", "y", "dist_to_net", "nearest_well", "amplitude"])
        for (x, y), dd, wn, aa in zip(pts, d, near, amp):
            wr.writerow([repr(float(x)), repr(float(y)), repr(float(dd)),
                         int(wn), repr(float(aa))])
