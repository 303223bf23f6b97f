"""2D Allen-Cahn energy minimization on a masked finite-difference grid.

The energy J(u) = int( eps |grad u|^2 / 2 + W(u) / eps ) is discretized
cell-wise (midpoint W, edge differences for the gradient), so restricted
energies over cell subsets are additive.  Dirichlet data live on a ghost
layer of cells just outside the domain, evaluated at the projection of the
ghost center onto the boundary (first order).

Minimization runs the gradient flow  u_t = lap u - W_z(u) / eps^2  with an
explicit or semi-implicit (implicit Laplacian) step, whichever is cheaper at
the stable step size, then polishes with a damped (chord) Newton iteration
on the Euler-Lagrange residual  eps lap u - W_z(u) / eps.
"""

from __future__ import annotations

import csv
import os
import struct
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import scipy.ndimage as ndi
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .connections import ConnectionProfile
from .errors import (BlowUp, NoConvergence, OverlappingTransitions,
                     ResolutionTooCoarse)
from .potential import Potential

EXTERIOR, INTERIOR, GHOST = 0, 1, 2


@dataclass
class DomainGrid:
    """Cell-centered grid with an interior/ghost/exterior mask."""

    kind: str                  # "disk" | "rect"
    hgrid: float
    mask: np.ndarray           # (ny, nx) int8
    x0: float                  # center of cell (iy=0, ix=0)
    y0: float
    radius: float = 0.0        # disk
    width: float = 0.0         # rect
    height: float = 0.0

    def __post_init__(self):
        self.ny, self.nx = self.mask.shape
        ix = np.arange(self.nx)
        iy = np.arange(self.ny)
        self.xs = self.x0 + ix * self.hgrid
        self.ys = self.y0 + iy * self.hgrid
        self.cx, self.cy = np.meshgrid(self.xs, self.ys)
        self.interior = self.mask == INTERIOR
        self.ghost = self.mask == GHOST
        self.n_interior = int(self.interior.sum())

    def centers(self) -> np.ndarray:
        """(n_interior, 2) coordinates of interior cell centers."""
        return np.column_stack([self.cx[self.interior], self.cy[self.interior]])

    def ghost_projections(self) -> np.ndarray:
        """Projection of each ghost center onto the domain boundary."""
        gx = self.cx[self.ghost]
        gy = self.cy[self.ghost]
        if self.kind == "disk":
            r = np.hypot(gx, gy)
            r = np.where(r == 0, 1.0, r)
            return np.column_stack([gx * self.radius / r, gy * self.radius / r])
        # ghost centers lie outside the rectangle; clamping projects them
        return np.column_stack([np.clip(gx, 0.0, self.width),
                                np.clip(gy, 0.0, self.height)])

    def area(self) -> float:
        return self.n_interior * self.hgrid ** 2


def _mask_from_inside(inside: np.ndarray) -> np.ndarray:
    mask = np.zeros(inside.shape, dtype=np.int8)
    mask[inside] = INTERIOR
    near = ndi.binary_dilation(inside, structure=np.array(
        [[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool))
    mask[near & ~inside] = GHOST
    return mask


def build_disk_grid(R: float, hgrid: float) -> DomainGrid:
    """Disk of radius R centered at the origin; requires hgrid < R / 16."""
    if hgrid >= R / 16.0:
        raise ResolutionTooCoarse(f"hgrid = {hgrid} must be < R/16 = {R / 16.0}")
    half = int(np.ceil((R + 2.5 * hgrid) / hgrid))
    n = 2 * half
    x0 = -(half - 0.5) * hgrid
    ix = np.arange(n)
    xs = x0 + ix * hgrid
    cx, cy = np.meshgrid(xs, xs)
    inside = cx ** 2 + cy ** 2 <= R ** 2
    grid = DomainGrid("disk", hgrid, _mask_from_inside(inside), x0, x0, radius=R)
    lab, ncomp = ndi.label(grid.interior)
    if ncomp != 1:
        raise ResolutionTooCoarse(f"interior splits into {ncomp} components")
    return grid


def build_rect_grid(width: float, height: float, hgrid: float) -> DomainGrid:
    """Axis-aligned rectangle (0, width) x (0, height)."""
    if hgrid >= min(width, height) / 4.0:
        raise ResolutionTooCoarse("hgrid too coarse for the rectangle")
    nx = int(round(width / hgrid))
    ny = int(round(height / hgrid))
    mask = np.zeros((ny + 2, nx + 2), dtype=np.int8)
    mask[1:-1, 1:-1] = INTERIOR
    mask[0, 1:-1] = GHOST
    mask[-1, 1:-1] = GHOST
    mask[1:-1, 0] = GHOST
    mask[1:-1, -1] = GHOST
    return DomainGrid("rect", hgrid, mask, x0=-0.5 * hgrid, y0=-0.5 * hgrid,
                      width=width, height=height)


# -- boundary data -------------------------------------------------------------


class BoundaryDatum:
    """Dirichlet values on the ghost layer; subclasses define the trace."""

    M: float = 0.0

    def eval_points(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def ghost_values(self, grid: DomainGrid) -> np.ndarray:
        vals = self.eval_points(grid.ghost_projections())
        self.M = max(self.M, float(np.max(np.linalg.norm(vals, axis=1))))
        return vals


class FunctionDatum(BoundaryDatum):
    """Datum from an arbitrary vector-valued function of (x, y)."""

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], m: int):
        self.fn = fn
        self.m = m

    def eval_points(self, pts: np.ndarray) -> np.ndarray:
        out = np.asarray(self.fn(np.atleast_2d(pts)), dtype=float)
        return out.reshape(-1, self.m)


class DiskArcDatum(BoundaryDatum):
    """Piecewise-well datum on a circle with heteroclinic transition windows.

    The circle is split at `vertices` (angles); the arc ccw from vertex k to
    vertex k+1 carries the well labels[k].  Across a window of arclength
    `transition_width` centered at each vertex the datum traces the 1D
    connection profile at the interface scale, u((s - s_k) / epsilon), so it
    matches the trace of the interior transition layer.
    """

    def __init__(self, R: float, vertices, labels, transition_width: float,
                 profiles: Dict[Tuple[int, int], ConnectionProfile],
                 wells: np.ndarray, epsilon: float):
        self.R = float(R)
        self.vertices = np.asarray(vertices, dtype=float) % (2 * np.pi)
        order = np.argsort(self.vertices)
        self.vertices = self.vertices[order]
        self.labels = [int(labels[k]) for k in order]
        self.w = float(transition_width)
        self.profiles = profiles
        self.wells = np.asarray(wells, dtype=float)
        self.eps = float(epsilon)
        circ = 2 * np.pi * self.R
        svert = self.vertices * self.R
        gaps = np.diff(np.append(svert, svert[0] + circ))
        if np.any(gaps < self.w):
            raise OverlappingTransitions(
                f"adjacent transition windows overlap: min gap {gaps.min():.4g} < width {self.w:.4g}")
        # metadata: constant arcs (Gamma) and transition windows (I)
        self.gammas = []
        self.windows = []
        nv = len(self.vertices)
        for k in range(nv):
            s_k = svert[k]
            s_next = svert[(k + 1) % nv] + (circ if k == nv - 1 else 0.0)
            self.gammas.append((self.labels[k], s_k + 0.5 * self.w,
                                s_next - 0.5 * self.w))
            pair = (self.labels[(k - 1) % nv], self.labels[k])
            self.windows.append((s_k, self.w, pair))

    def eval_angles(self, theta: np.ndarray) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float)) % (2 * np.pi)
        s = theta * self.R
        m = self.wells.shape[1]
        out = np.empty((len(s), m))
        circ = 2 * np.pi * self.R
        svert = self.vertices * self.R
        nv = len(svert)
        # constant value of the containing arc
        idx = np.searchsorted(svert, s, side="right") - 1
        idx = idx % nv
        out[:] = self.wells[np.asarray([self.labels[i] for i in idx])]
        # overwrite transition windows
        for k in range(nv):
            ds = s - svert[k]
            ds = (ds + 0.5 * circ) % circ - 0.5 * circ
            hit = np.abs(ds) <= 0.5 * self.w
            if not np.any(hit):
                continue
            pair = (self.labels[(k - 1) % nv], self.labels[k])
            prof = self._profile_for(pair)
            out[hit] = prof.eval(ds[hit] / self.eps)
        return out

    def _profile_for(self, pair) -> ConnectionProfile:
        if pair in self.profiles:
            return self.profiles[pair]
        if (pair[1], pair[0]) in self.profiles:
            return self.profiles[(pair[1], pair[0])].reversed()
        raise KeyError(f"no connection profile for well pair {pair}")

    def eval_points(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return self.eval_angles(np.arctan2(pts[:, 1], pts[:, 0]))

    def min_distance_to_wells_on_gammas(self, n_sample: int = 720) -> float:
        """Largest distance of the datum to its well along the Gamma arcs."""
        worst = 0.0
        for well, s0, s1 in self.gammas:
            ss = np.linspace(s0, s1, n_sample)
            vals = self.eval_angles(ss / self.R)
            worst = max(worst, float(np.max(
                np.linalg.norm(vals - self.wells[well], axis=1))))
        return worst


def build_boundary_datum(grid: DomainGrid, vertices, labels,
                         transition_width: float, profiles,
                         wells, epsilon: float) -> DiskArcDatum:
    """Datum on a disk grid; see DiskArcDatum."""
    if grid.kind != "disk":
        raise ValueError("arc datum requires a disk grid")
    if transition_width <= 0:
        raise ValueError("transition_width must be positive")
    return DiskArcDatum(grid.radius, vertices, labels, transition_width,
                        profiles, wells, epsilon)


# -- fields and energy ----------------------------------------------------------


@dataclass
class PhaseField:
    """Vector field on the full grid box; meaningful on interior + ghost."""

    u: np.ndarray              # (ny, nx, m)
    epsilon: float
    energy: float = np.nan
    grad_norm: float = np.nan
    converged: bool = False
    iterations: int = 0
    energy_log: List[Tuple[int, float, float]] = field(default_factory=list)

    @property
    def m(self) -> int:
        return self.u.shape[2]

    def interior_values(self, grid: DomainGrid) -> np.ndarray:
        return self.u[grid.interior]

    def sample(self, grid: DomainGrid, pts: np.ndarray) -> np.ndarray:
        """Bilinear interpolation at points (n, 2)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        fx = (pts[:, 0] - grid.x0) / grid.hgrid
        fy = (pts[:, 1] - grid.y0) / grid.hgrid
        ix = np.clip(np.floor(fx).astype(int), 0, grid.nx - 2)
        iy = np.clip(np.floor(fy).astype(int), 0, grid.ny - 2)
        tx = np.clip(fx - ix, 0.0, 1.0)[:, None]
        ty = np.clip(fy - iy, 0.0, 1.0)[:, None]
        u = self.u
        return ((1 - tx) * (1 - ty) * u[iy, ix]
                + tx * (1 - ty) * u[iy, ix + 1]
                + (1 - tx) * ty * u[iy + 1, ix]
                + tx * ty * u[iy + 1, ix + 1])


def field_from_values(grid: DomainGrid, interior_vals: np.ndarray,
                      datum: BoundaryDatum, epsilon: float) -> PhaseField:
    m = interior_vals.shape[1]
    u = np.zeros((grid.ny, grid.nx, m))
    u[grid.interior] = interior_vals
    u[grid.ghost] = datum.ghost_values(grid)
    return PhaseField(u=u, epsilon=epsilon)


def energy_of(fieldv: PhaseField, grid: DomainGrid, p: Potential,
              epsilon: float, region: Optional[np.ndarray] = None) -> float:
    """Cell-additive discrete energy; `region` restricts to a cell submask."""
    u = fieldv.u
    inter = grid.interior if region is None else (grid.interior & region)
    active = grid.interior | grid.ghost
    h2 = grid.hgrid ** 2
    total = float(np.sum(p.w(u[inter]))) * h2 / epsilon

    kin = np.zeros(grid.mask.shape)
    for axis, shift in ((0, 1), (0, -1), (1, 1), (1, -1)):
        nb_active = np.roll(active, shift, axis=axis)
        nb_interior = np.roll(grid.interior, shift, axis=axis)
        du2 = np.sum((np.roll(u, shift, axis=axis) - u) ** 2, axis=-1)
        w = np.where(nb_interior, 0.5, np.where(nb_active, 1.0, 0.0))
        kin += np.where(grid.interior, w * du2, 0.0)
    total += 0.5 * epsilon * float(np.sum(kin[inter]))
    return total


def energy_gradient(fieldv: PhaseField, grid: DomainGrid, p: Potential,
                    epsilon: float) -> np.ndarray:
    """dJ/du on interior cells (full-box array, zero elsewhere)."""
    u = fieldv.u
    lap = _masked_laplacian(u, grid)
    g = np.zeros_like(u)
    g[grid.interior] = (grid.hgrid ** 2) * (
        -epsilon * lap[grid.interior] / grid.hgrid ** 2
        + p.wz(u[grid.interior]) / epsilon)
    return g


def _masked_laplacian(u: np.ndarray, grid: DomainGrid) -> np.ndarray:
    """Five-point sum(neighbors) - 4u, using ghost values, on interior cells.

    Returns the unscaled stencil (divide by h^2 for the Laplacian)."""
    out = -4.0 * u.copy()
    for axis, shift in ((0, 1), (0, -1), (1, 1), (1, -1)):
        out += np.roll(u, shift, axis=axis)
    return out


def el_residual(fieldv: PhaseField, grid: DomainGrid, p: Potential,
                epsilon: float) -> float:
    """Inf-norm of the Euler-Lagrange residual eps lap u - W_z(u)/eps."""
    lap = _masked_laplacian(fieldv.u, grid) / grid.hgrid ** 2
    res = epsilon * lap[grid.interior] - p.wz(fieldv.u[grid.interior]) / epsilon
    return float(np.max(np.abs(res))) if res.size else 0.0


@dataclass
class MinimizeOptions:
    tol: Optional[float] = None          # residual tol; default 1e-6 / eps
    max_iter: int = 200000
    scheme: str = "auto"                 # auto | explicit | semi_implicit
    c_stab: Optional[float] = None       # tau <= c_stab * eps^2 (reaction)
    check_every: int = 100
    newton: bool = True
    newton_max: int = 60
    log_energy: bool = False
    flow_exit_factor: float = 50.0       # hand off to Newton at factor * tol
    flow_cap: int = 4000                 # flow iterations before the polish
    plateau: float = 0.98                # residual ratio that counts as stalled
    allow_underresolved: bool = False    # internal: coarse cascade stages only


def _estimate_lipschitz(p: Potential) -> float:
    """max |W_zz| over the well hull (where the field lives), with margin."""
    rng = np.random.default_rng(0)
    w = rng.dirichlet(np.ones(len(p.wells)), size=400)
    zs = np.vstack([w @ p.wells, p.wells])
    zs = np.vstack([zs, zs + rng.normal(scale=0.05, size=zs.shape)])
    H = p.wzz(zs)
    lam = np.linalg.eigvalsh(H.reshape(-1, p.m, p.m))
    return 3.0 * float(np.max(np.abs(lam)))


def _active_band(u: np.ndarray, grid: DomainGrid, p: Potential,
                 margin_cells: int) -> np.ndarray:
    """Interior cells within a dilated band of the transition support.

    Far-field cells sit at well values to machine precision (exponential
    tails) and are frozen during the Newton polish."""
    dist = np.zeros(u.shape[:2])
    dist[grid.interior] = p.min_well_distance(u[grid.interior])
    band = grid.interior & (dist > 1e-9)
    band = ndi.binary_dilation(band, iterations=margin_cells)
    return band & grid.interior


def _newton_polish(u: np.ndarray, grid: DomainGrid, p: Potential,
                   epsilon: float, tol: float, max_steps: int,
                   tau0: float, blowup_bound: float) -> Tuple[np.ndarray, float, int]:
    """Pseudo-transient continuation on the EL residual F = eps lap u - W_z/eps.

    Each step solves (I / tau - J_F) delta = F restricted to the active
    band, an implicit Euler step of the gradient flow that turns into a
    full Newton step as tau grows.  Steps are accepted on energy descent
    (the Lyapunov function of the flow) with backtracking, then
    extrapolated along the accepted direction to ride slow interface
    modes; tau grows geometrically on full-step acceptance.  Linear
    systems reuse a frozen LU factorization as a BiCGStab preconditioner
    and refactor when the pseudo-step has drifted or Krylov stalls.
    """
    inter = grid.interior
    m = u.shape[2]
    h2 = grid.hgrid ** 2
    trace = bool(os.environ.get("ACNETS_TRACE"))
    import time as _time

    def residual_full(uu):
        lap = _masked_laplacian(uu, grid) / h2
        out = np.zeros(uu.shape[:2] + (m,))
        out[inter] = epsilon * lap[inter] - p.wz(uu[inter]) / epsilon
        return out

    def energy(uu):
        return energy_of(PhaseField(u=uu, epsilon=epsilon), grid, p, epsilon)

    margin = max(8, int(np.ceil(4.0 * epsilon / grid.hgrid)))
    steps = 0
    for _expansion in range(4):
        active = _active_band(u, grid, p, margin)
        n_act = int(active.sum())
        if n_act == 0:
            break
        idx = -np.ones(u.shape[:2], dtype=np.int64)
        idx[active] = np.arange(n_act)
        rows, cols, vals = [np.arange(n_act)], [np.arange(n_act)], \
            [np.full(n_act, -4.0)]
        for axis, shift in ((0, 1), (0, -1), (1, 1), (1, -1)):
            nb = np.roll(idx, shift, axis=axis)
            ok = active & (nb >= 0)
            rows.append(idx[ok])
            cols.append(nb[ok])
            vals.append(np.ones(int(ok.sum())))
        A = sp.csr_matrix((np.concatenate(vals),
                           (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n_act, n_act))
        A_big = sp.kron(A, sp.identity(m, format="csr"), format="csr") \
            * (epsilon / h2)
        I_big = sp.identity(n_act * m, format="csr")

        def system(uu, tau):
            blocks = p.wzz(uu[active]) / epsilon
            B = sp.bsr_matrix((blocks, np.arange(n_act), np.arange(n_act + 1)),
                              shape=(n_act * m, n_act * m))
            return (I_big / tau - (A_big - B)).tocsc()

        lu = None
        tau_fact = None

        def solve_step(uu, tau, rhs):
            nonlocal lu, tau_fact
            M = system(uu, tau)
            stale = (lu is None or tau_fact is None
                     or not 0.1 < tau / tau_fact < 10.0)
            if lu is not None and not stale:
                Mop = spla.LinearOperator(M.shape, matvec=M.dot)
                P = spla.LinearOperator(M.shape, matvec=lu.solve)
                delta, info = spla.bicgstab(Mop, rhs, M=P, rtol=1e-10,
                                            atol=0.0, maxiter=12)
                if info == 0:
                    return delta
            lu = spla.splu(M, permc_spec="MMD_AT_PLUS_A")
            tau_fact = tau
            return lu.solve(rhs)

        r_full = residual_full(u)
        r = r_full[active].ravel()
        rn2 = float(np.linalg.norm(r))
        rninf = float(np.max(np.abs(r))) if r.size else 0.0
        E = energy(u)
        tau = tau0
        shrinks = 0
        stagnant = 0
        while rninf > tol and steps < max_steps and shrinks < 60 and stagnant < 8:
            _t0 = _time.perf_counter()
            delta = solve_step(u, tau, r).reshape(-1, m)
            accepted = False
            s = 1.0
            for _ in range(6):
                u_try = u.copy()
                u_try[active] = u[active] + s * delta
                r_try = residual_full(u_try)[active].ravel()
                rn2_try = float(np.linalg.norm(r_try))
                E_try = energy(u_try)
                sup_try = float(np.max(np.abs(u_try[inter])))
                descent = np.isfinite(E_try) and \
                    E_try < E - 1e-13 * max(abs(E), 1.0)
                quad = np.isfinite(rn2_try) and rn2_try <= 0.9 * rn2
                if (descent or quad) and sup_try <= blowup_bound:
                    accepted = True
                    break
                s *= 0.25
            if accepted:
                progress = (E - E_try) + (rn2 - rn2_try)
                u, r, rn2, E = u_try, r_try, rn2_try, E_try
                # ride the slow manifold along the accepted direction
                for k in (2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0):
                    u_ext = u.copy()
                    u_ext[active] = u[active] + (k - 1.0) * s * delta
                    E_ext = energy(u_ext)
                    if not np.isfinite(E_ext) or E_ext > E \
                            or float(np.max(np.abs(u_ext[inter]))) > blowup_bound:
                        break
                    u, E = u_ext, E_ext
                r = residual_full(u)[active].ravel()
                rn2 = float(np.linalg.norm(r))
                rninf = float(np.max(np.abs(r)))
                if s == 1.0:
                    tau = min(tau * 2.5, 1e12)
                elif s < 0.5:
                    tau = max(tau * 0.1, tau0)
                steps += 1
                stagnant = stagnant + 1 if progress < 1e-11 else 0
            else:
                tau = max(tau * 0.1, 1e-3 * tau0)
                shrinks += 1
            if trace:
                print(f"    ptc step {steps}: n_act {n_act} tau {tau:.2e} "
                      f"s={s if accepted else 'rej'} rinf {rninf:.3e} "
                      f"E {E:.8f} ({_time.perf_counter() - _t0:.2f}s)",
                      flush=True)
        rninf_global = float(np.max(np.abs(residual_full(u)[inter])))
        if rninf_global <= tol or steps >= max_steps or shrinks >= 60 \
                or stagnant >= 8:
            return u, rninf_global, steps
        margin *= 2  # residual escaped the band; widen and continue
    return u, float(np.max(np.abs(residual_full(u)[inter]))), steps


def minimize(grid: DomainGrid, datum: BoundaryDatum, p: Potential,
             epsilon: float, opts: Optional[MinimizeOptions] = None,
             init: Optional[np.ndarray] = None) -> PhaseField:
    """Minimize the discrete energy subject to the Dirichlet datum.

    init is a full-box (ny, nx, m) array or None (nearest-well projection
    of the boundary trace).  Returns the field with its energy, terminal
    Euler-Lagrange residual, and energy log.
    """
    opts = opts or MinimizeOptions()
    if epsilon < 2.0 * grid.hgrid and not opts.allow_underresolved:
        raise ResolutionTooCoarse(
            f"epsilon = {epsilon} under-resolved: needs epsilon >= 2 h = {2 * grid.hgrid}")
    tol = opts.tol if opts.tol is not None else 1e-6 / epsilon
    m = p.m
    gvals = datum.ghost_values(grid)

    if init is None:
        init = nearest_well_projection(grid, datum, p)
    u = np.array(init, dtype=float).reshape(grid.ny, grid.nx, m).copy()
    u[grid.ghost] = gvals
    u[~(grid.interior | grid.ghost)] = 0.0

    c_stab = opts.c_stab if opts.c_stab is not None \
        else 2.0 / _estimate_lipschitz(p)
    tau_reaction = 0.9 * c_stab * epsilon ** 2
    tau_cfl = 0.9 * grid.hgrid ** 2 / 4.0
    use_explicit = (opts.scheme == "explicit"
                    or (opts.scheme == "auto" and tau_cfl >= 0.5 * tau_reaction))
    blowup_bound = 2.0 * (np.max(np.linalg.norm(p.wells, axis=1)) + 1.0)

    fld = PhaseField(u=u, epsilon=epsilon)
    inter = grid.interior
    it = 0
    res = np.inf
    res_prev = np.inf
    exit_res = opts.flow_exit_factor * tol if opts.newton else tol
    flow_cap = opts.flow_cap if opts.newton else opts.max_iter
    e_prev = np.inf
    u_snap = u.copy()
    halvings = 0

    def checkpoint() -> bool:
        """Residual / blow-up / energy-rollback bookkeeping; True to stop."""
        nonlocal res, res_prev, e_prev, u_snap, halvings, tau
        fld.u = u
        res = el_residual(fld, grid, p, epsilon)
        e_now = energy_of(fld, grid, p, epsilon)
        if opts.log_energy:
            fld.energy_log.append((it, e_now, res))
        if not np.isfinite(res) or np.max(np.abs(u[inter])) > blowup_bound:
            raise BlowUp(f"|u| exceeded {blowup_bound} at iteration {it}")
        if e_now > e_prev + 1e-12 * max(abs(e_prev), 1.0):
            # overshoot: the Lipschitz estimate was optimistic
            if halvings >= 10:
                raise BlowUp("flow step kept increasing the energy")
            u[...] = u_snap
            tau *= 0.5
            halvings += 1
            return False
        u_snap = u.copy()
        e_prev = e_now
        stalled = res > opts.plateau * res_prev
        res_prev = res
        return res <= exit_res or (opts.newton and stalled)

    if use_explicit:
        tau = min(tau_reaction, tau_cfl)
        h2 = grid.hgrid ** 2
        while it < min(opts.max_iter, flow_cap):
            lap = _masked_laplacian(u, grid) / h2
            upd = lap - _wz_interior(p, u, grid) / epsilon ** 2
            u[inter] += tau * upd[inter]
            it += 1
            if it % opts.check_every == 0 and checkpoint():
                break
    else:
        tau = tau_reaction
        A, ghost_maps = _dirichlet_laplacian_matrix(grid)
        Iop = sp.identity(grid.n_interior, format="csr")
        lu = spla.splu((Iop - tau * A / grid.hgrid ** 2).tocsc())
        tau_factored = tau
        while it < min(opts.max_iter, flow_cap):
            if tau != tau_factored:
                lu = spla.splu((Iop - tau * A / grid.hgrid ** 2).tocsc())
                tau_factored = tau
            rhs = (u[inter] - (tau / epsilon ** 2) * p.wz(u[inter])
                   + (tau / grid.hgrid ** 2) * _ghost_contrib(u, grid, ghost_maps))
            unew = np.column_stack([lu.solve(rhs[:, c]) for c in range(m)])
            u[inter] = unew
            it += 1
            if it % opts.check_every == 0 and checkpoint():
                break

    fld.u = u
    res = el_residual(fld, grid, p, epsilon)
    if opts.newton and res > tol:
        tau0 = 20.0 * tau_reaction / epsilon
        u, res, nsteps = _newton_polish(u, grid, p, epsilon, tol,
                                        opts.newton_max, tau0, blowup_bound)
        fld.u = u
        it += nsteps

    fld.iterations = it
    fld.grad_norm = res
    fld.energy = energy_of(fld, grid, p, epsilon)
    fld.converged = res <= tol
    if not fld.converged:
        raise NoConvergence(
            f"residual {res:.3e} above tol {tol:.3e} after {it} iterations")
    m_prime = max(datum.M, float(np.max(np.linalg.norm(p.wells, axis=1)))) + 0.5
    sup_u = float(np.max(np.linalg.norm(u[inter], axis=-1)))
    if sup_u > m_prime:
        raise BlowUp(f"terminal sup |u| = {sup_u:.4f} exceeds M' = {m_prime:.4f}")
    return fld


def _coarsened(grid: DomainGrid, factor: int) -> DomainGrid:
    if grid.kind == "disk":
        return build_disk_grid(grid.radius, grid.hgrid * factor)
    return build_rect_grid(grid.width, grid.height, grid.hgrid * factor)


def minimize_cascade(grid: DomainGrid, datum: BoundaryDatum, p: Potential,
                     epsilon: float, opts: Optional[MinimizeOptions] = None,
                     init: Optional[np.ndarray] = None,
                     levels: int = 1) -> PhaseField:
    """Coarse-to-fine minimize: relax the slow interface modes on 2x-coarser
    grids, then polish on the target grid.  The datum re-evaluates on each
    level's ghost layer; coarse levels may be under-resolved."""
    opts = opts or MinimizeOptions()
    if levels <= 0:
        return minimize(grid, datum, p, epsilon, opts, init=init)
    try:
        coarse = _coarsened(grid, 2)
    except ResolutionTooCoarse:
        return minimize(grid, datum, p, epsilon, opts, init=init)
    c_opts = MinimizeOptions(
        tol=max((opts.tol if opts.tol is not None else 1e-6 / epsilon),
                1e-4 / epsilon),
        scheme=opts.scheme, c_stab=opts.c_stab, check_every=opts.check_every,
        newton=opts.newton, newton_max=opts.newton_max,
        flow_cap=opts.flow_cap, allow_underresolved=True)
    c_init = None
    if init is not None:
        c_fld = PhaseField(u=np.asarray(init, dtype=float), epsilon=epsilon)
        # downsample by bilinear interpolation at the coarse centers
        c_init = np.zeros((coarse.ny, coarse.nx, p.m))
        c_init[coarse.interior] = c_fld.sample(grid, coarse.centers())
    c_sol = minimize_cascade(coarse, datum, p, epsilon, c_opts,
                             init=c_init, levels=levels - 1)
    fine_init = np.zeros((grid.ny, grid.nx, p.m))
    fine_init[grid.interior] = c_sol.sample(coarse, grid.centers())
    return minimize(grid, datum, p, epsilon, opts, init=fine_init)


def _wz_interior(p: Potential, u: np.ndarray, grid: DomainGrid) -> np.ndarray:
    out = np.zeros_like(u)
    out[grid.interior] = p.wz(u[grid.interior])
    return out


def _dirichlet_laplacian_matrix(grid: DomainGrid):
    """(A, ghost_maps): A is the interior-interior 5-point stencil; the ghost
    contribution enters the right-hand side."""
    idx = -np.ones((grid.ny, grid.nx), dtype=np.int64)
    idx[grid.interior] = np.arange(grid.n_interior)
    rows, cols, vals = [], [], []
    base = np.arange(grid.n_interior)
    rows.append(base)
    cols.append(base)
    vals.append(np.full(grid.n_interior, -4.0))
    ghost_maps = []
    for axis, shift in ((0, 1), (0, -1), (1, 1), (1, -1)):
        nb_idx = np.roll(idx, shift, axis=axis)
        nb_ghost = np.roll(grid.ghost, shift, axis=axis)
        ok = grid.interior & (nb_idx >= 0)
        rows.append(idx[ok])
        cols.append(nb_idx[ok])
        vals.append(np.ones(int(ok.sum())))
        ghost_maps.append((axis, shift, grid.interior & nb_ghost))
    A = sp.csr_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(grid.n_interior, grid.n_interior))
    return A, ghost_maps


def _ghost_contrib(u: np.ndarray, grid: DomainGrid, ghost_maps) -> np.ndarray:
    out = np.zeros_like(u)
    for axis, shift, where in ghost_maps:
        out[where] += np.roll(u, shift, axis=axis)[where]
    return out[grid.interior]


def nearest_well_projection(grid: DomainGrid, datum: BoundaryDatum,
                            p: Potential) -> np.ndarray:
    """Initial field: well nearest to the boundary trace, extended inward
    (radially for disks, in place for function data)."""
    u = np.zeros((grid.ny, grid.nx, p.m))
    centers = grid.centers()
    if grid.kind == "disk" and isinstance(datum, DiskArcDatum):
        theta = np.arctan2(centers[:, 1], centers[:, 0])
        vals = datum.eval_angles(theta)
    else:
        vals = datum.eval_points(centers)
    u[grid.interior] = p.wells[p.nearest_well(vals)]
    return u


def step_map_init(grid: DomainGrid, net, domain, p: Potential) -> np.ndarray:
    """Initial field: the step map of a candidate network."""
    from .network import classify_points
    labels = classify_points(net, domain, grid.centers())
    labels = np.where(labels < 0, 0, labels)
    u = np.zeros((grid.ny, grid.nx, p.m))
    u[grid.interior] = p.wells[labels]
    return u


def profile_init(grid: DomainGrid, net, domain, profiles, p: Potential,
                 epsilon: float) -> np.ndarray:
    """Initial field: the 1D connection profile across the nearest arc.

    A mollified step map: each interior cell takes the heteroclinic value at
    its signed distance to the nearest nondegenerate arc (left face = the
    arc's phases[0]).  Junction neighborhoods are crude but relax quickly.
    """
    from . import geometry as geo
    from .network import cross_side
    pts = grid.centers()
    best_d = np.full(len(pts), np.inf)
    best_side = np.ones(len(pts))
    best_arc = np.zeros(len(pts), dtype=int)
    for k, arc in enumerate(net.arcs):
        if arc.degenerate:
            continue
        d = geo.point_polyline_distance(pts, arc.points)
        upd = d < best_d
        best_d[upd] = d[upd]
        best_arc[upd] = k
        s = cross_side(arc.points, pts[upd])
        best_side[upd] = np.where(s >= 0, 1.0, -1.0)
    vals = np.empty((len(pts), p.m))
    for k, arc in enumerate(net.arcs):
        sel = best_arc == k
        if not np.any(sel) or arc.degenerate:
            continue
        left, right = arc.phases
        key = (right, left) if (right, left) in profiles else None
        if key is None and (left, right) in profiles:
            prof = profiles[(left, right)].reversed()
        else:
            prof = profiles[key]
        vals[sel] = prof.eval(best_side[sel] * best_d[sel] / epsilon)
    u = np.zeros((grid.ny, grid.nx, p.m))
    u[grid.interior] = vals
    return u


# -- exports ---------------------------------------------------------------------


def save_field_binary(path, fieldv: PhaseField, grid: DomainGrid) -> None:
    """Header: ny, nx, m (int32), hgrid, epsilon (float64); body row-major
    float64 with NaN outside interior + ghost."""
    u = fieldv.u.astype(np.float64).copy()
    u[~(grid.interior | grid.ghost)] = np.nan
    with open(path, "wb") as fh:
        fh.write(struct.pack("<iii", grid.ny, grid.nx, fieldv.m))
        fh.write(struct.pack("<dd", grid.hgrid, fieldv.epsilon))
        fh.write(u.tobytes(order="C"))


def load_field_binary(path) -> Tuple[np.ndarray, float, float]:
    with open(path, "rb") as fh:
        ny, nx, m = struct.unpack("<iii", fh.read(12))
        hgrid, epsilon = struct.unpack("<dd", fh.read(16))
        body = np.frombuffer(fh.read(), dtype=np.float64).reshape(ny, nx, m)
    return body, hgrid, epsilon


def save_field_csv(path, fieldv: PhaseField, grid: DomainGrid) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x", "y"] + [f"u{k}" for k in range(fieldv.m)])
        vals = fieldv.u[grid.interior]
        for (x, y), v in zip(grid.centers(), vals):
            wr.writerow([repr(float(x)), repr(float(y))] + [repr(float(c)) for c in v])


def save_energy_log(path, fieldv: PhaseField) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["iteration", "energy", "residual"])
        for it, e, r in fieldv.energy_log:
            wr.writerow([it, repr(e), repr(r)])
