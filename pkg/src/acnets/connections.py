"""Minimizing 1D heteroclinic connections between wells and surface tensions.

A connection between wells a_i, a_j minimizes the action
    S[u] = int ( |u'|^2 / 2 + W(u) ) dt
over profiles clamped at the wells on a window [-T, T].  At a minimizer the
kinetic and potential integrals agree (equipartition), and the surface
tension is sigma = int |u'|^2 dt = 2 * kinetic.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import EndpointDrift, NegativeEntry, NoConvergence, TriangleViolation
from .potential import Potential, half_min_separation

EQUIPARTITION_TOL = 0.02


class TriangleWarning(UserWarning):
    """A manual sigma table violates the strict triangle inequality."""


@dataclass
class ConnectionProfile:
    """Samples of a minimizing connection on a uniform grid over [-T, T]."""

    well_from: int
    well_to: int
    t: np.ndarray            # (n,)
    samples: np.ndarray      # (n, m)
    dt: float
    energy: float            # sigma = 2 * kinetic integral
    kinetic: float
    potential: float
    iterations: int = 0

    @property
    def T(self) -> float:
        return float(self.t[-1])

    @property
    def action(self) -> float:
        return self.kinetic + self.potential

    def eval(self, tq) -> np.ndarray:
        """Linear interpolation of the profile; clamps to the wells outside."""
        tq = np.atleast_1d(np.asarray(tq, dtype=float))
        out = np.empty((len(tq), self.samples.shape[1]))
        for k in range(self.samples.shape[1]):
            out[:, k] = np.interp(tq, self.t, self.samples[:, k])
        return out

    def reversed(self) -> "ConnectionProfile":
        return ConnectionProfile(
            well_from=self.well_to, well_to=self.well_from, t=self.t.copy(),
            samples=self.samples[::-1].copy(), dt=self.dt, energy=self.energy,
            kinetic=self.kinetic, potential=self.potential,
            iterations=self.iterations)

    def tail_rate(self) -> float:
        """Exponential decay rate c0 of |u - a| in rescaled time, fitted on
        the right tail."""
        a = self.samples[-1]
        dist = np.linalg.norm(self.samples - a, axis=1)
        mask = (self.t > 0) & (dist > 1e-9) & (dist < 0.05 * dist.max())
        if mask.sum() < 5:
            mask = (self.t > 0) & (dist > 1e-12)
        coef = np.polyfit(self.t[mask], np.log(dist[mask]), 1)
        return float(-coef[0])

    def check_invariants(self, d0: float) -> None:
        drift0 = np.linalg.norm(self.samples[0] - self.samples[0])  # clamped
        del drift0
        if self.energy < 0:
            raise NoConvergence("negative connection energy")
        if abs(self.kinetic - self.potential) > EQUIPARTITION_TOL * max(self.energy, 1e-30):
            raise NoConvergence(
                f"equipartition violated: kin={self.kinetic:.6g} pot={self.potential:.6g}")
        del d0


def _action_and_grad(u: np.ndarray, dt: float, p: Potential) -> Tuple[float, float, float, np.ndarray]:
    """Discrete action with midpoint potential; returns (kin, pot, action, grad).

    grad is with respect to the interior samples u[1:-1].
    """
    du = u[1:] - u[:-1]
    kin = float(np.sum(du * du) / (2.0 * dt))
    mid = 0.5 * (u[1:] + u[:-1])
    wm = p.w(mid)
    pot = float(np.sum(wm) * dt)
    wzm = p.wz(mid)
    # d kin / d u_k  = (2 u_k - u_{k-1} - u_{k+1}) / dt
    gk = (2.0 * u[1:-1] - u[:-2] - u[2:]) / dt
    # d pot / d u_k = dt/2 * (W_z(mid_{k-1}) + W_z(mid_k))
    gp = 0.5 * dt * (wzm[:-1] + wzm[1:])
    return kin, pot, kin + pot, gk + gp


def _bb_minimize(u0: np.ndarray, dt: float, p: Potential, tol: float,
                 max_iter: int) -> Tuple[np.ndarray, int]:
    """Barzilai-Borwein descent with a nonmonotone (GLL) safeguard."""
    u = u0.copy()
    kin, pot, f, g = _action_and_grad(u, dt, p)
    alpha = 0.25 * dt
    hist = [f]
    x_prev = None
    g_prev = None
    for it in range(1, max_iter + 1):
        gnorm = np.max(np.abs(g))
        if gnorm <= tol:
            return u, it
        step = np.clip(alpha, 1e-6 * dt, 1e4 * dt)
        fref = max(hist[-10:])
        for _ in range(40):
            u_try = u.copy()
            u_try[1:-1] = u[1:-1] - step * g
            kin, pot, f_try, g_try = _action_and_grad(u_try, dt, p)
            if f_try <= fref - 1e-4 * step * float(np.sum(g * g)):
                break
            step *= 0.5
        else:
            return u, it
        x_prev, g_prev = u[1:-1].copy(), g.copy()
        u, f, g = u_try, f_try, g_try
        hist.append(f)
        s = u[1:-1] - x_prev
        y = g - g_prev
        sy = float(np.sum(s * y))
        alpha = float(np.sum(s * s)) / sy if sy > 1e-300 else 0.25 * dt
    return u, max_iter + 1


def _cascade_minimize(u0: np.ndarray, T: float, p: Potential, tol: float,
                      max_iter: int) -> Tuple[np.ndarray, int]:
    """Coarse-to-fine BB descent: solve on decimated grids, then polish."""
    n = u0.shape[0]
    levels = []
    step = 1
    while (n - 1) // step >= 128:
        levels.append(step)
        step *= 4
    levels = levels[::-1] or [1]

    total_its = 0
    u_coarse = None
    t_full = np.linspace(-T, T, n)
    for lev, stride in enumerate(levels):
        idx = np.arange(0, n, stride)
        if idx[-1] != n - 1:
            idx = np.append(idx, n - 1)
        t_lev = t_full[idx]
        dt_lev = 2.0 * T / (len(idx) - 1)
        t_lev = np.linspace(-T, T, len(idx))
        if u_coarse is None:
            u_lev = u0[idx]
        else:
            u_lev = np.column_stack(
                [np.interp(t_lev, t_prev, u_coarse[:, k]) for k in range(p.m)])
        lev_tol = tol if stride == 1 else max(tol, 1e-6)
        u_lev, its = _bb_minimize(u_lev, dt_lev, p, lev_tol, max_iter)
        total_its += its
        u_coarse, t_prev = u_lev, t_lev
    return u_coarse, total_its


def _passes_third_well(u: np.ndarray, p: Potential, i: int, j: int) -> bool:
    """Does the path run close to a well other than its endpoints?"""
    if len(p.wells) <= 2:
        return False
    d0 = half_min_separation(p.wells)
    others = [k for k in range(len(p.wells)) if k not in (i, j)]
    d = np.linalg.norm(u[:, None, :] - p.wells[others], axis=-1)
    return bool(d.min() < 0.5 * d0)


def solve_connection(p: Potential, i: int, j: int, T: float = 20.0,
                     n_pts: int = 2001, tol: float = 1e-8,
                     max_iter: int = 50000) -> ConnectionProfile:
    """Minimize the discrete 1D action between wells i and j.

    Endpoints are clamped at the wells.  Starts from the linear
    interpolation between the wells; if that minimizer strays near a third
    well, mountain-pass-style perpendicular-bump starts are added and the
    lowest-action result is kept.
    """
    if i == j:
        raise ValueError("connection requires two distinct wells")
    if not (0 <= i < len(p.wells) and 0 <= j < len(p.wells)):
        raise IndexError("well index out of range")
    a, b = p.wells[i], p.wells[j]
    t = np.linspace(-T, T, n_pts)
    dt = t[1] - t[0]
    lam = (t + T) / (2.0 * T)
    straight = a[None, :] + lam[:, None] * (b - a)[None, :]

    u, its = _cascade_minimize(straight, T, p, tol, max_iter)
    kin, pot, f, g = _action_and_grad(u, dt, p)
    best = (u, its, f, kin, pot)

    if p.m >= 2 and _passes_third_well(u, p, i, j):
        d = (b - a) / np.linalg.norm(b - a)
        perp = np.zeros(p.m)
        perp[0], perp[1] = -d[1], d[0]
        bump = np.sin(np.pi * lam)[:, None] * perp[None, :]
        amp = 0.5 * np.linalg.norm(b - a)
        for u0 in (straight + amp * bump, straight - amp * bump):
            u2, its2 = _cascade_minimize(u0, T, p, tol, max_iter)
            kin2, pot2, f2, g2 = _action_and_grad(u2, dt, p)
            if f2 < best[2]:
                best = (u2, its2, f2, kin2, pot2)
    u, its, f, kin, pot = best

    d0 = half_min_separation(p.wells)
    if (np.linalg.norm(u[0] - a) > 1e-3 * d0
            or np.linalg.norm(u[-1] - b) > 1e-3 * d0):
        raise EndpointDrift("profile endpoints left the wells")

    prof = ConnectionProfile(well_from=i, well_to=j, t=t, samples=u, dt=float(dt),
                             energy=2.0 * kin, kinetic=kin, potential=pot,
                             iterations=its)
    prof.check_invariants(d0)
    return prof


@dataclass
class SurfaceTensionMatrix:
    """Symmetric nonnegative matrix of pairwise surface tensions."""

    n: int
    sigma: np.ndarray
    profiles: Optional[Dict[Tuple[int, int], ConnectionProfile]] = field(
        default=None, repr=False, compare=False)

    def __post_init__(self):
        self.sigma = np.asarray(self.sigma, dtype=float)
        if self.sigma.shape != (self.n, self.n):
            raise ValueError("sigma shape must be (n, n)")

    def value(self, i: int, j: int) -> float:
        return float(self.sigma[i, j])

    @property
    def max_offdiag(self) -> float:
        off = self.sigma[~np.eye(self.n, dtype=bool)]
        return float(off.max()) if off.size else 0.0

    def triangle_violations(self, tol: float = 0.0):
        """Triples (i, j, k) with sigma_ij + sigma_ik <= sigma_jk + tol."""
        out = []
        for i in range(self.n):
            for j in range(self.n):
                for k in range(self.n):
                    if len({i, j, k}) < 3:
                        continue
                    if self.sigma[i, j] + self.sigma[i, k] <= self.sigma[j, k] + tol:
                        out.append((i, j, k))
        return out

    def check(self, strict_triangle: bool = True) -> None:
        if not np.allclose(self.sigma, self.sigma.T, atol=1e-12):
            raise ValueError("sigma must be symmetric")
        if np.any(np.abs(np.diag(self.sigma)) > 1e-12):
            raise ValueError("sigma diagonal must be zero")
        off = self.sigma[~np.eye(self.n, dtype=bool)]
        if np.any(off < 0):
            raise NegativeEntry("negative surface tension")
        if strict_triangle:
            bad = self.triangle_violations()
            if bad:
                raise TriangleViolation(bad[0])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["i", "j", "sigma"])
            for i in range(self.n):
                for j in range(self.n):
                    wr.writerow([i, j, repr(self.sigma[i, j])])


def assemble_sigma(p: Potential, T: float = 20.0, n_pts: int = 2001,
                   tol: float = 1e-8) -> SurfaceTensionMatrix:
    """Solve all pairwise connections and assemble the sigma matrix.

    Raises TriangleViolation (with the offending triple) if the strict
    triangle inequality fails: such a potential is inadmissible for the
    fine-structure analysis.
    """
    n = len(p.wells)
    sigma = np.zeros((n, n))
    profiles: Dict[Tuple[int, int], ConnectionProfile] = {}
    for i in range(n):
        for j in range(i + 1, n):
            prof = solve_connection(p, i, j, T=T, n_pts=n_pts, tol=tol)
            sigma[i, j] = sigma[j, i] = prof.energy
            profiles[(i, j)] = prof
            profiles[(j, i)] = prof.reversed()
    mat = SurfaceTensionMatrix(n=n, sigma=sigma, profiles=profiles)
    mat.check(strict_triangle=True)
    return mat


def set_sigma_manual(n: int, entries) -> SurfaceTensionMatrix:
    """Build a sigma matrix from prescribed values.

    entries is either a full (n, n) array or a dict {(i, j): sigma}.
    Triangle violations are reported as warnings, not errors (the scenario
    studies deliberately explore the boundary of admissibility).
    """
    if isinstance(entries, dict):
        sigma = np.zeros((n, n))
        for (i, j), v in entries.items():
            sigma[i, j] = v
            sigma[j, i] = v
    else:
        sigma = np.asarray(entries, dtype=float).copy()
    mat = SurfaceTensionMatrix(n=n, sigma=sigma)
    if not np.allclose(sigma, sigma.T, atol=1e-12):
        raise ValueError("sigma must be symmetric")
    if np.any(np.abs(np.diag(sigma)) > 1e-12):
        raise ValueError("sigma diagonal must be zero")
    off = sigma[~np.eye(n, dtype=bool)]
    if np.any(off <= 0):
        raise NegativeEntry("off-diagonal surface tensions must be positive")
    bad = mat.triangle_violations()
    if bad:
        warnings.warn(f"triangle inequality violated for triples {bad[:3]}",
                      TriangleWarning, stacklevel=2)
    return mat


def profile_to_csv(prof: ConnectionProfile, path) -> None:
    m = prof.samples.shape[1]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t"] + [f"u{k}" for k in range(m)])
        for row_t, row_u in zip(prof.t, prof.samples):
            wr.writerow([repr(float(row_t))] + [repr(float(v)) for v in row_u])
