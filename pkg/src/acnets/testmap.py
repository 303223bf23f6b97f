"""Explicit upper-bound test maps built from a network.

Across each arc the map equals the 1D heteroclinic profile at the interface
scale; beyond the profile strip it blends linearly to the wells; away from
the network it is constant on each face; inside a ball of radius rho around
each branch point it interpolates radially from the ball boundary.  The
energy of this competitor exceeds the weighted network length by
O(eps |ln eps|^2), dominated by the junction balls.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .connections import ConnectionProfile, SurfaceTensionMatrix
from .errors import GeometryConflict, NegativeExcessBeyondTolerance
from .field_solver import (BoundaryDatum, DomainGrid, PhaseField,
                           build_disk_grid, build_rect_grid, energy_of)
from .network import DiskDomain, Network, classify_points, trace_faces
from .potential import Potential

REGION_CONST, REGION_STRIP, REGION_BLEND, REGION_BALL = 0, 1, 2, 3


def min_junction_angle(net: Network) -> float:
    """Smallest sector angle over all branch nodes with >= 2 distinct
    incident directions."""
    best = np.pi
    for k, nd in enumerate(net.nodes):
        if nd.kind != "branch":
            continue
        dirs = []
        for ai in net.incident_arcs(k):
            arc = net.arcs[ai]
            if arc.degenerate:
                continue
            pts = arc.points if arc.nodes[0] == k else arc.points[::-1]
            v = pts[-1] - pts[0]
            nv = np.linalg.norm(v)
            if nv > 0:
                dirs.append(np.arctan2(v[1], v[0]))
        if len(dirs) < 2:
            continue
        dirs = np.sort(np.asarray(dirs))
        gaps = np.diff(np.append(dirs, dirs[0] + 2 * np.pi))
        best = min(best, float(gaps.min()))
    return best


@dataclass
class TestMapParams:
    """Geometry of the strip / blend / ball decomposition."""

    kappa0: float
    alpha0: float
    epsilon: float
    h: float
    rho: float

    @staticmethod
    def for_network(net: Network, epsilon: float,
                    profiles: Dict[Tuple[int, int], ConnectionProfile],
                    kappa0: Optional[float] = None) -> "TestMapParams":
        """Defaults: kappa0 = 2 / c0 with c0 the measured exponential rate
        of the profiles, which buries the blend terms below eps |ln eps|^2."""
        if kappa0 is None:
            rates = [prof.tail_rate() for prof in profiles.values()]
            c0 = min(r for r in rates if np.isfinite(r) and r > 0)
            kappa0 = 2.0 / c0
        alpha0 = min_junction_angle(net)
        h = kappa0 * epsilon * abs(np.log(epsilon))
        rho = 4.0 * h / np.sin(0.5 * alpha0)
        params = TestMapParams(kappa0=float(kappa0), alpha0=float(alpha0),
                               epsilon=float(epsilon), h=float(h), rho=float(rho))
        params.check(net)
        return params

    def check(self, net: Network) -> None:
        lengths = [a.length for a in net.arcs if not a.degenerate]
        if lengths and 2.0 * self.h >= min(lengths) / 4.0:
            raise GeometryConflict(
                f"strip half-width 2h = {2 * self.h:.4g} exceeds a quarter "
                f"of the shortest arc {min(lengths):.4g}")
        branch = [nd.position for nd in net.nodes if nd.kind == "branch"]
        dists = []
        for i in range(len(branch)):
            for j in range(i + 1, len(branch)):
                d = float(np.linalg.norm(branch[i] - branch[j]))
                if d > 1e-12:
                    dists.append(d)
        if dists and self.rho >= min(dists) / 2.0:
            raise GeometryConflict(
                f"ball radius rho = {self.rho:.4g} exceeds half the branch "
                f"separation {min(dists):.4g}")


def _profile_for(profiles, pair) -> ConnectionProfile:
    if pair in profiles:
        return profiles[pair]
    rev = (pair[1], pair[0])
    if rev in profiles:
        return profiles[rev].reversed()
    raise KeyError(f"no connection profile for well pair {pair}")


class TestMap:
    """Evaluator for the test map; regions are recorded per grid cell."""

    def __init__(self, net: Network, sigma_profiles, p: Potential,
                 domain: DiskDomain, params: TestMapParams):
        self.net = net
        self.profiles = (sigma_profiles.profiles
                         if isinstance(sigma_profiles, SurfaceTensionMatrix)
                         else sigma_profiles)
        if self.profiles is None:
            raise ValueError("a profile set is required to build a test map")
        self.p = p
        self.domain = domain
        self.params = params
        self.faces = trace_faces(net, domain) if net.arcs else None
        self.arcs = [(a.points[0], a.points[-1], a.phases)
                     for a in net.arcs if not a.degenerate]
        self.branch_pos = []
        seen = []
        for nd in net.nodes:
            if nd.kind != "branch":
                continue
            if any(np.linalg.norm(nd.position - q) < 1e-12 for q in seen):
                continue
            # balls only at branch points with nondegenerate incident arcs
            seen.append(nd.position)
        self.branch_pos = [q for q in seen if self._has_live_arc(q)]

    def _has_live_arc(self, q) -> bool:
        return any(np.linalg.norm(p1 - q) < 1e-12 or np.linalg.norm(p2 - q) < 1e-12
                   for p1, p2, _ in self.arcs)

    def eval_nonball(self, pts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Strip / blend / constant evaluation; returns (values, region)."""
        pts = np.atleast_2d(pts)
        n = len(pts)
        h = self.params.h
        eps = self.params.epsilon
        vals = np.zeros((n, self.p.m))
        region = np.full(n, REGION_CONST, dtype=np.int8)
        claim_profile = np.zeros(n, dtype=int)
        claim_blend = np.zeros(n, dtype=int)

        for p1, p2, (left, right) in self.arcs:
            seg = p2 - p1
            L = float(np.linalg.norm(seg))
            tau = seg / L
            nu = np.array([-tau[1], tau[0]])   # left normal
            rel = pts - p1
            s = rel @ tau
            t = rel @ nu
            in_span = (s >= -0.5 * h) & (s <= L + 0.5 * h)
            strip = in_span & (np.abs(t) <= h)
            blend = in_span & (np.abs(t) > h) & (np.abs(t) <= 2.0 * h)
            prof = _profile_for(self.profiles, (right, left))
            if np.any(strip):
                vals[strip] = prof.eval(t[strip] / eps)
                claim_profile += strip
                region[strip] = REGION_STRIP
            if np.any(blend):
                up = blend & (t > 0)
                dn = blend & (t < 0)
                if np.any(up):
                    edge = prof.eval(np.array([h / eps]))[0]
                    lam = (t[up] / h - 1.0)[:, None]
                    vals[up] = edge * (1.0 - lam) + self.p.wells[left] * lam
                if np.any(dn):
                    edge = prof.eval(np.array([-h / eps]))[0]
                    lam = (np.abs(t[dn]) / h - 1.0)[:, None]
                    vals[dn] = edge * (1.0 - lam) + self.p.wells[right] * lam
                claim_blend += blend
                region[blend] = REGION_BLEND
        if np.any(claim_profile > 1):
            raise GeometryConflict(
                "profile strips of distinct arcs overlap outside the junction balls")
        if np.any((claim_profile + claim_blend) > 1):
            raise GeometryConflict(
                "blend strips of distinct arcs overlap outside the junction balls")

        const = region == REGION_CONST
        if np.any(const):
            if self.arcs:
                labels = classify_points(self.net, self.domain, pts[const],
                                         faces=self.faces)
                labels = np.where(labels < 0, self.net.face_labels[0]
                                  if self.net.face_labels else 0, labels)
            else:
                lab = self.net.face_labels[0] if self.net.face_labels else 0
                labels = np.full(int(const.sum()), lab)
            vals[const] = self.p.wells[labels]
        return vals, region

    def eval(self, pts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        pts = np.atleast_2d(pts)
        vals = np.zeros((len(pts), self.p.m))
        region = np.full(len(pts), REGION_CONST, dtype=np.int8)
        ball_of = np.full(len(pts), -1, dtype=int)
        rr = np.full(len(pts), np.inf)
        for bi, q in enumerate(self.branch_pos):
            d = np.linalg.norm(pts - q, axis=1)
            inside = d < self.params.rho
            take = inside & (d < rr)
            ball_of[take] = bi
            rr[take] = d[take]
        outside = ball_of < 0
        if np.any(outside):
            vals[outside], region[outside] = self.eval_nonball(pts[outside])
        for bi, q in enumerate(self.branch_pos):
            sel = ball_of == bi
            if not np.any(sel):
                continue
            rel = pts[sel] - q
            r = np.linalg.norm(rel, axis=1)
            r_safe = np.where(r == 0, 1.0, r)
            y = q + self.params.rho * rel / r_safe[:, None]
            vy, _ = self.eval_nonball(y)
            vals[sel] = (r / self.params.rho)[:, None] * vy
            region[sel] = REGION_BALL
        return vals, region


def build_test_map(net: Network, sigma_profiles, grid: DomainGrid,
                   p: Potential, domain: DiskDomain, epsilon: float,
                   params: Optional[TestMapParams] = None,
                   datum: Optional[BoundaryDatum] = None
                   ) -> Tuple[PhaseField, np.ndarray, TestMapParams]:
    """Evaluate the test map on a grid.

    Returns (field, region mask, params); the region mask (full grid shape)
    records strip / blend / ball / constant per interior cell.  Ghost cells
    take the Dirichlet datum when given (admissible competitor), else the
    map's own trace.
    """
    if params is None:
        profiles = (sigma_profiles.profiles
                    if isinstance(sigma_profiles, SurfaceTensionMatrix)
                    else sigma_profiles)
        params = TestMapParams.for_network(net, epsilon, profiles)
    tm = TestMap(net, sigma_profiles, p, domain, params)
    u = np.zeros((grid.ny, grid.nx, p.m))
    region = np.full(grid.mask.shape, -1, dtype=np.int8)
    vals, reg = tm.eval(grid.centers())
    u[grid.interior] = vals
    region[grid.interior] = reg
    if datum is not None:
        u[grid.ghost] = datum.ghost_values(grid)
    else:
        gvals, _ = tm.eval(grid.ghost_projections())
        u[grid.ghost] = gvals
    fld = PhaseField(u=u, epsilon=epsilon)
    fld.energy = energy_of(fld, grid, p, epsilon)
    return fld, region, params


def energy_breakdown(fld: PhaseField, region: np.ndarray, grid: DomainGrid,
                     p: Potential, epsilon: float) -> Dict[str, float]:
    out = {}
    for name, code in (("strip", REGION_STRIP), ("blend", REGION_BLEND),
                       ("ball", REGION_BALL), ("constant", REGION_CONST)):
        out[name] = energy_of(fld, grid, p, epsilon, region=(region == code))
    return out


@dataclass
class UpperBoundFit:
    eps_list: List[float]
    excess: List[float]
    C: float
    q: float
    positive: bool
    decreasing: bool
    breakdowns: List[Dict[str, float]]

    def passes(self, q_max: float = 2.5) -> bool:
        return self.positive and self.decreasing and self.q <= q_max


def verify_upper_bound(net: Network, sigma: SurfaceTensionMatrix,
                       base_grid: DomainGrid, p: Potential,
                       domain: DiskDomain, eps_list: Sequence[float],
                       datum_builder=None, kappa0: Optional[float] = None,
                       refine: int = 2,
                       negative_tol: float = 1e-6) -> UpperBoundFit:
    """Excess e(eps) = J(u_test) - F(net) across epsilon, with the fit
    e = C eps |ln eps|^q.

    Quadrature runs on a grid refined `refine`-fold relative to base_grid.
    Strongly negative excess signals an energy-quadrature defect and
    raises; the fit reports (C, q) with positivity and monotonicity flags.
    """
    from .network import energy_F
    if len(eps_list) < 3:
        raise ValueError("need at least 3 epsilon values")
    F = energy_F(net, sigma)
    if base_grid.kind == "disk":
        fine = build_disk_grid(base_grid.radius, base_grid.hgrid / refine)
    else:
        fine = build_rect_grid(base_grid.width, base_grid.height,
                               base_grid.hgrid / refine)
    excess = []
    breakdowns = []
    for eps in sorted(eps_list, reverse=True):
        datum = datum_builder(fine, eps) if datum_builder is not None else None
        fld, region, params = build_test_map(
            net, sigma, fine, p, domain, eps, datum=datum,
            params=None if kappa0 is None else TestMapParams.for_network(
                net, eps, sigma.profiles, kappa0=kappa0))
        e = fld.energy - F
        if e < -negative_tol * max(F, 1.0):
            raise NegativeExcessBeyondTolerance(
                f"J(u_test) - F = {e:.3e} at eps = {eps}: the true minimum can "
                "sit below F only by the lower-bound error")
        excess.append(e)
        breakdowns.append(energy_breakdown(fld, region, fine, p, eps))
    eps_sorted = sorted(eps_list, reverse=True)
    loge = np.log(np.maximum(excess, 1e-300))
    x = np.log(np.abs(np.log(eps_sorted)))
    y = loge - np.log(eps_sorted)
    coef = np.polyfit(x, y, 1)
    q = float(coef[0])
    C = float(np.exp(coef[1]))
    positive = all(e > 0 for e in excess)
    decreasing = all(excess[k + 1] < excess[k] for k in range(len(excess) - 1))
    return UpperBoundFit(eps_list=list(eps_sorted), excess=excess, C=C, q=q,
                         positive=positive, decreasing=decreasing,
                         breakdowns=breakdowns)


def breakdown_to_csv(path, fit: UpperBoundFit) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["epsilon", "excess", "strip", "blend", "ball", "constant"])
        for eps, e, bd in zip(fit.eps_list, fit.excess, fit.breakdowns):
            wr.writerow([repr(eps), repr(e)] +
                        [repr(bd[k]) for k in ("strip", "blend", "ball", "constant")])
