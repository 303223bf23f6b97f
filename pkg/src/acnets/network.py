"""Separating networks: nodes, polyline arcs with phase-pair labels, faces.

A network partitions the domain into one simply connected face per well.
Combinatorics: with N wells and Ntilde boundary wells there are
n_s = 3(N-1) - Ntilde arcs and n_b = 2(N-1) - Ntilde triple-junction branch
points (degenerate zero-length arcs included in the counts).

Orientation convention: traversing an arc's polyline from points[0] to
points[-1], phases[0] is the face on the left, phases[1] on the right.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import geometry as geo
from .connections import SurfaceTensionMatrix
from .errors import (DegenerateJunction, MissingSigma, NoCorrespondence,
                     TargetTooFar)

DEGENERATE_TOL = 1e-12


@dataclass(frozen=True)
class DiskDomain:
    """Disk of radius R centered at the origin."""

    radius: float

    def contains(self, pts, pad: float = 0.0) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.hypot(pts[:, 0], pts[:, 1]) <= self.radius + pad

    def on_boundary(self, pts, tol: float) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.abs(np.hypot(pts[:, 0], pts[:, 1]) - self.radius) <= tol

    def boundary_point(self, angle: float) -> np.ndarray:
        return self.radius * np.array([np.cos(angle), np.sin(angle)])

    def angle_of(self, pt) -> float:
        return float(np.arctan2(pt[1], pt[0]) % (2.0 * np.pi))

    @property
    def circumference(self) -> float:
        return 2.0 * np.pi * self.radius

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius


@dataclass
class NetworkNode:
    position: np.ndarray
    kind: str  # "branch" | "end"

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(2)
        if self.kind not in ("branch", "end"):
            raise ValueError(f"node kind must be branch or end, got {self.kind!r}")


@dataclass
class NetworkArc:
    points: np.ndarray          # (k, 2) polyline
    nodes: Tuple[int, int]      # node indices (points[0] at nodes[0])
    phases: Tuple[int, int]     # (left well, right well)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.nodes = (int(self.nodes[0]), int(self.nodes[1]))
        self.phases = (int(self.phases[0]), int(self.phases[1]))
        if self.phases[0] == self.phases[1]:
            raise ValueError("arc phase pair must be two distinct wells")

    @property
    def length(self) -> float:
        return geo.polyline_length(self.points)

    @property
    def degenerate(self) -> bool:
        return self.length <= DEGENERATE_TOL

    def reversed_points(self) -> np.ndarray:
        return self.points[::-1].copy()


@dataclass
class Network:
    nodes: List[NetworkNode]
    arcs: List[NetworkArc]
    N: int
    Ntilde: int
    face_labels: List[int] = field(default_factory=list)

    @staticmethod
    def build(nodes: Sequence, arcs: Sequence, N: int, Ntilde: int,
              face_labels: Sequence[int] = ()) -> "Network":
        """Convenience constructor.

        nodes: (x, y, kind) triples; arcs: (i, j, (left, right)) or
        (i, j, (left, right), points).  Arcs without explicit points become
        straight segments between their endpoint nodes.
        """
        node_objs = [NetworkNode(np.array([x, y]), kind) for x, y, kind in nodes]
        arc_objs = []
        for spec in arcs:
            if len(spec) == 3:
                i, j, phases = spec
                pts = np.vstack([node_objs[i].position, node_objs[j].position])
            else:
                i, j, phases, pts = spec
            arc_objs.append(NetworkArc(np.asarray(pts, dtype=float), (i, j), tuple(phases)))
        return Network(node_objs, arc_objs, int(N), int(Ntilde), list(face_labels))

    # -- basic quantities ---------------------------------------------------

    @property
    def n_arcs(self) -> int:
        return len(self.arcs)

    @property
    def n_branch(self) -> int:
        return sum(1 for nd in self.nodes if nd.kind == "branch")

    @property
    def n_end(self) -> int:
        return sum(1 for nd in self.nodes if nd.kind == "end")

    def degrees(self) -> np.ndarray:
        deg = np.zeros(len(self.nodes), dtype=int)
        for arc in self.arcs:
            deg[arc.nodes[0]] += 1
            deg[arc.nodes[1]] += 1
        return deg

    def incident_arcs(self, node_idx: int) -> List[int]:
        return [k for k, a in enumerate(self.arcs) if node_idx in a.nodes]

    def copy(self) -> "Network":
        return Network(
            [NetworkNode(nd.position.copy(), nd.kind) for nd in self.nodes],
            [NetworkArc(a.points.copy(), a.nodes, a.phases) for a in self.arcs],
            self.N, self.Ntilde, list(self.face_labels))

    def scale(self) -> float:
        pts = np.vstack([a.points for a in self.arcs]) if self.arcs else np.zeros((1, 2))
        span = np.ptp(pts, axis=0).max() if len(pts) > 1 else 1.0
        return max(float(span), 1e-12)

    def distance_to(self, pts) -> np.ndarray:
        """Distance from points (n, 2) to the union of nondegenerate arcs."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        best = np.full(len(pts), np.inf)
        for arc in self.arcs:
            if arc.degenerate:
                continue
            best = np.minimum(best, geo.point_polyline_distance(pts, arc.points))
        return best


# -- energy ------------------------------------------------------------------


def energy_F(net: Network, sigma: SurfaceTensionMatrix) -> float:
    """Weighted length F = sum_gamma sigma(a, a') |gamma|.

    Degenerate arcs contribute zero regardless of their phase pair.
    """
    total = 0.0
    for arc in net.arcs:
        a, b = arc.phases
        if not (0 <= a < sigma.n and 0 <= b < sigma.n):
            raise MissingSigma(f"no sigma entry for phase pair {arc.phases}")
        L = arc.length
        if L <= DEGENERATE_TOL:
            continue
        s = sigma.value(a, b)
        if s <= 0.0:
            raise MissingSigma(f"sigma({a},{b}) is not positive")
        total += s * L
    return total


# -- metric ------------------------------------------------------------------


def _match_arcs(net1: Network, net2: Network) -> List[Tuple[int, int, bool]]:
    """Bijective arc correspondence by (phase pair, endpoint kinds), ties
    broken by nearest endpoints.  Returns (i, j, flip) triples."""
    if net1.n_arcs != net2.n_arcs:
        raise NoCorrespondence("arc counts differ")

    def key(net, arc):
        kinds = tuple(sorted((net.nodes[arc.nodes[0]].kind, net.nodes[arc.nodes[1]].kind)))
        return (frozenset(arc.phases), kinds)

    groups1: Dict = {}
    groups2: Dict = {}
    for idx, arc in enumerate(net1.arcs):
        groups1.setdefault(key(net1, arc), []).append(idx)
    for idx, arc in enumerate(net2.arcs):
        groups2.setdefault(key(net2, arc), []).append(idx)
    if set(groups1) != set(groups2) or any(
            len(groups1[k]) != len(groups2[k]) for k in groups1):
        raise NoCorrespondence("arc type multisets differ")

    out = []
    for k in groups1:
        left = list(groups1[k])
        right = list(groups2[k])
        while left:
            i = left.pop(0)
            pi = net1.arcs[i].points
            best = None
            for j in right:
                pj = net2.arcs[j].points
                d_fwd = (np.linalg.norm(pi[0] - pj[0]) + np.linalg.norm(pi[-1] - pj[-1]))
                d_rev = (np.linalg.norm(pi[0] - pj[-1]) + np.linalg.norm(pi[-1] - pj[0]))
                cand = (min(d_fwd, d_rev), d_rev < d_fwd, j)
                if best is None or cand[0] < best[0]:
                    best = cand
            _, flip, j = best
            right.remove(j)
            out.append((i, j, flip))
    return out


def distance(net1: Network, net2: Network,
             correspondence: Optional[List[Tuple[int, int, bool]]] = None) -> float:
    """Network metric: sum over corresponding arcs of the sup-norm distance
    of constant-speed reparameterizations."""
    if correspondence is None:
        correspondence = _match_arcs(net1, net2)
    total = 0.0
    for i, j, flip in correspondence:
        p1 = net1.arcs[i].points
        p2 = net2.arcs[j].points
        if flip:
            p2 = p2[::-1]
        total += geo.sup_distance(p1, p2)
    return total


# -- junction diagnostics ----------------------------------------------------


def _outgoing_tangent(net: Network, arc_idx: int, node_idx: int) -> np.ndarray:
    arc = net.arcs[arc_idx]
    pts = arc.points if arc.nodes[0] == node_idx else arc.points[::-1]
    for k in range(1, len(pts)):
        v = pts[k] - pts[0]
        nv = np.linalg.norm(v)
        if nv > DEGENERATE_TOL:
            return v / nv
    raise DegenerateJunction(f"arc {arc_idx} has no direction at node {node_idx}")


def junction_angle_residual(net: Network, sigma: SurfaceTensionMatrix,
                            node_idx: Optional[int] = None):
    """Force-balance residual |sum sigma tau| and sector angles per branch.

    At a balanced triple junction the sigma-weighted outgoing unit tangents
    sum to zero, equivalently the sine law holds; for equal sigma all three
    angles are 2 pi / 3.  Returns {node: (residual, angles)} or a single
    tuple when node_idx is given.
    """
    results = {}
    targets = [node_idx] if node_idx is not None else [
        k for k, nd in enumerate(net.nodes) if nd.kind == "branch"]
    for k in targets:
        inc = [ai for ai in net.incident_arcs(k) if not net.arcs[ai].degenerate]
        if len(inc) != 3:
            raise DegenerateJunction(
                f"branch node {k} has {len(inc)} nondegenerate incident arcs")
        taus, weights = [], []
        for ai in inc:
            taus.append(_outgoing_tangent(net, ai, k))
            a, b = net.arcs[ai].phases
            weights.append(sigma.value(a, b))
        taus = np.array(taus)
        weights = np.array(weights)
        residual = float(np.linalg.norm((weights[:, None] * taus).sum(axis=0)))
        ang = np.sort(np.arctan2(taus[:, 1], taus[:, 0]) % (2 * np.pi))
        sect = np.diff(np.append(ang, ang[0] + 2 * np.pi))
        results[k] = (residual, np.sort(sect))
    return results[node_idx] if node_idx is not None else results


# -- boundary reparameterization ---------------------------------------------


def reparam_to_endpoints(net: Network, targets: Dict[int, float],
                         domain: DiskDomain,
                         max_shift: Optional[float] = None) -> Network:
    """Slide end points along the boundary circle to target angles.

    Each affected end arc is extended by the boundary arc from its current
    end point to the target; the metric distance to the input and the F
    change are both bounded by the slid arclengths.
    """
    if max_shift is None:
        max_shift = 0.25 * domain.circumference
    out = net.copy()
    for node_idx, target_angle in targets.items():
        nd = out.nodes[node_idx]
        if nd.kind != "end":
            raise ValueError(f"node {node_idx} is not an end node")
        th0 = domain.angle_of(nd.position)
        th1 = float(target_angle) % (2 * np.pi)
        dth = (th1 - th0 + np.pi) % (2 * np.pi) - np.pi
        shift = abs(dth) * domain.radius
        if shift > max_shift:
            raise TargetTooFar(
                f"end node {node_idx}: boundary shift {shift:.4g} exceeds {max_shift:.4g}")
        if shift == 0.0:
            continue
        if dth > 0:
            ext = geo.circle_arc((0.0, 0.0), domain.radius, th0, th1)
        else:
            ext = geo.circle_arc((0.0, 0.0), domain.radius, th1, th0)[::-1]
        for ai in out.incident_arcs(node_idx):
            arc = out.arcs[ai]
            if arc.nodes[1] == node_idx:
                arc.points = np.vstack([arc.points, ext[1:]])
            else:
                arc.points = np.vstack([ext[::-1][:-1], arc.points])
        nd.position = domain.boundary_point(th1)
    return out


# -- face tracing -------------------------------------------------------------


def _cluster_nodes(net: Network, tol: float):
    """Group nodes whose positions coincide within tol (collapsed nets)."""
    n = len(net.nodes)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if np.linalg.norm(net.nodes[i].position - net.nodes[j].position) <= tol:
                pi, pj = find(i), find(j)
                if pi != pj:
                    parent[pj] = pi
    cluster_of = [find(i) for i in range(n)]
    remap = {}
    for c in cluster_of:
        remap.setdefault(c, len(remap))
    return [remap[c] for c in cluster_of], len(remap)


def trace_faces(net: Network, domain: DiskDomain):
    """Trace the interior faces of the planar subdivision of the disk.

    Returns a list of (label, polygon) with label the well of the face, or
    None when the bounding arcs disagree or give no information.  Degenerate
    arcs are contracted first; zero-measure faces of collapsed networks do
    not appear.
    """
    tol = 1e-9 * max(domain.radius, net.scale())
    cluster, n_cluster = _cluster_nodes(net, tol)
    cpos = [None] * n_cluster
    for i, nd in enumerate(net.nodes):
        cpos[cluster[i]] = nd.position

    # edges: (u, v, polyline, label_left, label_right); boundary arcs labeled None
    edges = []
    for arc in net.arcs:
        u, v = cluster[arc.nodes[0]], cluster[arc.nodes[1]]
        if u == v and arc.length <= tol:
            continue
        edges.append((u, v, arc.points, arc.phases[0], arc.phases[1]))

    end_clusters = sorted(
        {cluster[i] for i, nd in enumerate(net.nodes) if nd.kind == "end"},
        key=lambda c: domain.angle_of(cpos[c]))
    for k in range(len(end_clusters)):
        u = end_clusters[k]
        v = end_clusters[(k + 1) % len(end_clusters)]
        th0 = domain.angle_of(cpos[u])
        th1 = domain.angle_of(cpos[v])
        if len(end_clusters) == 1:
            th1 = th0 + 2 * np.pi
        pts = geo.circle_arc((0, 0), domain.radius, th0, th1)
        pts[0], pts[-1] = cpos[u], cpos[v]
        edges.append((u, v, pts, None, None))

    # half-edges with rotation system
    half = []  # (from, to, edge_idx, forward)
    for ei, (u, v, pts, la, lb) in enumerate(edges):
        half.append((u, v, ei, True))
        half.append((v, u, ei, False))

    def hdir(h):
        u, v, ei, fwd = h
        pts = edges[ei][2] if fwd else edges[ei][2][::-1]
        for k in range(1, len(pts)):
            d = pts[k] - pts[0]
            if np.linalg.norm(d) > tol:
                return np.arctan2(d[1], d[0])
        return 0.0

    outgoing: Dict[int, list] = {}
    for hi, h in enumerate(half):
        outgoing.setdefault(h[0], []).append(hi)
    for u in outgoing:
        outgoing[u].sort(key=lambda hi: hdir(half[hi]))

    def twin(hi):
        return hi ^ 1

    def next_half(hi):
        # arrive at v via hi; continue with the outgoing half-edge at v
        # immediately clockwise from the twin -> faces traced ccw on the left
        v = half[hi][1]
        out = outgoing[v]
        t = out.index(twin(hi))
        return out[(t - 1) % len(out)]

    faces = []
    visited = set()
    for h0 in range(len(half)):
        if h0 in visited:
            continue
        loop = []
        h = h0
        for _ in range(4 * len(half)):
            visited.add(h)
            loop.append(h)
            h = next_half(h)
            if h == h0:
                break
        poly_parts = []
        labels = []
        for h in loop:
            u, v, ei, fwd = half[h]
            pts = edges[ei][2] if fwd else edges[ei][2][::-1]
            poly_parts.append(pts[:-1])
            la, lb = edges[ei][3], edges[ei][4]
            lab = la if fwd else lb
            if lab is not None:
                labels.append(lab)
        poly = np.vstack(poly_parts)
        if geo.polygon_signed_area(poly) <= 0:
            continue  # outer face
        lab_set = set(labels)
        label = labels[0] if len(lab_set) == 1 else None
        faces.append((label, poly))
    return faces


def classify_points(net: Network, domain: DiskDomain, pts: np.ndarray,
                    faces=None) -> np.ndarray:
    """Well label of the face containing each point (-1 if unresolved).

    Points on arcs or in zero-measure faces fall back to the side of the
    nearest nondegenerate arc.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if faces is None:
        faces = trace_faces(net, domain)
    out = np.full(len(pts), -1, dtype=int)
    for label, poly in faces:
        if label is None:
            continue
        inside = geo.winding_number(pts, poly) != 0
        out[inside & (out == -1)] = label

    missing = out == -1
    if np.any(missing):
        sub = pts[missing]
        best_d = np.full(len(sub), np.inf)
        best_lab = np.full(len(sub), -1, dtype=int)
        for arc in net.arcs:
            if arc.degenerate:
                continue
            d = geo.point_polyline_distance(sub, arc.points)
            s = cross_side(arc.points, sub)
            lab = np.where(s >= 0, arc.phases[0], arc.phases[1])
            upd = d < best_d
            best_d[upd] = d[upd]
            best_lab[upd] = lab[upd]
        out[missing] = best_lab
    return out


def cross_side(points: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Sign of the cross product at the nearest polyline segment: > 0 left."""
    pts = np.atleast_2d(pts)
    best_d = np.full(len(pts), np.inf)
    best_s = np.zeros(len(pts))
    for i in range(len(points) - 1):
        a, b = points[i], points[i + 1]
        d = geo.point_segment_distance(pts, a, b)
        ab = b - a
        s = ab[0] * (pts[:, 1] - a[1]) - ab[1] * (pts[:, 0] - a[0])
        upd = d < best_d
        best_d[upd] = d[upd]
        best_s[upd] = s[upd]
    return best_s


# -- validation ---------------------------------------------------------------


@dataclass
class Diagnostics:
    failures: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def validate(net: Network, domain: Optional[DiskDomain] = None,
             boundary_tol: Optional[float] = None) -> Diagnostics:
    """Check the structural invariants; failures are reported, never thrown."""
    d = Diagnostics()
    n_s_expected = 3 * (net.N - 1) - net.Ntilde
    n_b_expected = 2 * (net.N - 1) - net.Ntilde
    if net.n_arcs != n_s_expected:
        d.failures.append(
            f"arc count {net.n_arcs} != 3(N-1)-Ntilde = {n_s_expected}")
    if net.n_branch != n_b_expected:
        d.failures.append(
            f"branch count {net.n_branch} != 2(N-1)-Ntilde = {n_b_expected}")
    if net.n_end != net.Ntilde:
        d.failures.append(f"end count {net.n_end} != Ntilde = {net.Ntilde}")

    deg = net.degrees()
    for k, nd in enumerate(net.nodes):
        want = 3 if nd.kind == "branch" else 1
        if deg[k] != want:
            d.failures.append(f"{nd.kind} node {k} has degree {deg[k]}, expected {want}")

    for k, arc in enumerate(net.arcs):
        p0, p1 = arc.points[0], arc.points[-1]
        n0 = net.nodes[arc.nodes[0]].position
        n1 = net.nodes[arc.nodes[1]].position
        if np.linalg.norm(p0 - n0) > 1e-9 * net.scale() or \
                np.linalg.norm(p1 - n1) > 1e-9 * net.scale():
            d.failures.append(f"arc {k} polyline does not join its nodes")

    if net.face_labels:
        if sorted(net.face_labels) != list(range(net.N)):
            d.failures.append(
                f"face labels {sorted(net.face_labels)} are not each well exactly once")

    if domain is not None:
        tol = boundary_tol if boundary_tol is not None else 1e-6 * domain.radius
        for k, nd in enumerate(net.nodes):
            if nd.kind == "end" and not net_on_boundary(nd.position, domain, tol):
                d.failures.append(f"end node {k} not on the domain boundary")
            if nd.kind == "branch" and not domain.contains([nd.position], pad=tol)[0]:
                d.failures.append(f"branch node {k} outside the closed domain")

        faces = trace_faces(net, domain)
        labels = [lab for lab, _ in faces if lab is not None]
        if None in [lab for lab, _ in faces]:
            d.failures.append("a face has inconsistent or missing phase labels")
        missing = set(range(net.N)) - set(labels)
        if len(labels) != len(set(labels)):
            d.failures.append("a well labels more than one face")
        if missing:
            d.warnings.append(
                f"wells {sorted(missing)} have zero-measure faces (closure element)")

    # proper crossings between distinct arcs; tangency is only flagged
    for i in range(net.n_arcs):
        for j in range(i + 1, net.n_arcs):
            ai, aj = net.arcs[i], net.arcs[j]
            if ai.degenerate or aj.degenerate:
                continue
            for s in range(len(ai.points) - 1):
                for t in range(len(aj.points) - 1):
                    if geo.segments_properly_intersect(
                            ai.points[s], ai.points[s + 1],
                            aj.points[t], aj.points[t + 1]):
                        shared = set(ai.nodes) & set(aj.nodes)
                        if not shared:
                            d.failures.append(f"arcs {i} and {j} cross")
                        else:
                            d.warnings.append(
                                f"arcs {i} and {j} touch away from their shared node")
    return d


def net_on_boundary(pos, domain: DiskDomain, tol: float) -> bool:
    return bool(domain.on_boundary([pos], tol)[0])


# -- serialization -------------------------------------------------------------


def to_json_dict(net: Network) -> dict:
    return {
        "nodes": [{"x": float(nd.position[0]), "y": float(nd.position[1]),
                   "kind": nd.kind} for nd in net.nodes],
        "arcs": [{"nodes": list(a.nodes), "phases": list(a.phases),
                  "points": [[float(x), float(y)] for x, y in a.points]}
                 for a in net.arcs],
        "N": net.N,
        "Ntilde": net.Ntilde,
        "face_labels": list(net.face_labels),
    }


def save_json(net: Network, path) -> None:
    with open(path, "w") as fh:
        json.dump(to_json_dict(net), fh, indent=1, sort_keys=True)


def load_json(path) -> Network:
    with open(path) as fh:
        d = json.load(fh)
    nodes = [NetworkNode(np.array([n["x"], n["y"]]), n["kind"]) for n in d["nodes"]]
    arcs = [NetworkArc(np.asarray(a["points"], dtype=float),
                       tuple(a["nodes"]), tuple(a["phases"])) for a in d["arcs"]]
    return Network(nodes, arcs, int(d["N"]), int(d["Ntilde"]),
                   list(d.get("face_labels", [])))


_FACE_COLORS = ["#cfe8ff", "#ffe3c2", "#d6f5d6", "#f5d6ea", "#fff7b3",
                "#d9d2f0", "#c2f0ec", "#f0cfc2", "#e0e0e0", "#f7c8c8"]


def render_svg(net: Network, domain: DiskDomain, path,
               sigma: Optional[SurfaceTensionMatrix] = None,
               size: int = 640) -> None:
    """Write an SVG of the network with face coloring."""
    R = domain.radius
    pad = 0.06 * R

    def sx(x):
        return (x + R + pad) / (2 * (R + pad)) * size

    def sy(y):
        return size - (y + R + pad) / (2 * (R + pad)) * size

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" '
             f'height="{size}" viewBox="0 0 {size} {size}">']
    try:
        faces = trace_faces(net, domain)
    except Exception:
        faces = []
    for label, poly in faces:
        if label is None:
            continue
        col = _FACE_COLORS[label % len(_FACE_COLORS)]
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in poly)
        parts.append(f'<polygon points="{pts}" fill="{col}" stroke="none">'
                     f'<title>phase {label}</title></polygon>')
    parts.append(
        f'<circle cx="{sx(0):.2f}" cy="{sy(0):.2f}" r="{size * R / (2 * (R + pad)):.2f}" '
        'fill="none" stroke="#444" stroke-width="1.5"/>')
    smax = sigma.max_offdiag if sigma is not None else 1.0
    for arc in net.arcs:
        if arc.degenerate:
            continue
        w = 2.0
        if sigma is not None:
            w = 1.0 + 2.5 * sigma.value(*arc.phases) / max(smax, 1e-12)
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in arc.points)
        parts.append(f'<polyline points="{pts}" fill="none" stroke="#1f3d7a" '
                     f'stroke-width="{w:.2f}"/>')
    for nd in net.nodes:
        col = "#c0392b" if nd.kind == "branch" else "#2c3e50"
        parts.append(f'<circle cx="{sx(nd.position[0]):.2f}" '
                     f'cy="{sy(nd.position[1]):.2f}" r="4" fill="{col}"/>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
