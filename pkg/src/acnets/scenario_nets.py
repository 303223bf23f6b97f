"""Geometric constructors for the study scenarios.

Wells and faces follow fixed conventions:

* Polygon scenarios (N boundary wells): end points at angles
  theta_k = offset + 2 pi k / N; boundary face k spans ccw from end k to
  end k+1 and is labeled with well k.

* Interior-phase scenarios on three boundary arcs: ends at
  theta_k = pi/2 + 2 pi k / 3; boundary wells a=1, b=2, c=3 with face a
  right (ccw from end 2 to end 0), b upper-left, c bottom; well 0 interior.
  The 7-well family adds primes a'=4, b'=5, c'=6, where x' is the interior
  face opposite boundary face x.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Tuple

import numpy as np

from .network import DiskDomain, Network

TWO_PI = 2.0 * np.pi


def polygon_angles(N: int, offset: float = np.pi / 2) -> np.ndarray:
    return (offset + TWO_PI * np.arange(N) / N) % TWO_PI


# -- polygon (equal sigma) candidates -----------------------------------------


def poln_network(N: int, R: float = 1.0, offset: float = np.pi / 2) -> Network:
    """Pol_N: the inscribed polygon minus one side, as a closure element.

    Branch nodes coincide with the interior vertices of the remaining path;
    the N-2 arcs joining them to their end points are degenerate.
    """
    ang = polygon_angles(N, offset)
    ends = [(R * np.cos(a), R * np.sin(a), "end") for a in ang]
    branches = [(R * np.cos(ang[k]), R * np.sin(ang[k]), "branch")
                for k in range(1, N - 1)]
    nodes = ends + branches

    def vert(k):
        # node index holding polygon vertex k on the path: ends at k=0, N-1
        if k == 0:
            return 0
        if k == N - 1:
            return N - 1
        return N + (k - 1)

    arcs = []
    big = N - 1  # face of the removed side swallows the center
    for k in range(N - 1):
        # side q_k -> q_{k+1}, ccw: center face on the left, lens k right
        arcs.append((vert(k), vert(k + 1), (big, k)))
    for k in range(1, N - 1):
        pt = np.array([ends[k][0], ends[k][1]])
        arcs.append((N + (k - 1), k, (k - 1, k), np.vstack([pt, pt])))
    return Network.build(nodes, arcs, N=N, Ntilde=N, face_labels=list(range(N)))


def steiner_wheel_star_g1(R: float = 1.0, offset: float = np.pi / 2,
                          rho: float = 0.55) -> Tuple[Network, List[int]]:
    """N=6 candidate G^1: central branch node joined to three Y-nodes, each
    collecting two adjacent polygon vertices.  Returns (net, free_nodes)."""
    N = 6
    ang = polygon_angles(N, offset)
    ends = [(R * np.cos(a), R * np.sin(a), "end") for a in ang]
    mids = []
    for j in range(3):
        phi = 0.5 * (ang[2 * j] + ang[2 * j + 1])
        if abs(ang[2 * j + 1] - ang[2 * j]) > np.pi:
            phi += np.pi
        mids.append((rho * R * np.cos(phi), rho * R * np.sin(phi), "branch"))
    nodes = ends + mids + [(0.0, 0.0, "branch")]
    c = len(nodes) - 1
    arcs = []
    for j in range(3):
        m = N + j
        arcs.append((m, 2 * j, (2 * j, (2 * j - 1) % N)))
        arcs.append((m, 2 * j + 1, (2 * j + 1, 2 * j)))
        # center spoke: separates the faces flanking the pair (2j, 2j+1)
        arcs.append((c, m, ((2 * j + 1) % N, (2 * j - 1) % N)))
    net = Network.build(nodes, arcs, N=N, Ntilde=N, face_labels=list(range(N)))
    return net, [N, N + 1, N + 2, c]


def steiner_chain_g2(R: float = 1.0, offset: float = np.pi / 2
                     ) -> Tuple[Network, List[int]]:
    """N=6 candidate G^2: chain of four branch nodes b0-b1-b2-b3 with
    b0 ~ {e5, e0}, b1 ~ e1, b2 ~ e4, b3 ~ {e2, e3}."""
    N = 6
    ang = polygon_angles(N, offset)
    ends = [(R * np.cos(a), R * np.sin(a), "end") for a in ang]
    init = [(0.55 * R * np.cos(ang[0] - np.pi / 6), 0.55 * R * np.sin(ang[0] - np.pi / 6)),
            (0.25 * R * np.cos(ang[1] - np.pi / 12), 0.25 * R * np.sin(ang[1] - np.pi / 12)),
            (0.25 * R * np.cos(ang[4] - np.pi / 12), 0.25 * R * np.sin(ang[4] - np.pi / 12)),
            (0.55 * R * np.cos(ang[2] + np.pi / 6), 0.55 * R * np.sin(ang[2] + np.pi / 6))]
    nodes = ends + [(x, y, "branch") for x, y in init]
    b0, b1, b2, b3 = N, N + 1, N + 2, N + 3
    arcs = [
        (b0, 0, (0, 5)), (b0, 5, (5, 4)),
        (b1, 1, (1, 0)),
        (b2, 4, (4, 3)),
        (b3, 2, (2, 1)), (b3, 3, (3, 2)),
        (b0, b1, (0, 4)),
        (b1, b2, (1, 4)),
        (b3, b2, (3, 1)),
    ]
    net = Network.build(nodes, arcs, N=N, Ntilde=N, face_labels=list(range(N)))
    return net, [b0, b1, b2, b3]


def steiner_tree_net(N: int, R: float = 1.0, offset: float = np.pi / 2
                     ) -> Tuple[Network, List[int]]:
    """Full Steiner topology on the N polygon vertices for N = 3, 4, 5."""
    ang = polygon_angles(N, offset)
    ends = [(R * np.cos(a), R * np.sin(a), "end") for a in ang]
    if N == 3:
        nodes = ends + [(0.01 * R, 0.01 * R, "branch")]
        s = 3
        arcs = [(s, k, (k, (k - 1) % 3)) for k in range(3)]
        free = [s]
    elif N == 4:
        nodes = ends + [(0.3 * R, 0.0, "branch"), (-0.3 * R, 0.0, "branch")]
        s0, s1 = 4, 5
        arcs = [(s0, 0, (0, 3)), (s0, 3, (3, 2)),
                (s1, 1, (1, 0)), (s1, 2, (2, 1)),
                (s0, s1, (2, 0))]
        free = [s0, s1]
    elif N == 5:
        mid = 0.35 * R * np.array([np.cos(ang[1] + np.pi / 5), np.sin(ang[1] + np.pi / 5)])
        nodes = ends + [
            (mid[0], mid[1], "branch"),
            (0.15 * R * np.cos(ang[0] - np.pi / 2), 0.15 * R * np.sin(ang[0] - np.pi / 2), "branch"),
            (0.35 * R * np.cos(ang[3] + np.pi / 5), 0.35 * R * np.sin(ang[3] + np.pi / 5), "branch")]
        s0, s1, s2 = 5, 6, 7
        arcs = [(s0, 1, (1, 0)), (s0, 2, (2, 1)),
                (s1, 0, (0, 4)),
                (s2, 3, (3, 2)), (s2, 4, (4, 3)),
                (s1, s0, (2, 0)), (s1, s2, (4, 2))]
        free = [s0, s1, s2]
    else:
        raise ValueError("steiner_tree_net supports N in {3, 4, 5}")
    net = Network.build(nodes, arcs, N=N, Ntilde=N, face_labels=list(range(N)))
    return net, free


# -- interior phase wheel (one center well behind an N-gon ring) --------------


def wheel_net(n_ends: int, ell: float, R: float = 1.0,
              offset: float = np.pi / 2) -> Tuple[Network, List[int]]:
    """Ring of branch nodes at radius ell on the end rays, enclosing the
    interior well 0; boundary wells 1..n_ends.

    For n_ends = 3 this is the four-phase configuration whose minimizer
    switches from the collapsed ring to the boundary-vertex ring as
    sigma / sigma0 crosses sqrt(3)."""
    ang = polygon_angles(n_ends, offset)
    ends = [(R * np.cos(a), R * np.sin(a), "end") for a in ang]
    ring = [(ell * np.cos(a), ell * np.sin(a), "branch") for a in ang]
    nodes = ends + ring
    arcs = []
    for k in range(n_ends):
        # radial arc p_k -> e_k: boundary face ccw-after on the left
        left = 1 + k
        right = 1 + ((k - 1) % n_ends)
        arcs.append((n_ends + k, k, (left, right)))
    for k in range(n_ends):
        # ring side p_k -> p_{k+1}, ccw: interior well 0 on the left
        arcs.append((n_ends + k, n_ends + (k + 1) % n_ends, (0, 1 + k)))
    net = Network.build(nodes, arcs, N=n_ends + 1, Ntilde=n_ends,
                        face_labels=list(range(n_ends + 1)))
    return net, [n_ends + k for k in range(n_ends)]


def wheel_sigma_entries(n_ends: int, sigma: float, sigma0: float) -> Dict:
    """Sigma table for the wheel: ring arcs carry sigma0, radial arcs sigma."""
    entries = {}
    for i in range(1, n_ends + 1):
        entries[(0, i)] = sigma0
        for j in range(i + 1, n_ends + 1):
            entries[(i, j)] = sigma
    return entries


# -- N = 7, Z3-equivariant family ----------------------------------------------

A_WELL, B_WELL, C_WELL = 1, 2, 3
AP_WELL, BP_WELL, CP_WELL = 4, 5, 6
_PRIME = {0: CP_WELL, 1: AP_WELL, 2: BP_WELL}       # prime face behind p_k
_BND_AFTER = {0: B_WELL, 1: C_WELL, 2: A_WELL}      # boundary face ccw of e_k
_BND_BEFORE = {0: A_WELL, 1: B_WELL, 2: C_WELL}     # boundary face cw of e_k


def g_of_psi(psi: float) -> float:
    """Upper slope of the admissible (d, ell) wedge."""
    return 0.5 * np.sqrt(3.0) * np.sin(psi) / np.cos(np.pi / 6 - psi)


def rho1_of(d: float, psi: float) -> float:
    """Radius of the arm meeting points on the bisector rays (type I)."""
    return d * np.sin(psi) / np.cos(np.pi / 6 - psi)


def n7_type1_net(d: float, ell: float, psi: float, R: float = 1.0) -> Network:
    """Type-I member: three-tipped star around a central triangle.

    Requires 0 <= ell <= g(psi) d <= g(psi).  At (d, ell) = (1, g(psi))
    this degenerates to the nabla network; at ell = 0 the triangle
    collapses; at d = 0 everything but the radial arcs collapses.
    """
    if not 0.0 <= d <= 1.0 or not -1e-12 <= ell <= g_of_psi(psi) * d + 1e-12:
        raise ValueError(f"(d, ell) = ({d}, {ell}) outside the admissible wedge")
    theta = polygon_angles(3)
    ends = [R * np.array([np.cos(t), np.sin(t)]) for t in theta]
    p = [d * R * np.array([np.cos(t), np.sin(t)]) for t in theta]
    rho1 = rho1_of(d, psi) * R
    rho_t = 2.0 * ell * R / np.sqrt(3.0)
    phi = theta + np.pi / 3.0
    m = [rho1 * np.array([np.cos(t), np.sin(t)]) for t in phi]
    v = [rho_t * np.array([np.cos(t), np.sin(t)]) for t in phi]

    nodes = ([(e[0], e[1], "end") for e in ends]
             + [(q[0], q[1], "branch") for q in p]
             + [(q[0], q[1], "branch") for q in m]
             + [(q[0], q[1], "branch") for q in v])
    E, P, M, V = 0, 3, 6, 9
    arcs = []
    for k in range(3):
        arcs.append((P + k, E + k, (_BND_AFTER[k], _BND_BEFORE[k])))        # sigma
        arcs.append((P + k, M + k, (_PRIME[k], _BND_AFTER[k])))             # left arm
        arcs.append((P + k, M + (k - 1) % 3, (_BND_BEFORE[k], _PRIME[k])))  # right arm
        arcs.append((M + k, V + k, (_PRIME[k], _PRIME[(k + 1) % 3])))       # tau
        arcs.append((V + k, V + (k + 1) % 3, (0, _PRIME[(k + 1) % 3])))     # triangle
    return Network.build(nodes, arcs, N=7, Ntilde=3, face_labels=list(range(7)))


def n7_type2_net(d: float, ell: float, psi: float, R: float = 1.0) -> Network:
    """Type-II member: hexagonal central region with alternating sides."""
    if not 0.0 <= d <= 1.0 or not -1e-12 <= ell <= g_of_psi(psi) * d + 1e-12:
        raise ValueError(f"(d, ell) = ({d}, {ell}) outside the admissible wedge")
    theta = polygon_angles(3)
    s_arm = ell / max(np.sin(psi), 1e-300)
    from .geometry import rotation

    def arm_points(k):
        pk = d * R * np.array([np.cos(theta[k]), np.sin(theta[k])])
        dir_l = np.array([np.cos(theta[k] + np.pi - psi), np.sin(theta[k] + np.pi - psi)])
        dir_r = np.array([np.cos(theta[k] + np.pi + psi), np.sin(theta[k] + np.pi + psi)])
        return pk, pk + s_arm * R * dir_l, pk + s_arm * R * dir_r

    ends = [R * np.array([np.cos(t), np.sin(t)]) for t in theta]
    P, WL, WR = [], [], []
    for k in range(3):
        pk, wl, wr = arm_points(k)
        P.append(pk)
        WL.append(wl)
        WR.append(wr)

    nodes = ([(e[0], e[1], "end") for e in ends]
             + [(q[0], q[1], "branch") for q in P]
             + [(q[0], q[1], "branch") for q in WL]
             + [(q[0], q[1], "branch") for q in WR])
    E, IP, IL, IR = 0, 3, 6, 9
    arcs = []
    for k in range(3):
        arcs.append((IP + k, E + k, (_BND_AFTER[k], _BND_BEFORE[k])))       # sigma
        arcs.append((IP + k, IL + k, (_PRIME[k], _BND_AFTER[k])))           # left arm
        arcs.append((IP + k, IR + k, (_BND_BEFORE[k], _PRIME[k])))          # right arm
        arcs.append((IL + k, IR + k, (_PRIME[k], 0)))                       # same-p side
        arcs.append((IR + k, IL + (k + 2) % 3, (_BND_BEFORE[k], 0)))        # cross side
    return Network.build(nodes, arcs, N=7, Ntilde=3, face_labels=list(range(7)))


def n7_nabla_net(psi: float, R: float = 1.0) -> Network:
    """G-nabla: the corner (d, ell) = (1, g(psi)) of the type-I family."""
    return n7_type1_net(1.0, g_of_psi(psi), psi, R)


def n7_gstar_net(psi: float, R: float = 1.0) -> Network:
    """G-star: (d, ell) = (1, 0); the central triangle collapses."""
    return n7_type1_net(1.0, 0.0, psi, R)


def n7_gzero_net(psi: float, R: float = 1.0) -> Network:
    """G^0: d = 0; only the three radial arcs survive."""
    return n7_type1_net(0.0, 0.0, psi, R)


def n7_type2_perturbed(psi: float, h: float, rho: float, beta: float,
                       R: float = 1.0) -> Network:
    """Type-II shaped perturbation of G-nabla per the stability analysis.

    The radial branch points move to distance h from the boundary; the
    hexagon vertex at each 30-degree-type ray moves by rho at polar angle
    beta measured from the inward ray, restricted to the half-plane
    containing the nearby end point (mirror-symmetric on the other arm).
    """
    theta = polygon_angles(3)
    rho_nabla = rho1_of(1.0, psi) * R
    from .geometry import rotation

    ends = [R * np.array([np.cos(t), np.sin(t)]) for t in theta]
    P, WL, WR = [], [], []
    for k in range(3):
        pk = (1.0 - h) * R * np.array([np.cos(theta[k]), np.sin(theta[k])])
        ray = theta[k] - np.pi / 3.0   # the ray of this p's right-arm vertex
        u = np.array([np.cos(ray), np.sin(ray)])
        w = np.array([-np.sin(ray), np.cos(ray)])
        base = rho_nabla * u
        wr = base + rho * (np.cos(beta) * (-u) + np.sin(beta) * w)
        # mirror across the theta_k axis for the left arm vertex
        axis = np.array([np.cos(theta[k]), np.sin(theta[k])])
        def mirror(q):
            return 2.0 * (q @ axis) * axis - q
        wl = mirror(wr)
        P.append(pk)
        WL.append(wl)
        WR.append(wr)

    nodes = ([(e[0], e[1], "end") for e in ends]
             + [(q[0], q[1], "branch") for q in P]
             + [(q[0], q[1], "branch") for q in WL]
             + [(q[0], q[1], "branch") for q in WR])
    E, IP, IL, IR = 0, 3, 6, 9
    arcs = []
    for k in range(3):
        arcs.append((IP + k, E + k, (_BND_AFTER[k], _BND_BEFORE[k])))
        arcs.append((IP + k, IL + k, (_PRIME[k], _BND_AFTER[k])))
        arcs.append((IP + k, IR + k, (_BND_BEFORE[k], _PRIME[k])))
        arcs.append((IL + k, IR + k, (_PRIME[k], 0)))
        arcs.append((IR + k, IL + (k + 2) % 3, (_BND_BEFORE[k], 0)))
    return Network.build(nodes, arcs, N=7, Ntilde=3, face_labels=list(range(7)))


def n7_type1_perturbed(psi: float, h: float, s: float, R: float = 1.0) -> Network:
    """Type-I shaped perturbation of G-nabla: d = 1 - h and the triangle
    vertices pulled inward by s from the arm meeting points."""
    d = 1.0 - h
    rho_t = max(rho1_of(d, psi) - s, 0.0)
    ell = 0.5 * np.sqrt(3.0) * rho_t
    return n7_type1_net(d, min(ell, g_of_psi(psi) * d), psi, R)


def n7_sigma_table(psi: float, kind: str = "equality", margin: float = 0.02,
                   sigma_prime: Optional[float] = None) -> Dict:
    """Pairwise sigma entries for the 7-well family.

    "equality": the exact minimality values (both families flat).
    "strict": sigma, sigma00, tau inflated by `margin`; tau0 kept exact.
    sigma' (opposite boundary/prime pairs, never an arc) defaults to
    1.2 * sigma0 to satisfy the admissibility inequality sigma' > sigma0.
    """
    sigma0 = 1.0
    tau0 = 2.0 / np.sqrt(3.0) * np.sin(np.pi / 6.0 - psi) * sigma0
    sigma = 2.0 * np.cos(psi) * sigma0
    tau = 2.0 * np.sin(np.pi / 6.0 - psi) * sigma0
    sigma00 = 2.0 / np.sqrt(3.0) * np.cos(psi) * sigma0
    if kind == "strict":
        sigma *= 1.0 + margin
        sigma00 *= 1.0 + margin
        tau *= 1.0 + margin
    elif kind != "equality":
        raise ValueError(f"unknown sigma table kind {kind!r}")
    sp = 1.2 * sigma0 if sigma_prime is None else float(sigma_prime)

    bnd = [A_WELL, B_WELL, C_WELL]
    prm = [AP_WELL, BP_WELL, CP_WELL]
    entries = {}
    for i in range(3):
        for j in range(i + 1, 3):
            entries[(bnd[i], bnd[j])] = sigma
            entries[(prm[i], prm[j])] = tau
    for i in range(3):
        entries[(0, bnd[i])] = sigma00
        entries[(0, prm[i])] = tau0
        entries[(bnd[i], prm[i])] = sp            # opposite pair (a, a')
        for j in range(3):
            if j != i:
                entries[(bnd[i], prm[j])] = sigma0
    return entries
