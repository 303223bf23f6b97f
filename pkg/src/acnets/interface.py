"""Diffuse-interface extraction and analysis.

The interface at threshold delta is the set of cells whose field value is
farther than delta from every well; the remaining cells form the phases.
Connectivity uses 4-adjacency for phases and 8-adjacency for the interface
band (a thin band crossing the lattice diagonally stays connected).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.ndimage as ndi

from .errors import DeltaOutOfRange, InsufficientData
from .field_solver import DomainGrid, PhaseField
from .potential import half_min_separation

FOUR = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
EIGHT = np.ones((3, 3), dtype=bool)


@dataclass
class InterfaceSet:
    """Partition of the interior into the interface band and the phases."""

    delta: float
    interface_mask: np.ndarray          # (ny, nx) bool, interior only
    phase_label: np.ndarray             # (ny, nx) int, -1 outside phases
    measure: float
    hgrid: float
    n_interface_components: int
    phase_components: Dict[int, int]
    phases_separated: bool              # no 4-adjacent pair of distinct phases

    def phase_measure(self, well: int) -> float:
        return float(np.sum(self.phase_label == well)) * self.hgrid ** 2


def extract(fieldv: PhaseField, grid: DomainGrid, wells: np.ndarray,
            delta: float) -> InterfaceSet:
    """Extract the diffuse interface and phase labels at threshold delta.

    Requires 0 < delta < d0 (half minimal well separation), so that the
    phases are unambiguous and pairwise separated.
    """
    wells = np.asarray(wells, dtype=float)
    d0 = half_min_separation(wells)
    if not 0.0 < delta < d0:
        raise DeltaOutOfRange(f"delta must lie in (0, d0) = (0, {d0:.6g}), got {delta}")
    vals = fieldv.u[grid.interior]
    dist = np.linalg.norm(vals[:, None, :] - wells[None, :, :], axis=-1)
    nearest = dist.argmin(axis=1)
    mind = dist.min(axis=1)

    iface = np.zeros(grid.mask.shape, dtype=bool)
    label = np.full(grid.mask.shape, -1, dtype=int)
    iface[grid.interior] = mind > delta
    lab_int = np.where(mind > delta, -1, nearest)
    label[grid.interior] = lab_int

    _, n_iface = ndi.label(iface, structure=EIGHT)
    phase_comp = {}
    for w in range(len(wells)):
        _, n_w = ndi.label(label == w, structure=FOUR)
        phase_comp[int(w)] = int(n_w)

    separated = True
    for axis in (0, 1):
        a = label[:-1, :] if axis == 0 else label[:, :-1]
        b = label[1:, :] if axis == 0 else label[:, 1:]
        bad = (a >= 0) & (b >= 0) & (a != b)
        if np.any(bad):
            separated = False
            break

    measure = float(iface.sum()) * grid.hgrid ** 2
    return InterfaceSet(delta=float(delta), interface_mask=iface,
                        phase_label=label, measure=measure, hgrid=grid.hgrid,
                        n_interface_components=int(n_iface),
                        phase_components=phase_comp,
                        phases_separated=separated)


@dataclass
class ConnectivityReport:
    interface_components: int
    phase_components: Dict[int, int]
    gamma_single_arc: Dict[int, bool]
    phases_connected: Dict[int, bool]   # the h3 check, per nonempty phase
    near_critical_delta: bool
    all_connected: bool


def regular_value_proxy(fieldv: PhaseField, grid: DomainGrid,
                        wells: np.ndarray, delta: float,
                        rel: float = 0.01) -> bool:
    """Stability proxy for delta being a regular value: component counts
    must agree at delta * (1 -/+ rel).  True means stable (not critical)."""
    lo = extract(fieldv, grid, wells, delta * (1.0 - rel))
    hi = extract(fieldv, grid, wells, delta * (1.0 + rel))
    if lo.n_interface_components != hi.n_interface_components:
        return False
    return lo.phase_components == hi.phase_components


def _boundary_gamma_arcs(datum, grid: DomainGrid, wells: np.ndarray,
                         delta: float) -> Dict[int, bool]:
    """Is each boundary set {|v0 - a| <= delta} a single circular run?"""
    if grid.kind != "disk" or not hasattr(datum, "eval_angles"):
        return {}
    theta = np.linspace(0.0, 2.0 * np.pi, 1440, endpoint=False)
    vals = datum.eval_angles(theta)
    out = {}
    for w in range(len(wells)):
        hits = np.linalg.norm(vals - wells[w], axis=1) <= delta
        if not np.any(hits):
            continue
        # count maximal runs on the circle
        flips = np.sum(hits != np.roll(hits, 1)) // 2
        out[int(w)] = bool(flips <= 1)
    return out


def connectivity_report(iset: InterfaceSet, fieldv: PhaseField,
                        grid: DomainGrid, wells: np.ndarray,
                        datum=None) -> ConnectivityReport:
    """Connectivity diagnostics for a converged run.

    Reports the interface component count (1 expected when the boundary
    data meet the single-arc hypothesis), per-phase component counts, the
    single-arc check for each boundary well set, and the empirical "phases
    are connected" check per well.
    """
    gamma = _boundary_gamma_arcs(datum, grid, np.asarray(wells, float),
                                 iset.delta) if datum is not None else {}
    connected = {w: (n <= 1) for w, n in iset.phase_components.items()}
    near_crit = not regular_value_proxy(fieldv, grid, wells, iset.delta)
    all_ok = (iset.n_interface_components <= 1
              and all(connected.values())
              and all(gamma.values() or [True]))
    return ConnectivityReport(
        interface_components=iset.n_interface_components,
        phase_components=dict(iset.phase_components),
        gamma_single_arc=gamma,
        phases_connected=connected,
        near_critical_delta=near_crit,
        all_connected=bool(all_ok))


@dataclass
class ScalingFit:
    alpha: float
    exponent: float
    prefactor: float
    eps_list: List[float]
    measures: List[float]


def measure_scaling(runs: Sequence[Tuple[float, PhaseField, DomainGrid]],
                    wells: np.ndarray, alpha: float) -> ScalingFit:
    """Log-log fit of the interface measure against epsilon at delta = eps^alpha.

    Requires at least three distinct epsilon values.  The fitted exponent
    tracks 1 - 2 alpha (up to the slow profile-width drift in delta).
    """
    if len(runs) < 3:
        raise InsufficientData("need at least 3 epsilon values for a scaling fit")
    eps_list = [float(e) for e, _, _ in runs]
    if len(set(eps_list)) < 3:
        raise InsufficientData("epsilon values must be distinct")
    measures = []
    for e, fld, grid in runs:
        iset = extract(fld, grid, wells, e ** alpha)
        measures.append(iset.measure)
    if any(m <= 0 for m in measures):
        raise InsufficientData("empty interface at some epsilon")
    coef = np.polyfit(np.log(eps_list), np.log(measures), 1)
    return ScalingFit(alpha=float(alpha), exponent=float(coef[0]),
                      prefactor=float(np.exp(coef[1])),
                      eps_list=eps_list, measures=measures)


# -- exports -----------------------------------------------------------------


def labels_to_csv(path, iset: InterfaceSet, grid: DomainGrid) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x", "y", "label", "interface"])
        jj, ii = np.where(grid.interior)
        for j, i in zip(jj, ii):
            wr.writerow([repr(float(grid.cx[j, i])), repr(float(grid.cy[j, i])),
                         int(iset.phase_label[j, i]), int(iset.interface_mask[j, i])])


_PHASE_COLORS = ["#7eb3e0", "#ebb26c", "#8fce8f", "#d291c2", "#e6d774",
                 "#a79bd4", "#79cfc8", "#d49b86", "#b8b8b8", "#e0a1a1"]


def render_svg(path, iset: InterfaceSet, grid: DomainGrid, size: int = 640) -> None:
    """Phase coloring with the interface band in black; row runs are merged
    into single rectangles to keep the file small."""
    ny, nx = grid.mask.shape
    sx = size / nx
    sy = size / ny
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" '
             f'height="{size}" viewBox="0 0 {size} {size}">']

    def color_of(j, i):
        if not grid.interior[j, i]:
            return None
        if iset.interface_mask[j, i]:
            return "#1a1a1a"
        return _PHASE_COLORS[iset.phase_label[j, i] % len(_PHASE_COLORS)]

    for j in range(ny):
        i = 0
        while i < nx:
            col = color_of(j, i)
            if col is None:
                i += 1
                continue
            i0 = i
            while i < nx and color_of(j, i) == col:
                i += 1
            x = i0 * sx
            y = (ny - 1 - j) * sy
            parts.append(f'<rect x="{x:.2f}" y="{y:.2f}" '
                         f'width="{(i - i0) * sx + 0.1:.2f}" height="{sy + 0.1:.2f}" '
                         f'fill="{col}"/>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
