"""Multi-well potentials W: R^m -> R with a finite zero set, and derived constants.

Built-in family: W(z) = scale * prod_{a in A} |z - a|^2, which vanishes exactly
on the well set A, has positive-definite Hessians there, and grows at
infinity.  User potentials can be wrapped from callables with a
finite-difference fallback for missing derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, DuplicateWell, MonotonicityFail, NotPositiveDefinite

WELL_TOL = 1e-10
PD_TOL = 1e-8


@dataclass(frozen=True)
class WellPoint:
    """A zero of the potential."""

    coords: tuple

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.ndim != 1 or not np.all(np.isfinite(c)):
            raise DimensionMismatch(f"well coordinates must be a finite vector, got {self.coords!r}")
        object.__setattr__(self, "coords", tuple(float(v) for v in c))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)


def _as_well_array(wells: Sequence) -> np.ndarray:
    rows = []
    for w in wells:
        if isinstance(w, WellPoint):
            rows.append(w.array)
        else:
            rows.append(np.atleast_1d(np.asarray(w, dtype=float)))
    dims = {r.shape[0] for r in rows}
    if len(dims) != 1:
        raise DimensionMismatch(f"wells have mixed dimensions {sorted(dims)}")
    arr = np.vstack(rows)
    for i in range(len(arr)):
        for j in range(i + 1, len(arr)):
            if np.allclose(arr[i], arr[j], atol=1e-14, rtol=0.0):
                raise DuplicateWell(f"wells {i} and {j} coincide at {arr[i]}")
    return arr


class Potential:
    """Evaluator bundle (W, W_z, W_zz) over a finite well set.

    All evaluators are vectorized: z may have shape (m,) or (..., m); W
    returns shape (...), W_z shape (..., m), W_zz shape (..., m, m).
    Evaluation is pure and stateless (safe for concurrent use).
    """

    def __init__(self, wells, w, wz=None, wzz=None, name="custom",
                 analytic=False, fd_step_grad=1e-6, fd_step_hess=1e-4):
        self.wells = _as_well_array(wells)
        if self.wells.shape[0] < 2:
            raise DuplicateWell("need at least 2 distinct wells")
        self.m = int(self.wells.shape[1])
        self.name = name
        self.analytic = bool(analytic)
        self._w = w
        self._wz = wz
        self._wzz = wzz
        self.fd_step_grad = float(fd_step_grad)
        self.fd_step_hess = float(fd_step_hess)

    # -- evaluation --------------------------------------------------------

    def w(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return np.asarray(self._w(z), dtype=float)

    def wz(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self._wz is not None:
            return np.asarray(self._wz(z), dtype=float)
        return self._fd_grad(z)

    def wzz(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self._wzz is not None:
            return np.asarray(self._wzz(z), dtype=float)
        return self._fd_hess(z)

    def _fd_grad(self, z: np.ndarray) -> np.ndarray:
        h = self.fd_step_grad
        g = np.empty(z.shape, dtype=float)
        for k in range(self.m):
            dz = np.zeros(self.m)
            dz[k] = h
            g[..., k] = (self.w(z + dz) - self.w(z - dz)) / (2.0 * h)
        return g

    def _fd_hess(self, z: np.ndarray) -> np.ndarray:
        h = self.fd_step_hess
        out = np.empty(z.shape + (self.m,), dtype=float)
        for k in range(self.m):
            dz = np.zeros(self.m)
            dz[k] = h
            out[..., k] = (self.wz(z + dz) - self.wz(z - dz)) / (2.0 * h)
        return 0.5 * (out + np.swapaxes(out, -1, -2))

    # -- invariants ----------------------------------------------------------

    def min_well_distance(self, z) -> np.ndarray:
        """min_a |z - a|, vectorized over leading axes of z."""
        z = np.asarray(z, dtype=float)
        d = np.linalg.norm(z[..., None, :] - self.wells, axis=-1)
        return d.min(axis=-1)

    def nearest_well(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        d = np.linalg.norm(z[..., None, :] - self.wells, axis=-1)
        return d.argmin(axis=-1)

    def default_k_radius(self) -> float:
        return 2.0 * float(np.max(np.linalg.norm(self.wells, axis=1))) + 1.0

    def validate(self, k_radius: Optional[float] = None, n_sphere: int = 64,
                 n_sample: int = 400, rng_seed: int = 0) -> None:
        """Check the standing hypotheses on a sample; raise on failure.

        Checks: W = 0 and W_z = 0 at the wells, W >= 0 on a sample of the
        hull, positive-definite Hessians at the wells, and outward radial
        growth W_z(z).z > 0 on a sampled sphere of radius k_radius.
        """
        wa = self.w(self.wells)
        if np.any(np.abs(wa) > WELL_TOL):
            raise NotPositiveDefinite(f"W does not vanish at wells: {wa}")
        ga = np.linalg.norm(np.atleast_2d(self.wz(self.wells)), axis=-1)
        if np.any(ga > WELL_TOL):
            raise NotPositiveDefinite(f"W_z does not vanish at wells: {ga}")
        for i, a in enumerate(self.wells):
            hess = self.wzz(a)
            lam = np.linalg.eigvalsh(np.atleast_2d(hess))
            if lam[0] <= PD_TOL * max(1.0, abs(lam[-1])):
                raise NotPositiveDefinite(
                    f"W_zz at well {i} has min eigenvalue {lam[0]:.3e}")
        rng = np.random.default_rng(rng_seed)
        lo = self.wells.min(axis=0) - 1.0
        hi = self.wells.max(axis=0) + 1.0
        zs = rng.uniform(lo, hi, size=(n_sample, self.m))
        if np.any(self.w(zs) < -WELL_TOL):
            raise NotPositiveDefinite("W takes negative values on sample")
        K = self.default_k_radius() if k_radius is None else float(k_radius)
        dirs = _sphere_sample(self.m, n_sphere, rng)
        zK = K * dirs
        radial = np.sum(self.wz(zK) * zK, axis=-1)
        if np.any(radial <= 0.0):
            raise NotPositiveDefinite(
                f"coercivity W_z(z).z > 0 fails on sphere |z| = {K}")


def _sphere_sample(m: int, n: int, rng) -> np.ndarray:
    if m == 1:
        return np.array([[1.0], [-1.0]])
    if m == 2:
        th = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
        return np.column_stack([np.cos(th), np.sin(th)])
    v = rng.normal(size=(n, m))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def make_product_potential(wells: Sequence, scale: float = 1.0) -> Potential:
    """W(z) = scale * prod_a |z - a|^2, with analytic gradient and Hessian.

    With wells {-1, +1} and scale = 1/4 this is the scalar double well
    W(u) = (1 - u^2)^2 / 4.
    """
    A = _as_well_array(wells)
    if scale <= 0:
        raise ValueError("scale must be positive")
    n, m = A.shape

    def fvals(z):
        # squared distances to each well; shape (..., n)
        diff = z[..., None, :] - A
        return np.sum(diff * diff, axis=-1)

    def w(z):
        return scale * np.prod(fvals(z), axis=-1)

    def wz(z):
        f = fvals(z)                       # (..., n)
        diff = z[..., None, :] - A         # (..., n, m)
        g = np.zeros(z.shape, dtype=float)
        for j in range(n):
            mask = [k for k in range(n) if k != j]
            p = np.prod(f[..., mask], axis=-1)
            g += 2.0 * diff[..., j, :] * p[..., None]
        return scale * g

    def wzz(z):
        f = fvals(z)
        diff = z[..., None, :] - A
        eye = np.eye(m)
        H = np.zeros(z.shape + (m,), dtype=float)
        for j in range(n):
            others = [k for k in range(n) if k != j]
            p_j = np.prod(f[..., others], axis=-1)
            H += 2.0 * p_j[..., None, None] * eye
            grad_pj = np.zeros(z.shape, dtype=float)
            for l in others:
                rest = [k for k in others if k != l]
                p_jl = np.prod(f[..., rest], axis=-1) if rest else np.ones(f.shape[:-1])
                grad_pj += 2.0 * diff[..., l, :] * p_jl[..., None]
            H += 2.0 * diff[..., j, :, None] * grad_pj[..., None, :]
        return scale * H

    p = Potential(A, w, wz, wzz, name=f"product{n}", analytic=True)
    p.validate()
    return p


@dataclass(frozen=True)
class WellConstants:
    """Derived constants: half minimal well separation d0, radial
    monotonicity radius delta0, and the coercivity constant delta -> c_W."""

    d0: float
    delta0: float
    cW: Callable[[float], float] = field(repr=False)


def half_min_separation(wells: np.ndarray) -> float:
    A = np.asarray(wells, dtype=float)
    d = np.linalg.norm(A[:, None, :] - A[None, :, :], axis=-1)
    np.fill_diagonal(d, np.inf)
    return 0.5 * float(d.min())


def derive_constants(p: Potential, M_prime: float, n_dirs: int = 64,
                     n_radial: int = 400, grid_per_axis: int = 201,
                     delta0_floor: float = 1e-6, rng_seed: int = 0) -> WellConstants:
    """Certify d0, delta0 and cW by dense sampling.

    delta0 is the largest radius (up to d0) with d/ds W(a + s nu) > 0 for all
    s in (0, 2 delta0) along sampled directions.  cW(delta) is the largest
    constant with W >= cW^2 delta^2 / 2 on {|z| <= M_prime, dist(z, A) >= delta},
    estimated on a sample grid.
    """
    d0 = half_min_separation(p.wells)
    rng = np.random.default_rng(rng_seed)
    dirs = _sphere_sample(p.m, n_dirs, rng)

    s_max = min(2.0 * d0, 2.0 * M_prime)
    s = np.linspace(s_max / n_radial, s_max, n_radial)
    s_ok = s_max
    for a in p.wells:
        zs = a[None, None, :] + s[None, :, None] * dirs[:, None, :]
        deriv = np.sum(p.wz(zs) * dirs[:, None, :], axis=-1)
        bad = deriv <= 0.0
        if np.any(bad):
            first_bad = s[np.argmax(np.any(bad, axis=0))]
            s_ok = min(s_ok, first_bad)
    delta0 = 0.5 * s_ok
    if delta0 <= delta0_floor:
        raise MonotonicityFail(
            f"no radial monotonicity radius above floor {delta0_floor}")

    def cW(delta: float) -> float:
        if not 0.0 < delta <= d0 + 1e-15:
            raise ValueError(f"cW defined for delta in (0, d0], got {delta}")
        if p.m <= 2:
            axes = [np.linspace(-M_prime, M_prime, grid_per_axis)] * p.m
            mesh = np.meshgrid(*axes, indexing="ij")
            zs = np.stack(mesh, axis=-1).reshape(-1, p.m)
        else:
            zs = rng.uniform(-M_prime, M_prime, size=(grid_per_axis ** 2, p.m))
        zs = zs[np.linalg.norm(zs, axis=1) <= M_prime]
        zs = zs[p.min_well_distance(zs) >= delta]
        if len(zs) == 0:
            raise ValueError("admissible set is empty at this delta")
        wmin = float(np.min(p.w(zs)))
        if wmin <= 0.0:
            raise MonotonicityFail(
                f"W attains {wmin} on the admissible set at delta={delta}")
        return float(np.sqrt(2.0 * wmin) / delta)

    return WellConstants(d0=d0, delta0=float(delta0), cW=cW)
