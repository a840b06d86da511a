"""Ambient almost Hermitian geometry on coordinate charts.

A background space is described by a single coordinate box carrying a metric
field ``g`` and an almost complex structure field ``J`` with ``J @ J = -I``
and ``g(Jv, Jw) = g(v, w)``.  Everything downstream (geodesics, immersed
surfaces, the elliptic solver, the estimate checks) consumes the fields only
through :class:`ChartManifold`, so each built-in family just supplies the
metric, the structure, and - when closed forms exist - their derivatives.

All field evaluators are batched: a point argument of shape ``(..., d)``
returns tensors with matching leading axes.  Derivatives follow one fixed
layout: trailing axes are derivative directions, e.g. ``metric_d1[..., a, b, v]
= d g_ab / d x^v``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.stats import qmc

from .errors import (
    DegeneratePlane,
    NonPositiveScale,
    NonSPD,
    NotCorrectable,
    NotImmersed,
    NonUnitVector,
    OutOfDomain,
)

TOL_J = 1e-10
TOL_L = 1e-8
TOL_LIN = 1e-12
TOL_SUP = 1e-4


# ---------------------------------------------------------------------------
# small helpers


def standard_acs(dim: int) -> np.ndarray:
    """Block rotation J0 pairing axes (1,2), (3,4), ...: J0 e1 = e2, J0 e2 = -e1."""
    if dim % 2:
        raise ValueError("dimension must be even")
    j = np.zeros((dim, dim))
    for k in range(0, dim, 2):
        j[k, k + 1] = -1.0
        j[k + 1, k] = 1.0
    return j


def parity_reflection(dim: int) -> np.ndarray:
    """Reflection fixing the plane {x^2 = x^4 = ... = 0} (1-indexed even axes flip)."""
    return np.diag([1.0 if k % 2 == 0 else -1.0 for k in range(dim)])


def halton_points(n: int, dim: int) -> np.ndarray:
    """First n points of the unscrambled Halton sequence in [0,1)^dim."""
    eng = qmc.Halton(d=dim, scramble=False)
    return eng.random(n)


@dataclass(frozen=True)
class Box:
    """Axis-aligned coordinate box."""

    lo: np.ndarray
    hi: np.ndarray

    @staticmethod
    def centered(half: float, dim: int) -> "Box":
        return Box(np.full(dim, -half), np.full(dim, half))

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def contains(self, x: np.ndarray, margin: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        inside = (x >= self.lo + margin) & (x <= self.hi - margin)
        return inside.all(axis=-1)

    def margin(self, x: np.ndarray) -> np.ndarray:
        """Distance (in coordinate units) from x to the box boundary, per point."""
        x = np.asarray(x, dtype=float)
        return np.minimum(x - self.lo, self.hi - x).min(axis=-1)

    def sample(self, n: int, margin: float = 0.0) -> np.ndarray:
        u = halton_points(n, self.dim)
        lo = self.lo + margin
        hi = self.hi - margin
        return lo + u * (hi - lo)


def _sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + np.swapaxes(m, -1, -2))


# ---------------------------------------------------------------------------
# pointwise structure operations


def hermitize(g_raw: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Average a metric against J so the result is J-invariant.

    Returns ``(g + J^T g J) / 2``; idempotent on already invariant input.
    Raises :class:`NonSPD` if the input fails positive-definiteness anywhere.
    """
    g_raw = np.asarray(g_raw, dtype=float)
    j = np.asarray(j, dtype=float)
    ev = np.linalg.eigvalsh(_sym(g_raw))
    if not (ev[..., 0] > 0).all():
        raise NonSPD("metric has a non-positive eigenvalue at a sampled point")
    jt = np.swapaxes(j, -1, -2)
    return 0.5 * (g_raw + jt @ g_raw @ j)


def normalize_acs(k: np.ndarray, tol: float = 1e-14, max_iter: int = 60) -> np.ndarray:
    """Project a near-complex structure K onto an exact one.

    Computes ``J = K (-K^2)^{-1/2}`` via the Newton-Schulz iteration for the
    inverse square root.  Because the correction commutes with K, the output
    satisfies ``J^2 = -I`` up to the iteration tolerance.
    """
    k = np.asarray(k, dtype=float)
    dim = k.shape[-1]
    eye = np.eye(dim)
    s = -(k @ k)
    defect = np.linalg.svd(s - eye, compute_uv=False)[..., 0]
    if not (defect < 0.5).all():
        raise NotCorrectable(
            f"max |K^2 + I| = {float(np.max(defect)):.3g} >= 0.5; not a small perturbation"
        )
    y = np.broadcast_to(eye, s.shape).copy()
    for _ in range(max_iter):
        y = 0.5 * y @ (3.0 * eye - s @ y @ y)
        res = np.abs(s @ y @ y - eye).max()
        if res < tol:
            break
    return k @ y


# ---------------------------------------------------------------------------
# scalar conformal factors


class ScalarField:
    """Smooth scalar with closed-form gradient and Hessian.

    phi(x) = c0 + a.x + x^T Q x / 2 + sum_m amp_m cos(k_m . x + ph_m)
    """

    def __init__(
        self,
        dim: int,
        const: float = 0.0,
        linear: Optional[np.ndarray] = None,
        quad: Optional[np.ndarray] = None,
        wave_amps: Optional[np.ndarray] = None,
        wave_vecs: Optional[np.ndarray] = None,
        wave_phases: Optional[np.ndarray] = None,
    ):
        self.dim = dim
        self.const = float(const)
        self.linear = np.zeros(dim) if linear is None else np.asarray(linear, float)
        self.quad = np.zeros((dim, dim)) if quad is None else _sym(np.asarray(quad, float))
        self.wave_amps = np.zeros(0) if wave_amps is None else np.asarray(wave_amps, float)
        self.wave_vecs = (
            np.zeros((0, dim)) if wave_vecs is None else np.asarray(wave_vecs, float)
        )
        self.wave_phases = (
            np.zeros(len(self.wave_amps)) if wave_phases is None
            else np.asarray(wave_phases, float)
        )

    def _phase(self, x: np.ndarray) -> np.ndarray:
        return np.tensordot(x, self.wave_vecs, axes=([-1], [1])) + self.wave_phases

    def value(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = self.const + x @ self.linear + 0.5 * np.einsum("...a,ab,...b->...", x, self.quad, x)
        if len(self.wave_amps):
            out = out + np.cos(self._phase(x)) @ self.wave_amps
        return out

    def grad(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = self.linear + x @ self.quad
        if len(self.wave_amps):
            out = out - np.einsum(
                "...m,m,md->...d", np.sin(self._phase(x)), self.wave_amps, self.wave_vecs
            )
        return np.broadcast_to(out, x.shape).copy() if out.shape != x.shape else out

    def hess(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.broadcast_to(self.quad, x.shape + (self.dim,)).copy()
        if len(self.wave_amps):
            out = out - np.einsum(
                "...m,m,md,me->...de", np.cos(self._phase(x)), self.wave_amps,
                self.wave_vecs, self.wave_vecs,
            )
        return out


class SphereFactor:
    """log of the stereographic conformal factor of the round 2-sphere, radius rho."""

    def __init__(self, rho: float):
        self.rho = float(rho)
        self.dim = 2

    def value(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r2 = (x * x).sum(axis=-1)
        return np.log(2.0 * self.rho**2) - np.log(self.rho**2 + r2)

    def grad(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r2 = (x * x).sum(axis=-1)
        return -2.0 * x / (self.rho**2 + r2)[..., None]

    def hess(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r2 = (x * x).sum(axis=-1)
        den = (self.rho**2 + r2)[..., None, None]
        eye = np.eye(2)
        return -2.0 * eye / den + 4.0 * x[..., :, None] * x[..., None, :] / den**2


# ---------------------------------------------------------------------------
# the chart manifold


@dataclass
class ChartManifold:
    """Metric and almost complex structure fields on one coordinate box.

    ``deriv_mode`` is either ``"analytic"`` (closed-form first and second
    metric derivatives and first J-derivatives supplied) or ``"fd"``
    (4th-order central differences of step ``fd_step``).
    """

    dim: int
    domain: Box
    family: str
    metric_fn: Callable[[np.ndarray], np.ndarray]
    j_fn: Callable[[np.ndarray], np.ndarray]
    deriv_mode: str = "analytic"
    fd_step: float = 1e-3
    metric_d1_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    metric_d2_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    j_d1_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    params: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.dim // 2

    # -- field evaluation ---------------------------------------------------

    def check_domain(self, x: np.ndarray, margin: float = 0.0) -> None:
        if not self.domain.contains(x, margin).all():
            raise OutOfDomain("point outside chart box (or inside the derivative margin)")

    def metric(self, x: np.ndarray) -> np.ndarray:
        return self.metric_fn(np.asarray(x, dtype=float))

    def metric_inv(self, x: np.ndarray) -> np.ndarray:
        return np.linalg.inv(self.metric(x))

    def j(self, x: np.ndarray) -> np.ndarray:
        return self.j_fn(np.asarray(x, dtype=float))

    def _fd1(self, fn: Callable, x: np.ndarray) -> np.ndarray:
        """4th-order central first derivatives; trailing axis is the direction."""
        x = np.asarray(x, dtype=float)
        h = self.fd_step
        base = fn(x).shape[x.ndim - 1:]
        out = np.empty(x.shape[:-1] + base + (self.dim,))
        for v in range(self.dim):
            e = np.zeros(self.dim)
            e[v] = 1.0
            f1 = fn(x + h * e)
            f_1 = fn(x - h * e)
            f2 = fn(x + 2 * h * e)
            f_2 = fn(x - 2 * h * e)
            out[..., v] = (-f2 + 8.0 * f1 - 8.0 * f_1 + f_2) / (12.0 * h)
        return out

    def metric_d1(self, x: np.ndarray) -> np.ndarray:
        if self.metric_d1_fn is not None:
            return self.metric_d1_fn(np.asarray(x, dtype=float))
        return self._fd1(self.metric_fn, x)

    def metric_d2(self, x: np.ndarray) -> np.ndarray:
        if self.metric_d2_fn is not None:
            return self.metric_d2_fn(np.asarray(x, dtype=float))
        return self._fd1(lambda y: self.metric_d1(y), x)

    def j_d1(self, x: np.ndarray) -> np.ndarray:
        if self.j_d1_fn is not None:
            return self.j_d1_fn(np.asarray(x, dtype=float))
        return self._fd1(self.j_fn, x)

    def deriv_margin(self) -> float:
        """Coordinate margin consumed by derivative stencils at the box edge."""
        return 0.0 if self.deriv_mode == "analytic" else 4.0 * self.fd_step

    def identity_tol(self) -> float:
        """Tolerance for the structural derivative identities in this mode."""
        return 1e-10 if self.deriv_mode == "analytic" else 20.0 * self.fd_step**2


# ---------------------------------------------------------------------------
# built-in families


def flat_family(n: int = 2, box_half: float = 2.0) -> ChartManifold:
    dim = 2 * n
    eye = np.eye(dim)
    j0 = standard_acs(dim)

    def metric_fn(x):
        return np.broadcast_to(eye, x.shape[:-1] + (dim, dim)).copy()

    def j_fn(x):
        return np.broadcast_to(j0, x.shape[:-1] + (dim, dim)).copy()

    zeros3 = lambda x: np.zeros(x.shape[:-1] + (dim, dim, dim))
    zeros4 = lambda x: np.zeros(x.shape[:-1] + (dim, dim, dim, dim))
    return ChartManifold(
        dim=dim,
        domain=Box.centered(box_half, dim),
        family="flat",
        metric_fn=metric_fn,
        j_fn=j_fn,
        metric_d1_fn=zeros3,
        metric_d2_fn=zeros4,
        j_d1_fn=zeros3,
        params={"n": n},
    )


def conformal_family(
    phi, n: int = 2, box_half: float = 2.0, family: str = "conformal"
) -> ChartManifold:
    """Metric e^{2 phi} * delta with the standard structure J0."""
    dim = 2 * n
    eye = np.eye(dim)
    j0 = standard_acs(dim)

    def metric_fn(x):
        f = np.exp(2.0 * phi.value(x))
        return f[..., None, None] * eye

    def metric_d1_fn(x):
        f = np.exp(2.0 * phi.value(x))
        dphi = phi.grad(x)
        return 2.0 * f[..., None, None, None] * eye[:, :, None] * dphi[..., None, None, :]

    def metric_d2_fn(x):
        f = np.exp(2.0 * phi.value(x))
        dphi = phi.grad(x)
        hphi = phi.hess(x)
        core = 2.0 * hphi + 4.0 * dphi[..., :, None] * dphi[..., None, :]
        return f[..., None, None, None, None] * eye[:, :, None, None] * core[..., None, None, :, :]

    def j_fn(x):
        return np.broadcast_to(j0, x.shape[:-1] + (dim, dim)).copy()

    return ChartManifold(
        dim=dim,
        domain=Box.centered(box_half, dim),
        family=family,
        metric_fn=metric_fn,
        j_fn=j_fn,
        metric_d1_fn=metric_d1_fn,
        metric_d2_fn=metric_d2_fn,
        j_d1_fn=lambda x: np.zeros(x.shape[:-1] + (dim, dim, dim)),
        params={"n": n, "phi": phi},
    )


def conformal_example(
    n: int = 2, seed: int = 3, even: bool = False, box_half: float = 2.0
) -> ChartManifold:
    """Seeded wavy conformal factor; ``even=True`` restricts the factor to be
    invariant under the reflection fixing {x^2 = x^4 = 0}, which makes that
    coordinate plane totally geodesic (the generic factor does not)."""
    dim = 2 * n
    rng = np.random.default_rng(seed)
    waves = 3
    linear = 0.1 * rng.standard_normal(dim)
    quad = 0.05 * rng.standard_normal((dim, dim))
    quad = _sym(quad)
    kvecs = rng.integers(-2, 3, size=(waves, dim)).astype(float)
    for i in range(waves):
        if not kvecs[i].any():
            kvecs[i, i % dim] = 1.0
    amps = 0.05 * rng.standard_normal(waves)
    phases = rng.uniform(0.0, 2.0 * np.pi, waves)
    if even:
        evens = np.arange(dim) % 2 == 0
        linear = np.where(evens, linear, 0.0)
        kvecs[:, ~evens] = 0.0
        for i in range(waves):
            if not kvecs[i].any():
                kvecs[i, 2 * (i % n)] = 1.0
        p = parity_reflection(dim)
        quad = 0.5 * (quad + p @ quad @ p)
    phi = ScalarField(dim, 0.0, linear, quad, amps, kvecs, phases)
    name = "conformal-even" if even else "conformal"
    m = conformal_family(phi, n=n, box_half=box_half, family=name)
    m.params.update({"seed": seed, "even": even})
    return m


def sphere_family(rho: float = 1.0) -> ChartManifold:
    """Round 2-sphere of radius rho in a stereographic chart (dim 2)."""
    m = conformal_family(SphereFactor(rho), n=1, box_half=3.0 * rho, family="sphere-n1")
    m.params.update({"rho": rho})
    return m


def _trig_matrix_field(dim: int, waves: int, seed: int, amplitude: float = 1.0):
    """Deterministic smooth matrix field built from a few trig modes."""
    rng = np.random.default_rng(seed)
    kvecs = rng.integers(-2, 3, size=(waves, dim)).astype(float)
    for i in range(waves):
        if not kvecs[i].any():
            kvecs[i, i % dim] = 1.0
    cmats = rng.standard_normal((waves, dim, dim)) * amplitude / np.sqrt(waves)
    smats = rng.standard_normal((waves, dim, dim)) * amplitude / np.sqrt(waves)

    def a_fn(x):
        ph = np.tensordot(x, kvecs, axes=([-1], [1]))
        return np.einsum("...m,mab->...ab", np.cos(ph), cmats) + np.einsum(
            "...m,mab->...ab", np.sin(ph), smats
        )

    return a_fn


def perturbed_family(
    eps: float = 0.02,
    n: int = 2,
    seed: int = 7,
    waves: int = 3,
    adapted: bool = False,
    box_half: float = 2.0,
    fd_step: float = 1e-3,
) -> ChartManifold:
    """Trig perturbation of the flat structure: K = J0 + eps*A(x), then correct.

    Build order: perturb, project back to an exact almost complex structure,
    then average the flat metric against it, so both defining invariants hold
    simultaneously.  With ``adapted=True`` the perturbation is antisymmetrized
    against the reflection fixing the plane {x^2 = x^4 = 0}, which keeps that
    plane Lagrangian and totally geodesic (wanted for half-disc problems).
    """
    dim = 2 * n
    j0 = standard_acs(dim)
    eye = np.eye(dim)
    a_raw = _trig_matrix_field(dim, waves, seed)
    p = parity_reflection(dim)

    if adapted:
        def a_fn(x):
            x = np.asarray(x, dtype=float)
            return 0.5 * (a_raw(x) - p @ a_raw(x @ p) @ p)
    else:
        a_fn = lambda x: a_raw(np.asarray(x, dtype=float))

    def j_fn(x):
        return normalize_acs(j0 + eps * a_fn(x))

    def metric_fn(x):
        j = j_fn(x)
        return 0.5 * (eye + np.swapaxes(j, -1, -2) @ j)

    return ChartManifold(
        dim=dim,
        domain=Box.centered(box_half, dim),
        family="perturbed-J",
        metric_fn=metric_fn,
        j_fn=j_fn,
        deriv_mode="fd",
        fd_step=fd_step,
        params={"eps": eps, "seed": seed, "waves": waves, "adapted": adapted, "n": n},
    )


def rescale(m: ChartManifold, c: float) -> ChartManifold:
    """Homothety g -> c^2 g with J unchanged."""
    if not (c > 0):
        raise NonPositiveScale(f"scale factor must be positive, got {c}")
    c2 = float(c) ** 2
    # scale the derivative *outputs* so the homothety commutes with any FD
    # differencing exactly (one rounding per entry, no 1/h^2 amplification)
    return ChartManifold(
        dim=m.dim,
        domain=m.domain,
        family=m.family,
        metric_fn=lambda x: c2 * m.metric_fn(x),
        j_fn=m.j_fn,
        deriv_mode=m.deriv_mode,
        fd_step=m.fd_step,
        metric_d1_fn=lambda x: c2 * m.metric_d1(x),
        metric_d2_fn=lambda x: c2 * m.metric_d2(x),
        j_d1_fn=lambda x: m.j_d1(x),
        params={**m.params, "scale": float(c) * m.params.get("scale", 1.0)},
    )


# ---------------------------------------------------------------------------
# connection and curvature


def christoffel(m: ChartManifold, x: np.ndarray, check: bool = True) -> np.ndarray:
    """Levi-Civita symbols, layout ``out[..., mu, a, b] = Gamma^mu_ab``."""
    if check:
        m.check_domain(x, m.deriv_margin())
    ginv = m.metric_inv(x)
    d1 = m.metric_d1(x)
    t = d1 + np.einsum("...bna->...nab", d1) - np.einsum("...abn->...nab", d1)
    return 0.5 * np.einsum("...nm,...nab->...mab", ginv, t)


def christoffel_d1(m: ChartManifold, x: np.ndarray) -> np.ndarray:
    """Coordinate derivatives of the symbols: ``out[..., mu, a, b, v]``."""
    ginv = m.metric_inv(x)
    d1 = m.metric_d1(x)
    d2 = m.metric_d2(x)
    dginv = -np.einsum("...na,...abv,...bm->...nmv", ginv, d1, ginv)
    t = d1 + np.einsum("...bna->...nab", d1) - np.einsum("...abn->...nab", d1)
    dt = d2 + np.einsum("...bnav->...nabv", d2) - np.einsum("...abnv->...nabv", d2)
    return 0.5 * (
        np.einsum("...nmv,...nab->...mabv", dginv, t)
        + np.einsum("...nm,...nabv->...mabv", ginv, dt)
    )


def riemann(m: ChartManifold, x: np.ndarray) -> np.ndarray:
    """Curvature tensor, layout ``R[..., d, c, a, b]`` for R(e_a, e_b) e_c = R^d_c_ab e_d.

    Built from the standard coordinate formula dGamma - dGamma + GG - GG.
    """
    m.check_domain(x, 2.0 * m.deriv_margin())
    gam = christoffel(m, x)
    dgam = christoffel_d1(m, x)
    r = (
        np.einsum("...dbca->...dcab", dgam)
        - np.einsum("...dacb->...dcab", dgam)
        + np.einsum("...dal,...lbc->...dcab", gam, gam)
        - np.einsum("...dbl,...lac->...dcab", gam, gam)
    )
    return r


def sectional(m: ChartManifold, x: np.ndarray, xv: np.ndarray, yv: np.ndarray) -> np.ndarray:
    """Sectional curvature of span(xv, yv): <R(X,Y)Y, X> over the Gram area."""
    g = m.metric(x)
    r = riemann(m, x)
    return _sectional_from_tensors(g, r, xv, yv)


def _sectional_from_tensors(g, r, xv, yv):
    xx = np.einsum("...ab,...a,...b->...", g, xv, xv)
    yy = np.einsum("...ab,...a,...b->...", g, yv, yv)
    xy = np.einsum("...ab,...a,...b->...", g, xv, yv)
    gram = xx * yy - xy * xy
    scale = np.maximum(xx * yy, 1e-300)
    if not (gram > TOL_LIN * scale).all():
        raise DegeneratePlane("vectors are (numerically) linearly dependent")
    num = np.einsum("...dc,...dgab,...a,...b,...g,...c->...", g, r, xv, yv, yv, xv)
    return num / gram


_PLANE_CACHE: dict = {}


def _plane_net(dim: int, count: int) -> np.ndarray:
    key = (dim, count)
    if key not in _PLANE_CACHE:
        u = halton_points(count, 2 * dim)
        _PLANE_CACHE[key] = 2.0 * u - 1.0
    return _PLANE_CACHE[key]


def abs_sectional(
    m: ChartManifold, x: np.ndarray, tol: float = TOL_SUP, start: int = 64, cap: int = 4096
) -> np.ndarray:
    """Sampled sup of |sectional| over a deterministic net of planes.

    The net is a low-discrepancy sequence on pairs of directions, refined by
    doubling until the sup increases by less than ``tol``.  In dimension two
    the single plane is exact and no net is used.
    """
    x = np.asarray(x, dtype=float)
    m.check_domain(x, 2.0 * m.deriv_margin())
    g = m.metric(x)
    r = riemann(m, x)
    if m.dim == 2:
        e1 = np.zeros(x.shape[:-1] + (2,))
        e2 = np.zeros(x.shape[:-1] + (2,))
        e1[..., 0] = 1.0
        e2[..., 1] = 1.0
        return np.abs(_sectional_from_tensors(g, r, e1, e2))

    def net_max(count):
        planes = _plane_net(m.dim, count)
        xv = planes[:, : m.dim]
        yv = planes[:, m.dim:]
        gb = g[..., None, :, :]
        rb = r[..., None, :, :, :, :]
        xx = np.einsum("...ab,na,nb->...n", g, xv, xv)
        yy = np.einsum("...ab,na,nb->...n", g, yv, yv)
        xy = np.einsum("...ab,na,nb->...n", g, xv, yv)
        gram = xx * yy - xy * xy
        good = gram > 1e-8 * xx * yy
        num = np.einsum("...dc,...dgab,na,nb,ng,nc->...n", g, r, xv, yv, yv, xv)
        vals = np.where(good, np.abs(num) / np.where(good, gram, 1.0), 0.0)
        return vals.max(axis=-1)

    best = net_max(start)
    count = start
    while count < cap:
        count *= 2
        nxt = net_max(count)
        if np.max(np.abs(nxt - best)) < tol:
            best = nxt
            break
        best = nxt
    return best


def nabla_j_tensor(m: ChartManifold, x: np.ndarray) -> np.ndarray:
    """Covariant derivative of J: ``out[..., mu, b, v] = (nabla_v J)^mu_b``."""
    gam = christoffel(m, x)
    dj = m.j_d1(x)
    j = m.j(x)
    return (
        dj
        + np.einsum("...mvl,...lb->...mbv", gam, j)
        - np.einsum("...lvb,...ml->...mbv", gam, j)
    )


def nabla_j(m: ChartManifold, x: np.ndarray, xv: np.ndarray) -> np.ndarray:
    """Endomorphism (nabla_X J) at x, linear in the direction X."""
    m.check_domain(x, 2.0 * m.deriv_margin())
    return np.einsum("...mbv,...v->...mb", nabla_j_tensor(m, x), np.asarray(xv, float))


def q_tensor(m: ChartManifold, x: np.ndarray) -> np.ndarray:
    """Components ``Q[..., mu, a, b]`` of Q(X, Y) = J (nabla_X J) Y."""
    m.check_domain(x, 2.0 * m.deriv_margin())
    nj = nabla_j_tensor(m, x)
    j = m.j(x)
    return np.einsum("...ml,...lba->...mab", j, nj)


def trace_q(m: ChartManifold, x: np.ndarray, e: np.ndarray) -> np.ndarray:
    """Trace of Q over the complex line of the g-unit vector e: Q(e,e) + Q(Je,Je)."""
    x = np.asarray(x, dtype=float)
    e = np.asarray(e, dtype=float)
    g = m.metric(x)
    norm = np.einsum("...ab,...a,...b->...", g, e, e)
    if not (np.abs(norm - 1.0) <= 1e-10).all():
        raise NonUnitVector("trace direction must be g-unit to 1e-10")
    q = q_tensor(m, x)
    je = np.einsum("...ab,...b->...a", m.j(x), e)
    return np.einsum("...mab,...a,...b->...m", q, e, e) + np.einsum(
        "...mab,...a,...b->...m", q, je, je
    )


@dataclass(frozen=True)
class GeometryConstants:
    """Sampled curvature/torsion scale of a chart: the constant C.

    C is sized so the sampled |sectional| stays below C^2/4 and the sampled
    trace-of-Q norm below C/2, with a 1.1 safety factor absorbing net error.
    """

    C: float
    sampled_abs_K: float
    sampled_trQ_norm: float
    sample_count: int


def geometry_constant(m: ChartManifold, samples: int = 64) -> GeometryConstants:
    if samples < 1:
        raise ValueError("need at least one sample")
    margin = 2.0 * m.deriv_margin() + 1e-9
    pts = m.domain.sample(samples, margin)
    if m.family == "flat":
        return GeometryConstants(0.0, 0.0, 0.0, samples)
    k = float(np.max(abs_sectional(m, pts)))
    g = m.metric(pts)
    dirs = 2.0 * halton_points(8, m.dim) - 1.0
    best_q = 0.0
    for d in dirs:
        e = np.broadcast_to(d, pts.shape).copy()
        nrm = np.sqrt(np.einsum("...ab,...a,...b->...", g, e, e))
        e = e / nrm[..., None]
        tq = trace_q(m, pts, e)
        qn = np.sqrt(np.einsum("...ab,...a,...b->...", g, tq, tq))
        best_q = max(best_q, float(qn.max()))
    c = 1.1 * max(2.0 * np.sqrt(k), 2.0 * best_q)
    return GeometryConstants(c, k, best_q, samples)


# ---------------------------------------------------------------------------
# model Lagrangian submanifolds


@dataclass
class LagrangianModel:
    """Embedded n-dimensional model submanifold of a chart.

    The embedding maps an n-dimensional parameter box into the chart;
    ``jacobian`` gives its differential (columns = tangent vectors).  Flags
    are set by :func:`submanifold_check`, never assumed.
    """

    ambient: ChartManifold
    embedding: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    param_box: Box
    name: str = "lagrangian-plane"
    checked_lagrangian: bool = False
    checked_totally_geodesic: bool = False

    @staticmethod
    def coordinate_plane(ambient: ChartManifold, half: float = 1.0) -> "LagrangianModel":
        """The plane {x^2 = x^4 = ... = 0}, parameterized by the odd axes."""
        n = ambient.n
        dim = ambient.dim
        emb_matrix = np.zeros((dim, n))
        for k in range(n):
            emb_matrix[2 * k, k] = 1.0

        def embedding(t):
            return np.asarray(t, dtype=float) @ emb_matrix.T

        def jacobian(t):
            t = np.asarray(t, dtype=float)
            return np.broadcast_to(emb_matrix, t.shape[:-1] + (dim, n)).copy()

        return LagrangianModel(
            ambient=ambient,
            embedding=embedding,
            jacobian=jacobian,
            param_box=Box.centered(half, n),
        )


@dataclass(frozen=True)
class SubmanifoldReport:
    max_omega: float
    max_second_fundamental: float
    lagrangian_ok: bool
    totally_geodesic_ok: bool
    samples: int


def submanifold_check(
    L: LagrangianModel, tol_L: float = TOL_L, samples: int = 48
) -> SubmanifoldReport:
    """Measure how Lagrangian and how totally geodesic a model submanifold is.

    Maxima are taken over a deterministic parameter net using orthonormalized
    tangent frames; a failed bound is recorded in the report (not raised).
    """
    amb = L.ambient
    n = amb.n
    ts = L.param_box.sample(samples, margin=1e-9)
    pts = L.embedding(ts)
    jac = L.jacobian(ts)
    g = amb.metric(pts)
    j = amb.j(pts)

    gram = np.einsum("...ai,...ab,...bk->...ik", jac, g, jac)
    if not (np.linalg.eigvalsh(gram)[..., 0] > 1e-10).all():
        raise NotImmersed("embedding Jacobian below full rank at a sample")

    # orthonormalize the tangent frame in g
    frames = np.zeros_like(jac)
    for i in range(n):
        v = jac[..., :, i].copy()
        for kprev in range(i):
            prev = frames[..., :, kprev]
            v -= np.einsum("...ab,...a,...b->...", g, v, prev)[..., None] * prev
        nrm = np.sqrt(np.einsum("...ab,...a,...b->...", g, v, v))
        frames[..., :, i] = v / nrm[..., None]

    jtau = np.einsum("...ab,...bk->...ak", j, frames)
    omega = np.einsum("...ak,...ab,...bl->...kl", jtau, g, frames)
    max_omega = float(np.abs(omega).max())

    # second fundamental form of the embedding from the ambient connection;
    # model embeddings are affine, so only the Gamma term contributes
    gam = christoffel(amb, pts)
    w = np.einsum("...mab,...ak,...bl->...mkl", gam, frames, frames)
    gram_f = np.einsum("...ai,...ab,...bk->...ik", frames, g, frames)
    rhs = np.einsum("...ai,...ab,...bkl->...ikl", frames, g, w)
    coeff = np.linalg.solve(gram_f, rhs.reshape(rhs.shape[:-2] + (n * n,)))
    coeff = coeff.reshape(rhs.shape)
    tangential = np.einsum("...mi,...ikl->...mkl", frames, coeff)
    perp = w - tangential
    norms = np.sqrt(np.einsum("...ab,...akl,...bkl->...kl", g, perp, perp))
    max_b = float(norms.max())

    L.checked_lagrangian = max_omega <= tol_L
    L.checked_totally_geodesic = max_b <= tol_L
    return SubmanifoldReport(max_omega, max_b, L.checked_lagrangian,
                             L.checked_totally_geodesic, samples)
