"""Geodesic normal coordinates, parallel transport, and distance fields.

Charts come in two kinds.  A plain chart shoots geodesics from a center point
along an orthonormal frame.  An adapted chart for a totally geodesic
Lagrangian first travels along the submanifold, parallel-transports the
normal frame, then shoots normally; its coordinates split into
(tangent, normal) pairs, frame vectors ordered tau_1, J tau_1, tau_2, J tau_2.

Geodesics integrate the standard second-order system with RK4: adaptive
stepping for single trajectories (conservation-grade accuracy), fixed
stepping for batched chart evaluation (smooth in the initial data, which
keeps finite differences of the chart clean).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import geometry as G
from .errors import (
    ChartFailure,
    LeftDomain,
    ShootingDiverged,
    StepUnderflow,
)
from .reporting import ExperimentReport, bound_report, digest_of

TOL_CHART = 1e-9


# ---------------------------------------------------------------------------
# geodesic integration


def _accel(m: G.ChartManifold, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    lo = m.domain.lo + m.deriv_margin() + 1e-12
    hi = m.domain.hi - m.deriv_margin() - 1e-12
    gam = G.christoffel(m, np.clip(x, lo, hi), check=False)
    return -np.einsum("...mab,...a,...b->...m", gam, v, v)


def _rk4_step(m, x, v, dt):
    k1x, k1v = v, _accel(m, x, v)
    k2x, k2v = v + 0.5 * dt * k1v, _accel(m, x + 0.5 * dt * k1x, v + 0.5 * dt * k1v)
    k3x, k3v = v + 0.5 * dt * k2v, _accel(m, x + 0.5 * dt * k2x, v + 0.5 * dt * k2v)
    k4x, k4v = v + dt * k3v, _accel(m, x + dt * k3x, v + dt * k3v)
    xn = x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
    vn = v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return xn, vn


def exp_map(
    m: G.ChartManifold,
    p: np.ndarray,
    X: np.ndarray,
    rel_tol: float = 1e-10,
    max_steps: int = 100_000,
    return_velocity: bool = False,
):
    """Endpoint of the geodesic from p with initial velocity X (unit time).

    Adaptive RK4 with step doubling; raises LeftDomain the moment the
    trajectory exits the chart box, StepUnderflow if error control stalls.
    """
    p = np.asarray(p, dtype=float)
    X = np.asarray(X, dtype=float)
    if not np.abs(X).max():
        return (p.copy(), X.copy()) if return_velocity else p.copy()
    margin = m.deriv_margin()
    x, v = p.copy(), X.copy()
    t, dt = 0.0, 0.05
    scale = max(1.0, float(np.abs(X).max()))
    while t < 1.0:
        dt = min(dt, 1.0 - t)
        if dt < 1e-14:
            raise StepUnderflow("adaptive step shrank below 1e-14 of unit time")
        x1, v1 = _rk4_step(m, x, v, dt)
        xh, vh = _rk4_step(m, x, v, 0.5 * dt)
        x2, v2 = _rk4_step(m, xh, vh, 0.5 * dt)
        err = max(np.abs(x2 - x1).max(), np.abs(v2 - v1).max()) / 15.0
        tol = rel_tol * scale
        if err <= tol:
            x = x2 + (x2 - x1) / 15.0
            v = v2 + (v2 - v1) / 15.0
            t += dt
            if not m.domain.contains(x, margin):
                raise LeftDomain("geodesic exited the chart box")
        grow = 0.9 * (tol / max(err, 1e-300)) ** 0.2
        dt *= min(4.0, max(0.1, grow))
        max_steps -= 1
        if max_steps <= 0:
            raise StepUnderflow("step budget exhausted")
    return (x, v) if return_velocity else x


def exp_map_batch(
    m: G.ChartManifold, p: np.ndarray, X: np.ndarray, steps: int = 64
):
    """Fixed-step batched geodesic flow; returns (endpoints, inside_mask).

    Trajectories that exit the box are frozen at their last inside state and
    masked out instead of raising, so chart probes can use the mask.
    """
    p = np.asarray(p, dtype=float)
    X = np.asarray(X, dtype=float)
    x = np.broadcast_to(p, X.shape).copy()
    v = X.copy()
    inside = np.ones(X.shape[:-1], dtype=bool)
    margin = m.deriv_margin()
    dt = 1.0 / steps
    for _ in range(steps):
        xn, vn = _rk4_step(m, x, v, dt)
        keep = inside & m.domain.contains(xn, margin)
        x = np.where(keep[..., None], xn, x)
        v = np.where(keep[..., None], vn, v)
        inside = keep
    return x, inside


def geodesic_polyline(
    m: G.ChartManifold, p: np.ndarray, X: np.ndarray, nodes: int = 33, steps_per: int = 4
) -> np.ndarray:
    """Points exp_p(t X) for t on a uniform grid of `nodes` values in [0,1]."""
    p = np.asarray(p, dtype=float)
    x, v = p.copy(), np.asarray(X, dtype=float).copy()
    out = [p.copy()]
    dt = 1.0 / ((nodes - 1) * steps_per)
    for _ in range(nodes - 1):
        for _ in range(steps_per):
            x, v = _rk4_step(m, x, v, dt)
        out.append(x.copy())
    if not m.domain.contains(np.asarray(out), m.deriv_margin()).all():
        raise LeftDomain("geodesic polyline exited the chart box")
    return np.asarray(out)


def parallel_transport(
    m: G.ChartManifold, path: np.ndarray, v: np.ndarray, substeps: int = 8
) -> np.ndarray:
    """Transport v along a polyline, integrating the compatibility ODE per segment.

    Batched over leading axes of v; the trailing axis holds vector components,
    so transporting a frame means transporting its rows, not its columns."""
    path = np.asarray(path, dtype=float)
    if not m.domain.contains(path, m.deriv_margin()).all():
        raise LeftDomain("transport path exits the chart box")
    v = np.asarray(v, dtype=float).copy()
    for a, b in zip(path[:-1], path[1:]):
        delta = b - a
        dt = 1.0 / substeps
        for k in range(substeps):
            def rhs(tau, w):
                x = a + tau * delta
                gam = G.christoffel(m, x, check=False)
                return -np.einsum("mab,a,...b->...m", gam, delta, w)

            t0 = k * dt
            k1 = rhs(t0, v)
            k2 = rhs(t0 + 0.5 * dt, v + 0.5 * dt * k1)
            k3 = rhs(t0 + 0.5 * dt, v + 0.5 * dt * k2)
            k4 = rhs(t0 + dt, v + dt * k3)
            v = v + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return v


def _transport_rhs(m, x, xd, V):
    gam = G.christoffel(
        m,
        np.clip(x, m.domain.lo + m.deriv_margin() + 1e-12,
                m.domain.hi - m.deriv_margin() - 1e-12),
        check=False,
    )
    acc = -np.einsum("...mab,...a,...b->...m", gam, xd, xd)
    dV = -np.einsum("...mab,...a,...bk->...mk", gam, xd, V)
    return xd, acc, dV


def geodesic_with_transport(
    m: G.ChartManifold, p: np.ndarray, X: np.ndarray, V: np.ndarray, steps: int = 64
):
    """Flow the geodesic from p with velocity X while transporting frame columns V.

    Batched over leading axes of X / V; returns (endpoint, transported V,
    inside mask)."""
    p = np.asarray(p, dtype=float)
    X = np.asarray(X, dtype=float)
    V = np.asarray(V, dtype=float)
    x = np.broadcast_to(p, X.shape).copy()
    v = X.copy()
    W = np.broadcast_to(V, X.shape + V.shape[-1:]).copy()
    inside = np.ones(X.shape[:-1], dtype=bool)
    margin = m.deriv_margin()
    dt = 1.0 / steps
    for _ in range(steps):
        k1x, k1v, k1w = _transport_rhs(m, x, v, W)
        k2x, k2v, k2w = _transport_rhs(m, x + 0.5 * dt * k1x, v + 0.5 * dt * k1v, W + 0.5 * dt * k1w)
        k3x, k3v, k3w = _transport_rhs(m, x + 0.5 * dt * k2x, v + 0.5 * dt * k2v, W + 0.5 * dt * k2w)
        k4x, k4v, k4w = _transport_rhs(m, x + dt * k3x, v + dt * k3v, W + dt * k3w)
        xn = x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        vn = v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        wn = W + dt / 6.0 * (k1w + 2 * k2w + 2 * k3w + k4w)
        keep = inside & m.domain.contains(xn, margin)
        x = np.where(keep[..., None], xn, x)
        v = np.where(keep[..., None], vn, v)
        W = np.where(keep[..., None, None], wn, W)
        inside = keep
    return x, W, inside


# ---------------------------------------------------------------------------
# sampling helpers


def ball_net(dim: int, samples: int) -> np.ndarray:
    """Deterministic net inside the closed unit ball (directions x radii).

    The sequence's leading all-zero row is dropped, so every returned point
    has a radius bounded away from zero."""
    u = G.halton_points(samples + 1, dim + 1)[1:]
    raw = 2.0 * u[:, :dim] - 1.0
    nrm = np.sqrt((raw**2).sum(-1, keepdims=True))
    dirs = raw / np.maximum(nrm, 1e-12)
    radii = u[:, dim:] ** (1.0 / dim)
    return dirs * radii


# ---------------------------------------------------------------------------
# orthonormal frames


def gram_schmidt_frame(g: np.ndarray, seed: Optional[np.ndarray] = None) -> np.ndarray:
    """Columns: g-orthonormal frame from the coordinate basis (or a seed matrix)."""
    dim = g.shape[-1]
    basis = np.eye(dim) if seed is None else np.asarray(seed, dtype=float)
    frame = np.zeros_like(basis)
    for i in range(dim):
        v = basis[:, i].copy()
        for k in range(i):
            v -= (frame[:, k] @ g @ v) * frame[:, k]
        nrm = np.sqrt(v @ g @ v)
        frame[:, i] = v / nrm
    return frame


# ---------------------------------------------------------------------------
# normal charts


@dataclass
class NormalChart:
    """Coordinates by geodesic shooting from a center with an orthonormal frame."""

    manifold: G.ChartManifold
    center: np.ndarray
    frame: np.ndarray
    radius: float
    kind: str = "plain"
    est_inj: float = np.inf
    steps: int = 64
    forward_fn: Optional[Callable] = None

    def forward(self, X: np.ndarray) -> np.ndarray:
        """Chart coordinates -> ambient point (batched)."""
        X = np.asarray(X, dtype=float)
        pts, inside = self._forward_masked(X)
        if not inside.all():
            raise LeftDomain("chart evaluation left the coordinate box")
        return pts

    def _forward_masked(self, X: np.ndarray):
        if self.forward_fn is not None:
            return self.forward_fn(X)
        amb = X @ self.frame.T
        return exp_map_batch(self.manifold, self.center, amb, self.steps)

    def inverse(
        self, q: np.ndarray, tol: float = TOL_CHART, max_iter: int = 80, strict: bool = True
    ) -> np.ndarray:
        """Chart coordinates of ambient points by relaxed fixed-Jacobian shooting.

        The relaxation factor is tuned per point from the autocorrelation of
        successive residuals (a one-eigenvalue secant model), which keeps the
        iteration contracting even where the chart's radial derivative is far
        from the frame's."""
        q = np.asarray(q, dtype=float)
        Einv = np.linalg.inv(self.frame)
        X = (q - self.center) @ Einv.T
        lam = np.ones(X.shape[:-1])
        res_prev = np.full(X.shape[:-1], np.inf)
        f_prev = np.zeros_like(X)
        done = np.zeros(X.shape[:-1], dtype=bool)
        for it in range(max_iter):
            pts, inside = self._forward_masked(X)
            resid = (pts - q) @ Einv.T
            rn = np.sqrt((resid**2).sum(-1))
            rn = np.where(inside, rn, np.inf)
            done = done | (rn <= tol)
            if done.all():
                break
            if it > 0:
                den = (f_prev**2).sum(-1)
                rho = np.where(den > 0, (resid * f_prev).sum(-1) / np.maximum(den, 1e-300), 0.0)
                stable = (np.abs(1.0 - rho) > 0.2) & (rn <= 4.0 * res_prev) & np.isfinite(rn)
                denom = np.where(stable, 1.0 - rho, 1.0)
                lam = np.where(stable, np.clip(lam / denom, 0.02, 1.5), lam)
            blew_up = rn > 4.0 * res_prev
            lam = np.where(blew_up, lam * 0.25, lam)
            X = np.where(done[..., None], X, X - lam[..., None] * resid)
            f_prev = resid
            res_prev = np.where(np.isfinite(rn), rn, res_prev)
        else:
            if strict:
                raise ShootingDiverged(
                    f"{int((~done).sum())} point(s) failed to invert within {max_iter} iterations"
                )
        if not strict:
            return X, done
        return X


def estimate_injectivity(
    m: G.ChartManifold,
    p: np.ndarray,
    frame: np.ndarray,
    cap: float,
    directions: int = 16,
    rungs: int = 12,
) -> float:
    """Probed lower bound for the injectivity radius at p.

    For each rung radius r, shoot 16 frame-coordinate directions out and
    invert back; a rung passes when every recoverable direction returns to
    its own coordinates (directions whose geodesic exits the box abstain).
    Returns the largest passing rung, so it is a certificate only for the
    probed directions, not a true injectivity radius.
    """
    dim = m.dim
    raw = 2.0 * G.halton_points(directions, dim) - 1.0
    nrm = np.sqrt((raw**2).sum(-1, keepdims=True))
    dirs = raw / np.maximum(nrm, 1e-12)
    chart = NormalChart(m, np.asarray(p, float), frame, radius=cap)
    best = 0.0
    for k in range(1, rungs + 1):
        r = cap * k / rungs
        X = r * dirs
        pts, inside = chart._forward_masked(X)
        if not inside.any():
            break
        try:
            Xb, ok = chart.inverse(pts[inside], tol=1e-7 * max(r, 1.0), strict=False)
        except (LeftDomain, StepUnderflow):
            break
        good = ok & (np.abs(Xb - X[inside]).max(-1) <= 1e-5 * max(r, 1.0))
        if good.all():
            best = r
        else:
            break
    return best


def normal_chart(
    m: G.ChartManifold, p: np.ndarray, radius: Optional[float] = None, probe: bool = True
) -> NormalChart:
    """Geodesic normal chart at p with a Gram-Schmidt coordinate frame."""
    p = np.asarray(p, dtype=float)
    m.check_domain(p, m.deriv_margin())
    gp = m.metric(p)
    frame = gram_schmidt_frame(gp)
    lam_min = float(np.linalg.eigvalsh(gp)[0])
    margin_metric = float(m.domain.margin(p)) * np.sqrt(lam_min)
    est = np.inf
    if probe:
        est = estimate_injectivity(m, p, frame, cap=margin_metric)
    r = min(0.4 * margin_metric, 0.75 * est)
    if radius is not None:
        r = radius
    if not (r > 0):
        raise ChartFailure("empty chart radius at this center")
    return NormalChart(m, p, frame, radius=float(r), est_inj=float(est))


def l_adapted_chart(
    m: G.ChartManifold,
    L: G.LagrangianModel,
    p_param: np.ndarray,
    radius: Optional[float] = None,
    steps: int = 64,
) -> NormalChart:
    """Adapted chart at a point of a totally geodesic Lagrangian.

    Odd coordinates flow along the submanifold through exp, even coordinates
    shoot along parallel-transported J-images of the tangent frame, so the
    submanifold sits inside {even coordinates = 0}.
    """
    p_param = np.asarray(p_param, dtype=float)
    p = L.embedding(p_param)
    gp = m.metric(p)
    jp = m.j(p)
    jac = L.jacobian(p_param)
    n = m.n
    tau = np.zeros((m.dim, n))
    for i in range(n):
        v = jac[:, i].copy()
        for k in range(i):
            v -= (tau[:, k] @ gp @ v) * tau[:, k]
        tau[:, i] = v / np.sqrt(v @ gp @ v)
    nu = jp @ tau
    frame = np.zeros((m.dim, m.dim))
    for k in range(n):
        frame[:, 2 * k] = tau[:, k]
        frame[:, 2 * k + 1] = nu[:, k]

    def forward_fn(X):
        X = np.asarray(X, dtype=float)
        ell = X[..., 0::2] @ tau.T
        mid, Vt, inside1 = geodesic_with_transport(m, p, ell, nu, steps=steps)
        normal = np.einsum("...mk,...k->...m", Vt, X[..., 1::2])
        out, inside2 = exp_map_batch(m, mid, normal, steps=steps)
        return out, inside1 & inside2

    gp_margin = float(m.domain.margin(p)) * np.sqrt(float(np.linalg.eigvalsh(gp)[0]))
    r = 0.4 * gp_margin if radius is None else radius
    return NormalChart(
        m, p, frame, radius=float(r), kind="l-adapted", steps=steps, forward_fn=forward_fn
    )


# ---------------------------------------------------------------------------
# distance fields


@dataclass
class DistanceField:
    """Geodesic distance to the chart center, evaluated through the chart inverse."""

    chart: NormalChart

    def beta(self, q: np.ndarray) -> np.ndarray:
        X = self.chart.inverse(q)
        return np.sqrt((np.asarray(X) ** 2).sum(-1))

    def __call__(self, q: np.ndarray) -> np.ndarray:
        return self.beta(q)


def distance_field(m: G.ChartManifold, p: np.ndarray, radius: Optional[float] = None) -> DistanceField:
    # an explicit radius is the caller's assertion, so skip the probe then
    chart = normal_chart(m, p, radius=radius, probe=radius is None)
    return DistanceField(chart)


# ---------------------------------------------------------------------------
# tensor norms in normal coordinates


def _chart_jacobian(chart: NormalChart, X: np.ndarray, h: float) -> np.ndarray:
    """d(forward)/dX by central differences; trailing axes (amb, chart).

    All 2*dim stencil shifts ride through one batched forward call."""
    dim = chart.manifold.dim
    eye = np.eye(dim)
    offs = np.concatenate([h * eye, -h * eye], axis=0)
    F = chart.forward(np.asarray(X, float)[..., None, :] + offs)
    return np.swapaxes((F[..., :dim, :] - F[..., dim:, :]) / (2.0 * h), -1, -2)


def _pullback_components(chart: NormalChart, X: np.ndarray, kind: str, h: float) -> np.ndarray:
    """Tensor components in chart coordinates, one forward call per stencil."""
    m = chart.manifold
    dim = m.dim
    eye = np.eye(dim)
    offs = np.concatenate([np.zeros((1, dim)), h * eye, -h * eye], axis=0)
    F = chart.forward(np.asarray(X, float)[..., None, :] + offs)
    pts = F[..., 0, :]
    DF = np.swapaxes((F[..., 1:dim + 1, :] - F[..., dim + 1:, :]) / (2.0 * h), -1, -2)
    if kind == "cov2":
        amb = m.metric(pts)
        return np.einsum("...ai,...ab,...bj->...ij", DF, amb, DF)
    if kind == "end":
        amb = m.j(pts)
        DFinv = np.linalg.inv(DF)
        return np.einsum("...ia,...ab,...bj->...ij", DFinv, amb, DF)
    raise ValueError(f"unknown tensor kind {kind!r}")


def _components_on_stencil(
    chart: NormalChart, X: np.ndarray, kind: str, h_comp: float, h_jac: float
):
    """Components and their first coordinate derivatives at each point of X.

    Stacks the (1 + 2*dim) component-derivative stencil into a single
    pullback evaluation, returning (components, d1) with d1[..., i, j, v]."""
    dim = chart.manifold.dim
    eye = np.eye(dim)
    offs = np.concatenate([np.zeros((1, dim)), h_comp * eye, -h_comp * eye], axis=0)
    stacked = np.asarray(X, float)[..., None, :] + offs
    comps = _pullback_components(chart, stacked, kind, h_jac)
    center = comps[..., 0, :, :]
    d1 = np.moveaxis(
        (comps[..., 1:dim + 1, :, :] - comps[..., dim + 1:, :, :]) / (2.0 * h_comp), -3, -1
    )
    return center, d1


def tensor_ck_norm(
    m: G.ChartManifold,
    p: np.ndarray,
    k: int,
    kind: str = "cov2",
    chart: Optional[NormalChart] = None,
    samples: int = 32,
    fd_frac: float = 0.02,
    jac_step: Optional[float] = None,
) -> float:
    """Sampled seminorm [T]_{C^k}: sup over a ball of the root-sum-square of
    k-th chart-coordinate derivatives of the tensor components.

    The ball has the chart radius (itself capped at 3/4 of the probed
    injectivity radius); the sup is over a deterministic net.  k <= 2.
    """
    if k not in (0, 1, 2):
        raise ValueError("k must be 0, 1 or 2")
    if chart is None:
        chart = normal_chart(m, p)
    dim = m.dim
    rad = chart.radius
    hs = fd_frac * rad
    if jac_step is None:
        jac_step = 2e-3 * max(rad, 1.0)
    X = ball_net(dim, samples) * (rad - 2.05 * k * hs)

    # one stacked evaluation covers the whole FD stencil
    eye = np.eye(dim)
    offs = [np.zeros(dim)]
    if k >= 1:
        for v in range(dim):
            offs.extend([hs * eye[v], -hs * eye[v]])
    if k == 2:
        for v in range(dim):
            for w in range(v + 1, dim):
                ev, ew = hs * eye[v], hs * eye[w]
                offs.extend([ev + ew, ev - ew, -ev + ew, -ev - ew])
    vals = _pullback_components(chart, X[:, None, :] + np.stack(offs), kind, jac_step)

    if k == 0:
        return float(np.sqrt((vals[:, 0] ** 2).sum((-1, -2))).max())
    plus = vals[:, 1:2 * dim + 1:2]
    minus = vals[:, 2:2 * dim + 1:2]
    if k == 1:
        d = (plus - minus) / (2.0 * hs)
        return float(np.sqrt((d**2).sum((-1, -2, -3))).max())
    total = np.zeros(X.shape[0])
    dd = (plus - 2.0 * vals[:, :1] + minus) / hs**2
    total += (dd**2).sum((-1, -2, -3))
    pos = 2 * dim + 1
    for v in range(dim):
        for w in range(v + 1, dim):
            quad = vals[:, pos:pos + 4]
            pos += 4
            d = (quad[:, 0] - quad[:, 1] - quad[:, 2] + quad[:, 3]) / (4.0 * hs**2)
            total += 2.0 * (d**2).sum((-1, -2))
    return float(np.sqrt(total).max())


@dataclass(frozen=True)
class AdmissibilityReport:
    g_c2: float
    est_inj: float
    passed: bool


def admissibility(m: G.ChartManifold, p: np.ndarray, chart: Optional[NormalChart] = None) -> AdmissibilityReport:
    """The rescaled-smallness predicate: 10 m^2 [g]_{C^2} <= 1 and inj >= 2.

    The injectivity radius is the probed estimate, a lower bound only for
    the tested directions."""
    if chart is None:
        chart = normal_chart(m, p)
    c2 = tensor_ck_norm(m, p, 2, kind="cov2", chart=chart)
    ok = (10.0 * m.dim**2 * c2 <= 1.0) and (chart.est_inj >= 2.0)
    return AdmissibilityReport(g_c2=c2, est_inj=chart.est_inj, passed=ok)


# ---------------------------------------------------------------------------
# chart estimate report


def chart_estimate_report(chart: NormalChart, radius: float, samples: int = 64) -> ExperimentReport:
    """Measure the normal-coordinate metric estimates on a ball.

    Per sampled point q (|q| <= radius, radius <= 1 after rescaling to
    admissibility): sum |g_ij - delta|^2 <= |q|^4, sum |Gamma^k_ij|^2 <= |q|^2,
    metric equivalence within factors (1 +- |q|^2), orthogonal projection
    defect <= |q|^2.  For adapted charts, additionally the block structure
    and Christoffel vanishing along the submanifold at FD tolerance.
    """
    m = chart.manifold
    dim = m.dim
    rad = min(radius, chart.radius)
    X = ball_net(dim, samples) * rad
    h = 5e-4 * max(rad, 1.0)

    comp_g, d1 = _components_on_stencil(chart, X, "cov2", h, h)
    q2 = (X**2).sum(-1)
    eye = np.eye(dim)
    dev = ((comp_g - eye) ** 2).sum((-1, -2))
    ratio_g = np.max(dev / np.maximum(q2**2, 1e-300))

    # chart-coordinate Christoffel symbols by FD of the pulled-back metric
    ginv = np.linalg.inv(comp_g)
    t = d1 + np.einsum("...bna->...nab", d1) - np.einsum("...abn->...nab", d1)
    gam = 0.5 * np.einsum("...nm,...nab->...mab", ginv, t)
    gam2 = (gam**2).sum((-1, -2, -3))
    ratio_gam = np.max(gam2 / np.maximum(q2, 1e-300))

    ev = np.linalg.eigvalsh(comp_g)
    equiv_lo = np.max((1.0 - ev[..., 0]) / np.maximum(q2, 1e-300))
    equiv_hi = np.max((ev[..., -1] - 1.0) / np.maximum(q2, 1e-300))

    measured = {
        "metric_deviation_ratio": float(ratio_g),
        "christoffel_ratio": float(ratio_gam),
        "equiv_lower_ratio": float(equiv_lo),
        "equiv_upper_ratio": float(equiv_hi),
    }
    bound = {
        "metric_deviation_ratio": 1.0,
        "christoffel_ratio": 1.0,
        "equiv_lower_ratio": 1.0,
        "equiv_upper_ratio": 1.0,
    }
    grid = {
        "kind": chart.kind,
        "radius": float(rad),
        "samples": float(samples),
        "chart_radius": float(chart.radius),
    }

    if chart.kind == "l-adapted":
        n = m.n
        t_line = np.zeros((samples, dim))
        t_line[:, 0::2] = ball_net(n, samples) * 0.9 * rad
        comp_L, d1L = _components_on_stencil(chart, t_line, "cov2", h, h)
        block_dev = 0.0
        for i in range(n):
            for j in range(n):
                oi, oj = 2 * i, 2 * j
                block_dev = max(block_dev, float(np.abs(comp_L[:, oi, oj + 1]).max()))
                block_dev = max(block_dev, float(np.abs(comp_L[:, oi + 1, oj]).max()))
                dev_ee = comp_L[:, oi + 1, oj + 1] - (1.0 if i == j else 0.0)
                block_dev = max(block_dev, float(np.abs(dev_ee).max()))
        ginvL = np.linalg.inv(comp_L)
        tL = d1L + np.einsum("...bna->...nab", d1L) - np.einsum("...abn->...nab", d1L)
        gamL = 0.5 * np.einsum("...nm,...nab->...mab", ginvL, tL)
        v5 = 0.0
        odd = list(range(0, dim, 2))
        even = list(range(1, dim, 2))
        for oi in odd:
            for oj in odd:
                for ek in even:
                    v5 = max(v5, float(np.abs(gamL[:, ek, oi, oj]).max()))
                    v5 = max(v5, float(np.abs(gamL[:, oj, oi, ek]).max()))
        comp0, d10 = _components_on_stencil(chart, np.zeros((1, dim)), "cov2", h, h)
        t0 = d10 + np.einsum("...bna->...nab", d10) - np.einsum("...abn->...nab", d10)
        gam0 = 0.5 * np.einsum("...nm,...nab->...mab", np.linalg.inv(comp0), t0)
        measured["block_structure_defect"] = block_dev
        measured["christoffel_on_L"] = v5
        measured["origin_metric_defect"] = float(np.abs(comp0 - eye).max())
        measured["origin_christoffel_defect"] = float(np.abs(gam0).max())
        fd_tol = 50.0 * max(h, m.fd_step if m.deriv_mode == "fd" else h)
        bound["block_structure_defect"] = fd_tol
        bound["christoffel_on_L"] = fd_tol
        bound["origin_metric_defect"] = 1e-6
        bound["origin_christoffel_defect"] = fd_tol

    inputs = {
        "family": m.family,
        "kind": chart.kind,
        "center": [float(c) for c in chart.center],
        "radius": float(rad),
    }
    name = "chart-estimates" if chart.kind == "plain" else "chart-estimates-l-adapted"
    return bound_report(name, "normal-coordinate-metric-bounds", inputs, measured, bound, grid)


# ---------------------------------------------------------------------------
# discrete path curvature


def path_geodesic_curvature(m: G.ChartManifold, path: np.ndarray) -> np.ndarray:
    """Geodesic curvature at interior nodes of a (nearly) unit-speed polyline."""
    path = np.asarray(path, dtype=float)
    g = m.metric(path)
    seg = path[1:] - path[:-1]
    ds = np.sqrt(np.einsum("...ab,...a,...b->...", 0.5 * (g[1:] + g[:-1]), seg, seg))
    s = np.concatenate([[0.0], np.cumsum(ds)])
    mid = path[1:-1]
    t_vec = (path[2:] - path[:-2]) / (s[2:] - s[:-2])[..., None]
    dt = (
        (path[2:] - mid) / ((s[2:] - s[1:-1]) * (s[2:] - s[:-2]))[..., None]
        + (path[:-2] - mid) / ((s[1:-1] - s[:-2]) * (s[2:] - s[:-2]))[..., None]
    ) * 2.0
    gam = G.christoffel(m, mid)
    acc = dt + np.einsum("...mab,...a,...b->...m", gam, t_vec, t_vec)
    gm = g[1:-1]
    tt = np.einsum("...ab,...a,...b->...", gm, t_vec, t_vec)
    ta = np.einsum("...ab,...a,...b->...", gm, t_vec, acc)
    perp = acc - (ta / tt)[..., None] * t_vec
    return np.sqrt(np.einsum("...ab,...a,...b->...", gm, perp, perp))
