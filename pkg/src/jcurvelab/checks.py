"""Quantitative estimate checks on immersed surfaces.

Everything here measures a solved or analytic immersion against a closed-form
inequality: weighted-area monotonicity over geodesic sublevel sets, the mean
value bound at the center, the distance-Laplacian comparison with its
integration-by-parts cross-check, curvature concentration thresholds, and
unit-scale graph certificates.

The shared substrate is a per-node geodesic distance field ``beta`` to a
marked image point, with sublevel integrals F(tau) = integral of f over
{beta <= tau}.  F uses a sub-cell linear partial-volume rule (each node cell
contributes the fraction of its beta-range below the level), which makes
F(tau) exactly non-decreasing for f >= 0.  Level-line integrals use an
independent triangular band kernel in beta values, so the coarea cross-check
compares two genuinely different discretizations.  Sublevel sets are taken
inside the single graphical patch backing the grid, so they are connected by
construction (the component and full-preimage readings coincide here).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import charts as C
from . import geometry as G
from . import surfaces as S
from .errors import (
    HypothesisFailed,
    NegativeF,
    NoRegularLevels,
    PatchTooSmall,
    RangeError,
    UnresolvedCurvature,
)
from .reporting import ExperimentReport, digest_of

TOL_COAREA = 1e-2
TOL_MONO_REL = 1e-4      # slack on GF increments, relative to GF at the top level
TOL_IBP = 1e-2
TOL_HYP = 1e-9           # slack when a verified hypothesis should vanish exactly
LEVEL_FLOOR_CELLS = 5    # smallest tested level, in grid cells
CRIT_GRAM = 0.0625       # |grad beta|^2 below this marks a near-critical node
COARSE_SUBDIV = 8        # coarea sub-ladder spacing is h / COARSE_SUBDIV


# ---------------------------------------------------------------------------
# distance fields on grids


def _beta_field(u: S.GridImmersion, p: np.ndarray) -> Tuple[np.ndarray, C.NormalChart]:
    """Per-node geodesic distance to the ambient point p, with its chart.

    Flat ambients shortcut through the constant orthonormal frame (their
    exponential map is affine); anything else inverts the normal chart.
    """
    m = u.ambient
    p = np.asarray(p, dtype=float)
    if m.family == "flat":
        chart = C.normal_chart(m, p, probe=False)
        X = (u.values - p) @ np.linalg.inv(chart.frame).T
    else:
        chart = C.normal_chart(m, p)
        X = chart.inverse(u.values.reshape(-1, m.dim)).reshape(u.values.shape)
    return np.sqrt((X**2).sum(-1)), chart


def _surface_weights(u: S.GridImmersion, sg: S.SurfaceGeometry) -> np.ndarray:
    """Per-node surface measure, matching the conventions of integrate()."""
    if u.grid.half:
        w = u.grid.half_weights()
    else:
        w = u.grid.cell_areas().copy()
        w[0, 1:] = 0.0
        w[0, 0] *= u.grid.n_theta
    return w * sg.sqrt_det


def _radial_span(beta: np.ndarray) -> np.ndarray:
    """Beta variation across one radial cell: the sub-cell transition width."""
    d = np.empty_like(beta)
    d[1:-1] = 0.5 * np.abs(beta[2:] - beta[:-2])
    d[0] = np.abs(beta[1] - beta[0]).mean()
    d[-1] = np.abs(beta[-1] - beta[-2])
    return np.maximum(d, 1e-12)


def _grad_beta_sq(u: S.GridImmersion, sg: S.SurfaceGeometry, beta: np.ndarray) -> np.ndarray:
    d1 = S.grid_derivatives(u.grid, beta)[0]
    return np.einsum("...ij,...i,...j->...", sg.gamma_inv, d1, d1)


# ---------------------------------------------------------------------------
# geodesic sublevel families


@dataclass
class SublevelFamily:
    """Sublevel sets of the distance to a marked point, with their integrals.

    ``levels`` holds the surviving regular values; ``F[i]`` is the integral
    of f over {beta <= levels[i]} and ``boundary_length_weights[i]`` the
    level-line integral of f/|grad beta| at the same value.  ``coarea_defect``
    is the relative mismatch between F(top) - F(bottom) and the tau integral
    of the boundary weights over a fine sub-ladder.
    """

    u: S.GridImmersion
    p: np.ndarray
    beta: np.ndarray
    levels: np.ndarray
    F: np.ndarray
    boundary_length_weights: np.ndarray
    f: np.ndarray
    center: Tuple[int, int]
    chart: C.NormalChart
    coarea_defect: float
    grad_sq: np.ndarray
    weights: np.ndarray
    span: np.ndarray
    mask: np.ndarray
    half: bool

    def sub_area(self, tau: float, f: Optional[np.ndarray] = None) -> float:
        """Integral of f (default: the family's f) over {beta <= tau}."""
        vals = self.f if f is None else np.asarray(f, dtype=float)
        frac = np.clip(0.5 + (tau - self.beta) / self.span, 0.0, 1.0)
        return float((vals * frac * self.weights)[self.mask].sum())

    def line_integral(self, tau: float, g: np.ndarray) -> float:
        """Level-line integral of g/|grad beta| at tau (triangular band)."""
        ker = np.maximum(0.0, 1.0 - np.abs((self.beta - tau) / self.span)) / self.span
        return float((np.asarray(g, dtype=float) * ker * self.weights)[self.mask].sum())


def _many_levels(taus, beta, span, weights, mask, f, kind):
    """F or boundary-weight values for a batch of levels, chunked."""
    taus = np.asarray(taus, dtype=float)
    b = beta[mask]
    s = span[mask]
    wf = (weights * f)[mask]
    out = np.empty(taus.shape[0])
    step = max(1, int(4e6 // max(b.size, 1)))
    for lo in range(0, taus.shape[0], step):
        t = taus[lo:lo + step, None]
        if kind == "F":
            frac = np.clip(0.5 + (t - b) / s, 0.0, 1.0)
        else:
            frac = np.maximum(0.0, 1.0 - np.abs((b - t) / s)) / s
        out[lo:lo + step] = frac @ wf
    return out


def sublevel_family(
    u: S.GridImmersion,
    p: np.ndarray,
    f: Optional[np.ndarray] = None,
    n_levels: int = 12,
) -> SublevelFamily:
    """Build the sublevel-set family of the distance to p on the surface.

    ``p`` must be the image of a grid node: an interior node on full discs,
    a straight-edge node on half discs.  ``f`` is a non-negative per-node
    weight (default 1).  Levels are ``n_levels`` equally spaced values
    between 5h and the largest radius that stays clear of the outer arc,
    minus any value within h of a detected critical value of beta.  Critical
    values are located where the Gram determinant of the surface gradient of
    beta degenerates (|grad beta|^2 below a fixed threshold).
    """
    grid = u.grid
    h = grid.h
    if f is None:
        f = np.ones(u.values.shape[:-1])
    f = np.asarray(f, dtype=float)
    if f.min() < -1e-12:
        raise NegativeF("sublevel weights must be non-negative")
    f = np.maximum(f, 0.0)

    sg = S.surface_geometry(u)
    weights = _surface_weights(u, sg)
    mask = grid.public_mask()
    beta, chart = _beta_field(u, p)
    span = _radial_span(beta)
    grad_sq = _grad_beta_sq(u, sg, beta)

    flat_idx = np.argmin(
        np.where(mask, ((u.values - p) ** 2).sum(-1), np.inf).ravel()
    )
    center = np.unravel_index(flat_idx, beta.shape)
    if float(beta[center]) > 10.0 * h:
        raise HypothesisFailed("the marked point is not the image of a grid node")
    if grid.half:
        seg = grid.boundary_masks()["segment"]
        on_edge = seg[center] or center == (0, 0)
        if not on_edge:
            raise HypothesisFailed("half-disc families need the marked point on the straight edge")

    masks = grid.boundary_masks()
    arc_beta = beta[masks["arc"] & mask]
    tau_min = LEVEL_FLOOR_CELLS * h
    tau_max = float(arc_beta.min()) - h
    if tau_max <= tau_min:
        raise NoRegularLevels("no room between the level floor and the outer arc")

    # near-critical beta values: gradient Gram determinant degenerates there
    crit_zone = mask & masks["interior"]
    crit_zone[:3] = False
    crit_vals = beta[crit_zone & (grad_sq < CRIT_GRAM)]
    levels = np.linspace(tau_min, tau_max, n_levels)
    if crit_vals.size:
        keep = np.abs(levels[:, None] - crit_vals[None, :]).min(axis=1) > h
        levels = levels[keep]
    if levels.size == 0:
        raise NoRegularLevels("every candidate level sits near a critical value")

    F = _many_levels(levels, beta, span, weights, mask, f, "F")
    W = _many_levels(levels, beta, span, weights, mask, f, "W")
    assert np.all(np.diff(F) >= -1e-14 * max(1.0, F[-1])), "sublevel integrals must be non-decreasing"

    fine = np.arange(levels[0], levels[-1] + 1e-15, h / COARSE_SUBDIV)
    Wf = _many_levels(fine, beta, span, weights, mask, f, "W")
    est = float((Wf[:-1] * np.diff(fine)).sum())
    dF = float(F[-1] - F[0])
    defect = abs(dF - est) / max(abs(dF), 1e-300)

    return SublevelFamily(
        u=u, p=np.asarray(p, dtype=float), beta=beta, levels=levels, F=F,
        boundary_length_weights=W, f=f, center=(int(center[0]), int(center[1])),
        chart=chart, coarea_defect=defect, grad_sq=grad_sq, weights=weights,
        span=span, mask=mask, half=bool(grid.half),
    )


# ---------------------------------------------------------------------------
# hypothesis verification shared by the monotonicity-type checks


def _verify_spectrum_hypothesis(fam: SublevelFamily, lam: float, b: float, C_const: float) -> None:
    """Check the lower spectral bound on f and the caps the theorems assume."""
    if b > fam.chart.radius:
        raise HypothesisFailed("top radius exceeds the chart radius")
    if C_const > 0 and b > 1.0 / C_const:
        raise HypothesisFailed("top radius exceeds the curvature-constant cap")
    u = fam.u
    lap = S.laplace_beltrami(u, fam.f)
    zone = fam.mask & u.grid.boundary_masks()["interior"] & (fam.beta <= b)
    slack = TOL_HYP * (1.0 + float(np.abs(fam.f).max()))
    low = float((lap + lam * b * b * fam.f)[zone].min())
    if low < -slack:
        raise HypothesisFailed("spectral lower bound on f fails on the sublevel set")
    if fam.half:
        d1f = S.grid_derivatives(u.grid, fam.f)[0]
        seg = u.grid.boundary_masks()["segment"] & fam.mask
        edge = float(np.abs(d1f[..., 1])[seg].max()) if seg.any() else 0.0
        if edge > 1e-8 * (1.0 + float(np.abs(fam.f).max())):
            raise HypothesisFailed("f has a normal derivative along the straight edge")


def _weight_factor(tau: np.ndarray, lam: float, b: float, C_const: float) -> np.ndarray:
    return np.exp(lam * tau / (2.0 * b) + 2.0 * C_const * tau) / tau**2


# ---------------------------------------------------------------------------
# monotonicity and its corollaries


def monotonicity_check(fam: SublevelFamily, lam: float, b: float, C_const: float = 0.0) -> ExperimentReport:
    """Weighted-area monotonicity along the family's regular levels.

    Verifies the spectral hypothesis on f first, then asserts that
    G(tau) F(tau) with G(tau) = exp(lam tau / 2b + 2 C tau) / tau^2 is
    non-decreasing across consecutive levels up to a slack relative to the
    top value, and evaluates the endpoint inequality on every level pair.
    A failed hypothesis raises; a failed inequality reports pass = false.
    """
    _verify_spectrum_hypothesis(fam, lam, b, C_const)
    keep = fam.levels <= b + 1e-12
    if keep.sum() < 2:
        raise NoRegularLevels("need at least two regular levels below the top radius")
    lv = fam.levels[keep]
    F = fam.F[keep]
    top = float(lv[-1])

    GF = _weight_factor(lv, lam, top, C_const) * F
    tol = TOL_MONO_REL * float(GF[-1])
    inc = np.diff(GF)
    inc_ok = bool(inc.min() >= -tol)

    # endpoint form, each pair normalized at its own top radius
    worst = np.inf
    for j in range(1, lv.size):
        lhs = np.exp(lam * lv[:j] / (2.0 * lv[j]) + 2.0 * C_const * lv[:j]) / lv[:j] ** 2 * F[:j]
        rhs = float(np.exp(lam / 2.0 + 2.0 * C_const * lv[j]) / lv[j] ** 2 * F[j])
        worst = min(worst, rhs + tol - float(lhs.max()))
    end_ok = bool(worst >= 0.0)

    # telescoping consistency: ladder increments within tol imply the
    # ladder-normalized endpoint inequality within the accumulated slack
    if inc_ok:
        ladder_worst = float((GF[-1] - GF).min())
        assert ladder_worst >= -(lv.size - 1) * tol

    measured = {
        "min_increment": float(inc.min()),
        "endpoint_worst_slack": float(worst),
        "weighted_area_top": float(GF[-1]),
    }
    bound = {"increment_floor": -tol}
    passed = inc_ok and end_ok
    unit_f = float(np.abs(fam.f - 1.0).max()) < 1e-14
    if unit_f:
        euclid = np.pi * top**2 * (0.5 if fam.half else 1.0)
        ratio = float(F[-1]) / euclid
        measured["area_ratio_to_euclidean"] = ratio
        bound["area_ratio_floor"] = 1.0 / 1.1
        passed = passed and ratio >= 1.0 / 1.1
    margin = (float(inc.min()) + tol) / max(abs(float(GF[-1])), 1e-300)
    return ExperimentReport(
        name="weighted-area-monotonicity",
        anchor="monotonicity",
        inputs_digest=digest_of(
            {
                "family": fam.u.ambient.family,
                "r": fam.u.grid.r,
                "h": fam.u.grid.h,
                "lam": float(lam),
                "b": float(b),
                "C": float(C_const),
                "beta_sum": float(fam.beta[fam.mask].sum()),
            }
        ),
        measured=measured,
        bound=bound,
        margin=float(margin),
        passed=passed,
        grid={
            "r": fam.u.grid.r, "h": fam.u.grid.h, "levels": int(lv.size),
            "top_level": top, "shape": "half-disc" if fam.half else "disc",
        },
    )


def mean_value_check(
    fam: SublevelFamily,
    lam: float,
    b: float,
    f: Optional[np.ndarray] = None,
    C_const: Optional[float] = None,
) -> ExperimentReport:
    """Center-value bound by the weighted mean over the top sublevel set.

    Compares f at the marked center node against
    (1+eps) e^{lam/2} / (pi b^2) times the integral of f over {beta <= b},
    doubled on half discs, with 1+eps = e^{2Cb}.  ``C_const`` defaults to 0
    on flat ambients and to the measured geometry constant otherwise.
    """
    if f is not None and not np.allclose(np.asarray(f, dtype=float), fam.f, atol=1e-12):
        raise HypothesisFailed("explicit f disagrees with the family's weight field")
    if C_const is None:
        C_const = 0.0 if fam.u.ambient.family == "flat" else G.geometry_constant(fam.u.ambient).C
    _verify_spectrum_hypothesis(fam, lam, b, C_const)
    keep = fam.levels <= b + 1e-12
    if not keep.any():
        raise NoRegularLevels("no regular level below the requested radius")
    top = float(fam.levels[keep][-1])
    total = float(fam.F[keep][-1])

    eps = float(np.exp(2.0 * C_const * top) - 1.0)
    factor = 2.0 if fam.half else 1.0
    bound_val = factor * (1.0 + eps) * np.exp(lam / 2.0) / (np.pi * top**2) * total
    center_val = float(fam.f[fam.center])
    margin = (bound_val - center_val) / max(abs(bound_val), 1e-300)
    return ExperimentReport(
        name="center-mean-value",
        anchor="mean-value",
        inputs_digest=digest_of(
            {
                "family": fam.u.ambient.family,
                "r": fam.u.grid.r,
                "h": fam.u.grid.h,
                "lam": float(lam),
                "b": float(b),
                "C": float(C_const),
                "f_sum": float(fam.f[fam.mask].sum()),
            }
        ),
        measured={"center_value": center_val, "mean_bound": float(bound_val)},
        bound={"center_value": float(bound_val)},
        margin=float(margin),
        passed=bool(center_val <= bound_val),
        grid={
            "r": fam.u.grid.r, "h": fam.u.grid.h, "top_level": top,
            "shape": "half-disc" if fam.half else "disc",
        },
    )


# ---------------------------------------------------------------------------
# distance-Laplacian comparison


def laplacian_beta_check(u: S.GridImmersion, p: np.ndarray, C_const: float = 0.0) -> ExperimentReport:
    """Pointwise and integrated comparison of the Laplacian of beta^2 with 4.

    (a) max over interior nodes inside the certified radius of
    |lap beta^2 - 4| - 4 C beta against 50 h^2 (1 + sup|B|^2), and
    (b) the integration-by-parts identity at a regular radius r,
    for f = 1 and f = beta^2, each within 1 percent.  The certified radius
    is half the smaller of the chart radius and 1/C.
    """
    fam = sublevel_family(u, p, None, n_levels=25)
    cap = 0.5 * fam.chart.radius
    if C_const > 0:
        cap = min(cap, 0.5 / C_const)
    usable = fam.levels[fam.levels <= cap + 1e-12]
    if usable.size == 0:
        raise HypothesisFailed("certified radius lies below the smallest regular level")
    r = float(usable[-1])

    beta = fam.beta
    lap_b2 = S.laplace_beltrami(u, beta**2)
    inner = fam.mask & u.grid.boundary_masks()["interior"] & (beta <= r)
    cf = S.second_fundamental(u)
    b_sup = float(cf.B_norm[inner].max())
    excess = float((np.abs(lap_b2 - 4.0) - 4.0 * C_const * beta)[inner].max())
    tol_lap = 50.0 * u.grid.h**2 * (1.0 + b_sup**2)

    report_measured = {"pointwise_excess": excess}
    report_bound = {"pointwise_excess": tol_lap}
    margins = [(tol_lap - excess) / tol_lap]
    passed = excess <= tol_lap

    if not fam.half:
        probes = {"unit": np.ones_like(beta), "beta-squared": beta**2}
        for tag, fv in probes.items():
            lap_f = np.zeros_like(beta) if tag == "unit" else lap_b2
            lhs = fam.sub_area(r, fv * lap_b2)
            bulk = fam.sub_area(r, (beta**2 - r * r) * lap_f)
            edge = 2.0 * r * fam.line_integral(r, fv * fam.grad_sq)
            defect = abs(lhs - (bulk + edge)) / max(abs(lhs), 1e-300)
            report_measured[f"ibp_defect_{tag}"] = defect
            report_bound[f"ibp_defect_{tag}"] = TOL_IBP
            margins.append((TOL_IBP - defect) / TOL_IBP)
            passed = passed and defect <= TOL_IBP

    return ExperimentReport(
        name="distance-laplacian-comparison",
        anchor="laplacian-beta",
        inputs_digest=digest_of(
            {
                "family": u.ambient.family, "r": u.grid.r, "h": u.grid.h,
                "C": float(C_const), "radius": r,
                "beta_sum": float(beta[fam.mask].sum()),
            }
        ),
        measured=report_measured,
        bound=report_bound,
        margin=float(min(margins)),
        passed=bool(passed),
        grid={
            "r": u.grid.r, "h": u.grid.h, "radius": r,
            "shape": "half-disc" if fam.half else "disc",
        },
    )


# ---------------------------------------------------------------------------
# space-form Hessian comparison values


def hessian_spaceform_values(C_const: float, beta: float) -> Tuple[float, float]:
    """Closed-form Hessian comparison bounds at distance beta, curvature C.

    Returns (C/2 cot(C beta / 2), C/2 coth(C beta / 2)); requires
    0 < C beta <= 1.  Both tend to 1/beta as C beta tends to 0, and satisfy
    beta * upper - 1 <= C beta / 2 and beta * lower - 1 >= -C beta / 2.
    """
    x = C_const * beta
    if not np.all((x > 0.0) & (x <= 1.0)):
        raise RangeError("the product of curvature constant and distance must lie in (0, 1]")
    half = 0.5 * x
    lower = 0.5 * C_const / np.tan(half)
    upper = 0.5 * C_const / np.tanh(half)
    return lower, upper


# ---------------------------------------------------------------------------
# step-times-smooth monotonicity


def monotone_product_check(f_samples: np.ndarray, g_samples: np.ndarray) -> bool:
    """Whether the product of a monotone step function and a smooth factor
    is non-decreasing over the common sample grid.

    ``f_samples`` must be non-negative and non-decreasing (its jumps are the
    step discontinuities); ``g_samples`` must be non-negative.  The product's
    increments are checked discretely away from the jumps and across them;
    a structural violation of the preconditions raises, a failed product
    monotonicity returns False.
    """
    f = np.asarray(f_samples, dtype=float)
    g = np.asarray(g_samples, dtype=float)
    if f.shape != g.shape or f.ndim != 1 or f.size < 2:
        raise HypothesisFailed("step and smooth samples must share one grid")
    scale = max(1.0, float(np.abs(f).max()))
    if f.min() < -1e-15 * scale:
        raise HypothesisFailed("step data must be non-negative")
    if np.diff(f).min() < -1e-12 * scale:
        raise HypothesisFailed("step data must be non-decreasing")
    if g.min() < 0.0:
        raise HypothesisFailed("the smooth factor must be non-negative")
    prod = f * g
    slack = 1e-10 * max(1.0, float(np.abs(prod).max()))
    return bool(np.diff(prod).min() >= -slack)


# ---------------------------------------------------------------------------
# curvature concentration


def _node_branch(k: int) -> Tuple[Tuple[float, float], "callable", float]:
    radius = 0.8 / np.sqrt(k)
    center = (1.0 / np.sqrt(k), 0.0)

    def fn(s, t):
        z = s + 1j * t
        w = 1.0 / (k * z)
        return np.stack([w.real, w.imag], axis=-1)

    return center, fn, radius


def _critical_member(k: int) -> Tuple[Tuple[float, float], callable, float]:
    radius = 0.75 / k**2
    a = float(k * k)

    def fn(s, t):
        z = s + 1j * t
        w = a * z * z
        return np.stack([w.real, w.imag], axis=-1)

    return (0.0, 0.0), fn, radius


def curvature_threshold_experiment(
    family: str,
    radii,
    k_values,
    grid_rings: int = 32,
    ambient_scale: float = 1.0,
) -> ExperimentReport:
    """Empirical curvature-concentration threshold over a degenerating family.

    ``family`` selects the members: "node" takes the graphical branch of
    {z1 z2 = 1/k}, "critical" the graph of k^2 z^2 (the second factor of the
    degenerating parameterization), "plane" the flat plane (a vacuous
    control).  For each k the check locates the node of maximal |B|, keeps
    the radii whose trigger |B| >= 1/r fires and whose ball stays on the
    grid, and integrates |B|^2 over each ball.  The reported threshold is
    the infimum of those totals.  ``ambient_scale`` rescales the metric by
    its square (radii are then lengths in the rescaled metric), which must
    leave every total unchanged.
    """
    if family not in ("node", "critical", "plane"):
        raise ValueError(f"unknown member family {family!r}")
    m = G.flat_family(n=2, box_half=64.0)
    c = float(ambient_scale)
    if c != 1.0:
        m = G.rescale(m, c)
    radii = [float(r) for r in radii]
    totals = {}
    triggered = 0
    for k in k_values:
        if family == "plane":
            center, fn, radius = (0.0, 0.0), (lambda s, t: np.zeros(s.shape + (2,))), 0.5
        elif family == "node":
            center, fn, radius = _node_branch(int(k))
        else:
            center, fn, radius = _critical_member(int(k))
        h = radius / grid_rings
        phys_h = c * h
        u = S.graph_surface(m, fn, radius, h, center=center)
        cf = S.second_fundamental(u)
        mask = u.grid.public_mask() & u.grid.boundary_masks()["interior"]
        bn = np.where(mask, cf.B_norm, 0.0)
        if phys_h * float(bn.max()) > 0.2:
            raise UnresolvedCurvature("grid spacing does not resolve the curvature scale")
        star = np.unravel_index(int(bn.argmax()), bn.shape)
        b_star = float(bn[star])
        beta, _ = _beta_field(u, u.values[star])
        sg = S.surface_geometry(u)
        weights = _surface_weights(u, sg)
        span = _radial_span(beta)
        fits = float(beta[u.grid.boundary_masks()["arc"]].min()) - phys_h
        for r in radii:
            if b_star < 1.0 / r or r > fits:
                continue
            frac = np.clip(0.5 + (r - beta) / span, 0.0, 1.0)
            totals[(int(k), r)] = float((cf.B_norm**2 * frac * weights)[u.grid.public_mask()].sum())
            triggered += 1

    vacuous = triggered == 0
    hbar = min(totals.values()) if totals else 0.0
    top = max(totals.values()) if totals else 1.0
    measured = {"threshold": float(hbar), "triggered_balls": float(triggered)}
    if vacuous:
        measured["vacuous"] = 1.0
    for (k, r), v in sorted(totals.items()):
        measured[f"total_k{k}_r{r:.6g}"] = v
    return ExperimentReport(
        name="curvature-concentration-threshold",
        anchor="curvature-threshold",
        inputs_digest=digest_of(
            {
                "family": family,
                "radii": radii,
                "k": [int(k) for k in k_values],
                "rings": int(grid_rings),
                "scale": c,
            }
        ),
        measured=measured,
        bound={"threshold": 0.0},
        margin=float(hbar / top) if not vacuous else 0.0,
        passed=bool(vacuous or hbar > 0.0),
        grid={"rings": int(grid_rings), "family": family},
    )


def eps_regularity_check(
    u: S.GridImmersion,
    center: Tuple[int, int],
    r: float,
    hbar_candidate: float,
    c_sq: float = 1.0,
) -> ExperimentReport:
    """Small-total-curvature implies scaled pointwise curvature control.

    Evaluates the antecedent (the integral of |B|^2 over the radius-r ball
    at the marked node is at most the candidate threshold) and the
    consequent (sigma^2 sup over the shrunken ball of |B|^2 stays below
    c_sq on the sigma-grid of whole cells).  A false antecedent makes the
    implication vacuously true and is reported as such.
    """
    h = u.grid.h
    beta, _ = _beta_field(u, u.values[tuple(center)])
    sg = S.surface_geometry(u)
    weights = _surface_weights(u, sg)
    span = _radial_span(beta)
    mask = u.grid.public_mask()
    cf = S.second_fundamental(u)
    bsq = cf.B_norm**2

    frac = np.clip(0.5 + (r - beta) / span, 0.0, 1.0)
    total = float((bsq * frac * weights)[mask].sum())
    antecedent = total <= hbar_candidate

    worst = 0.0
    sigma = h
    while sigma <= r + 1e-15:
        zone = mask & (beta <= r - sigma)
        if zone.any():
            worst = max(worst, sigma * sigma * float(bsq[zone].max()))
        sigma += h
    vacuous = not antecedent
    passed = vacuous or worst <= c_sq
    return ExperimentReport(
        name="curvature-scale-regularity",
        anchor="eps-regularity",
        inputs_digest=digest_of(
            {
                "family": u.ambient.family, "r": u.grid.r, "h": h,
                "ball": float(r), "hbar": float(hbar_candidate), "c_sq": float(c_sq),
            }
        ),
        measured={
            "total_curvature": total,
            "sigma_scaled_sup": float(worst),
            "vacuous": 1.0 if vacuous else 0.0,
        },
        bound={"total_curvature": float(hbar_candidate), "sigma_scaled_sup": float(c_sq)},
        margin=float((c_sq - worst) / c_sq) if not vacuous else 0.0,
        passed=bool(passed),
        grid={"r": u.grid.r, "h": h, "ball": float(r)},
    )


# ---------------------------------------------------------------------------
# unit-scale graph certificates


def local_graph_certificates(u: S.GridImmersion, center: Tuple[int, int] = (0, 0)) -> ExperimentReport:
    """Graphical-patch bounds after rescaling the metric to unit curvature.

    Rescales so sup|B| = 1 (no-op on curvature-free surfaces), then measures
    on the patch of rescaled radius at most 1 around the center node:
    gradient smallness, induced-metric eigenvalue comparability with the
    flat chart, the rescaled second-derivative bound, and intrinsic-versus-
    chart distance comparability with the half-radius inclusion.  Distances
    run along straight chart chords with the metric sampled by splines.
    """
    from scipy.interpolate import RectBivariateSpline

    grid = u.grid
    cf = S.second_fundamental(u)
    mask = grid.public_mask()
    inner = mask & grid.boundary_masks()["interior"]
    c = float(cf.B_norm[inner].max())
    if c < 1e-12:
        c = 1.0

    beta, _ = _beta_field(u, u.values[tuple(center)])
    arc_min = float(beta[grid.boundary_masks()["arc"] & mask].min())
    avail = c * (arc_min - grid.h)
    if avail < 0.5:
        raise PatchTooSmall("rescaled grid radius is below the certificate scale")
    r_patch = min(1.0, avail)
    patch = mask & (c * beta <= r_patch)

    sg = S.surface_geometry(u)
    jac = sg.du[..., :, 2:]
    grad_sup = float(np.sqrt(np.linalg.eigvalsh(
        np.einsum("...iw,...jw->...ij", jac, jac))[..., -1])[patch].max())

    eigs = np.linalg.eigvalsh(sg.gamma)
    met_low = float(eigs[..., 0][patch].min())
    met_high = float(eigs[..., 1][patch].max())

    d2_fiber = sg.d2u[..., 2:]
    d2_sup = float(np.sqrt((d2_fiber**2).sum((-1, -2, -3)))[patch].max()) / c

    # chord-path distances: integrate sqrt(v^T gamma v) along straight chart
    # segments from the center, gamma sampled on splines over the polar table
    nodes = grid.nodes()
    p0 = nodes[tuple(center)]
    rho_ax = np.arange(grid.n_rings + 1) * grid.h
    th_ax = np.arange(-3, grid.n_theta + 4) * grid.dtheta
    wrap = lambda a: np.concatenate([a[:, -3:], a, a[:, :4]], axis=1)
    spl = [
        [RectBivariateSpline(rho_ax, th_ax, wrap(sg.gamma[..., i, j]), kx=3, ky=3) for j in range(2)]
        for i in range(2)
    ]
    sel = patch & (beta > 4.0 * grid.h)
    targets = nodes[sel]
    seg = targets - p0
    chord = np.sqrt((seg**2).sum(-1))
    samples = 9
    ts = (np.arange(samples) + 0.5) / samples
    pts = p0 + ts[None, :, None] * seg[:, None, :]
    rho_s = np.sqrt((pts**2).sum(-1))
    th_s = np.mod(np.arctan2(pts[..., 1], pts[..., 0]), 2.0 * np.pi)
    gam_s = np.empty(pts.shape[:-1] + (2, 2))
    for i in range(2):
        for j in range(2):
            gam_s[..., i, j] = spl[i][j].ev(rho_s, th_s)
    v = seg[:, None, :] / np.maximum(chord[:, None, None], 1e-300)
    speed = np.sqrt(np.maximum(np.einsum("nsi,nsij,nsj->ns", v, gam_s, v), 0.0))
    dist = speed.mean(axis=1) * chord
    ratios = dist / np.maximum(chord, 1e-300)
    if ratios.size == 0:
        raise PatchTooSmall("no patch nodes beyond the center cells")
    ratio_low = float(ratios.min())
    ratio_high = float(ratios.max())

    half_zone = sel & (c * beta <= 0.5 * r_patch)
    if half_zone.any():
        idx = half_zone[sel]
        incl_sup = float((c * dist[idx]).max())
    else:
        incl_sup = 0.0

    measured = {
        "gradient_sup": grad_sup,
        "metric_eig_low": met_low,
        "metric_eig_high": met_high,
        "second_deriv_sup": d2_sup,
        "distance_ratio_low": ratio_low,
        "distance_ratio_high": ratio_high,
        "half_ball_intrinsic_sup": incl_sup,
    }
    bound = {
        "gradient_sup": 1.0,
        "metric_eig_low": 0.5,
        "metric_eig_high": 2.0,
        "second_deriv_sup": 2.0,
        "distance_ratio_low": 0.5,
        "distance_ratio_high": 2.0,
        "half_ball_intrinsic_sup": r_patch,
    }
    checks = [
        (1.0 - grad_sup) / 1.0,
        (met_low - 0.5) / 0.5,
        (2.0 - met_high) / 2.0,
        (2.0 - d2_sup) / 2.0,
        (ratio_low - 0.5) / 0.5,
        (2.0 - ratio_high) / 2.0,
        (r_patch - incl_sup) / r_patch,
    ]
    return ExperimentReport(
        name="unit-scale-graph-certificates",
        anchor="local-graphs",
        inputs_digest=digest_of(
            {
                "family": u.ambient.family, "r": grid.r, "h": grid.h,
                "center": [int(center[0]), int(center[1])], "scale": c,
            }
        ),
        measured=measured,
        bound=bound,
        margin=float(min(checks)),
        passed=bool(min(checks) >= 0.0),
        grid={
            "r": grid.r, "h": grid.h, "patch_radius": float(r_patch),
            "shape": "half-disc" if grid.half else "disc",
        },
    )
