"""Discrete differential geometry of graphical immersions.

Surfaces live on a polar grid over a disc (or half-disc): a pole node plus
rings of equally spaced angles, uniform in index space.  Every per-node
field is stored padded as ``(n_rings + 1, n_theta, ...)`` with row 0 holding
the pole value replicated across the angle axis, which lets ring 1 use
ordinary central stencils through the pole.  Derivatives are converted to
Cartesian (s, t) components by the polar chain rule; the pole itself gets
direct symmetric Cartesian stencils through ring-1 nodes at the axis and
diagonal angles (the angle count is always a multiple of 8).

Half-disc surfaces keep a full parity-symmetrized backing disc: components
with even storage index are even under t -> -t and odd-index components are
odd, mirroring the reflection that fixes the flat model plane.  Operators
run on the backing disc; public accessors restrict to the upper half.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import geometry as G
from .errors import (
    DegenerateMetric,
    EmptyRegion,
    LeftDomain,
    NotImmersed,
    ParseError,
)

TOL_IMM = 1e-6


def ring_count(r: float, h: float) -> int:
    n = int(round(r / h))
    if abs(n * h - r) > 1e-9 * max(1.0, r):
        raise ValueError("radius must be an integer number of ring spacings")
    if n < 4:
        raise ValueError("need at least 4 rings for the boundary stencils")
    return n


def theta_count(r: float, h: float) -> int:
    """Angles per ring: multiple of 8, matched to the ring spacing."""
    return 8 * max(1, int(round(np.pi * r / (4.0 * h))))


@dataclass(frozen=True)
class PolarGrid:
    """Node layout of a disc (or half-disc) surface grid."""

    r: float
    h: float
    center: tuple = (0.0, 0.0)
    half: bool = False
    n_rings: int = field(init=False)
    n_theta: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "n_rings", ring_count(self.r, self.h))
        object.__setattr__(self, "n_theta", theta_count(self.r, self.h))
        if self.half and self.center[1] != 0.0:
            raise ValueError("half-disc grids sit on the t = 0 line")

    @property
    def dtheta(self) -> float:
        return 2.0 * np.pi / self.n_theta

    def trig(self):
        """(cos, sin) tables with exact mirror symmetry about the t = 0 line."""
        nt = self.n_theta
        th = np.arange(nt // 2 + 1) * self.dtheta
        c = np.cos(th)
        s = np.sin(th)
        s[0] = 0.0
        s[nt // 2] = 0.0
        cos_t = np.empty(nt)
        sin_t = np.empty(nt)
        cos_t[: nt // 2 + 1] = c
        sin_t[: nt // 2 + 1] = s
        cos_t[nt // 2 + 1:] = c[1: nt // 2][::-1]
        sin_t[nt // 2 + 1:] = -s[1: nt // 2][::-1]
        return cos_t, sin_t

    def nodes(self) -> np.ndarray:
        """Padded (s, t) coordinates, shape (n_rings + 1, n_theta, 2)."""
        cos_t, sin_t = self.trig()
        rho = np.arange(self.n_rings + 1) * self.h
        s = self.center[0] + rho[:, None] * cos_t
        t = self.center[1] + rho[:, None] * sin_t
        return np.stack([s, t], axis=-1)

    def cell_areas(self) -> np.ndarray:
        """Per-node cell areas of the full disc, padded layout."""
        w = np.empty((self.n_rings + 1, self.n_theta))
        rho = np.arange(self.n_rings + 1) * self.h
        w[1:-1] = (rho[1:-1, None] * self.h) * self.dtheta
        w[-1] = (self.r * self.h / 2.0 - self.h**2 / 8.0) * self.dtheta
        w[0] = np.pi * (self.h / 2.0) ** 2 / self.n_theta  # shared pole cell
        return w

    def public_mask(self) -> np.ndarray:
        """Nodes the surface exposes (upper half only for half-discs)."""
        mask = np.ones((self.n_rings + 1, self.n_theta), dtype=bool)
        mask[0, 1:] = False  # the pole is one node
        if self.half:
            mask[:, self.n_theta // 2 + 1:] = False
        return mask

    def half_weights(self) -> np.ndarray:
        """Cell areas restricted to the upper half (edge cells halved)."""
        if not self.half:
            raise ValueError("half weights only exist for half-disc grids")
        w = self.cell_areas().copy()
        w[0, 0] = np.pi * (self.h / 2.0) ** 2 / 2.0  # half pole cell
        w[0, 1:] = 0.0
        w[1:, 0] *= 0.5
        w[1:, self.n_theta // 2] *= 0.5
        w[:, self.n_theta // 2 + 1:] = 0.0
        return w

    def boundary_masks(self) -> dict:
        """Node tags over the padded layout: interior, arc, segment."""
        nt = self.n_theta
        arc = np.zeros((self.n_rings + 1, nt), dtype=bool)
        arc[-1] = True
        seg = np.zeros_like(arc)
        if self.half:
            seg[:-1, 0] = True
            seg[1:-1, nt // 2] = True
        interior = ~(arc | seg)
        interior[0, 1:] = False
        if self.half:
            interior[:, nt // 2 + 1:] = False
            arc[:, nt // 2 + 1:] = False
        return {"interior": interior, "arc": arc, "segment": seg}


def parity_signs(dim: int) -> np.ndarray:
    """Reflection signs under t -> -t: even storage index +1, odd -1."""
    signs = np.ones(dim)
    signs[1::2] = -1.0
    return signs


def symmetrize_half(grid: PolarGrid, vals: np.ndarray) -> np.ndarray:
    """Average a backing-disc field with its reflection, making parity exact."""
    nt = grid.n_theta
    j_ref = (-np.arange(nt)) % nt
    signs = parity_signs(vals.shape[-1])
    return 0.5 * (vals + vals[:, j_ref, :] * signs)


# ---------------------------------------------------------------------------
# derivative engine


def _theta_derivatives(vals: np.ndarray, nt: int):
    """Spectral per-ring angle derivatives (exact on resolved trig modes).

    Angle stencils of any fixed order leave truncation whose amplitude does
    not decay toward the pole, and the polar chain rule divides it by rho
    and rho squared; differentiating in Fourier space removes that failure
    channel entirely for smooth fields.
    """
    spec = np.fft.rfft(vals, axis=1)
    k = np.arange(nt // 2 + 1, dtype=float).reshape((1, -1) + (1,) * (vals.ndim - 2))
    k1 = k.copy()
    k1[0, -1] = 0.0  # odd derivative has no consistent Nyquist convention
    f_th = np.fft.irfft(spec * (1j * k1), n=nt, axis=1)
    f_thth = np.fft.irfft(spec * (-(k**2)), n=nt, axis=1)
    return f_th, f_thth


def grid_derivatives(grid: PolarGrid, vals: np.ndarray):
    """First and second Cartesian derivatives of a padded per-node field.

    Returns (d1, d2): d1[..., i, :] is the derivative along s (i = 0) and
    t (i = 1); d2[..., i, j, :] the second derivatives.  Angle derivatives
    are spectral; radial first derivatives are 4th-order central, reaching
    through the pole onto the opposite ray near it (the chain rule divides
    them by rho, which would otherwise cost an order there); radial second
    derivatives are central with a one-sided outer ring; the pole itself
    uses direct symmetric Cartesian stencils along the axis rays, 4th order
    for first derivatives so derived fields carry no O(h^2) bias there.
    """
    vals = np.asarray(vals, dtype=float)
    squeeze = vals.ndim == 2
    if squeeze:
        vals = vals[..., None]
    nr, nt, k = vals.shape[0] - 1, vals.shape[1], vals.shape[2]
    h = grid.h
    cos_t, sin_t = grid.trig()

    # rows at rho = -h, -2h: the opposite ray through the pole
    ext = np.concatenate(
        [
            np.roll(vals[2], -nt // 2, axis=0)[None],
            np.roll(vals[1], -nt // 2, axis=0)[None],
            vals,
        ],
        axis=0,
    )
    f_r = np.empty_like(vals)
    core = (ext[:-4] - 8.0 * ext[1:-3] + 8.0 * ext[3:-1] - ext[4:]) / (12.0 * h)
    f_r[0] = core[0]  # radial directional derivative at the pole, per ray
    f_r[1:-2] = core[1:]
    f_r[-2] = (
        -vals[-5] + 6.0 * vals[-4] - 18.0 * vals[-3] + 10.0 * vals[-2] + 3.0 * vals[-1]
    ) / (12.0 * h)
    f_r[-1] = (
        3.0 * vals[-5] - 16.0 * vals[-4] + 36.0 * vals[-3] - 48.0 * vals[-2]
        + 25.0 * vals[-1]
    ) / (12.0 * h)

    f_rr = np.empty_like(vals)
    f_rr[1:-1] = (vals[2:] - 2.0 * vals[1:-1] + vals[:-2]) / h**2
    f_rr[-1] = (2.0 * vals[-1] - 5.0 * vals[-2] + 4.0 * vals[-3] - vals[-4]) / h**2

    f_th, f_thth = _theta_derivatives(vals, nt)
    f_rth, _ = _theta_derivatives(f_r, nt)

    rho = (np.arange(nr + 1) * h)[1:, None, None]
    c = cos_t[None, :, None]
    s = sin_t[None, :, None]
    ur, urr = f_r[1:], f_rr[1:]
    uth, uthth, urth = f_th[1:], f_thth[1:], f_rth[1:]

    d1 = np.empty((nr + 1, nt, 2, k))
    d2 = np.empty((nr + 1, nt, 2, 2, k))
    d1[1:, :, 0] = c * ur - s / rho * uth
    d1[1:, :, 1] = s * ur + c / rho * uth
    d2[1:, :, 0, 0] = (
        c**2 * urr - 2.0 * s * c / rho * urth + s**2 / rho**2 * uthth
        + s**2 / rho * ur + 2.0 * s * c / rho**2 * uth
    )
    d2[1:, :, 1, 1] = (
        s**2 * urr + 2.0 * s * c / rho * urth + c**2 / rho**2 * uthth
        + c**2 / rho * ur - 2.0 * s * c / rho**2 * uth
    )
    d2[1:, :, 0, 1] = (
        s * c * urr + (c**2 - s**2) / rho * urth - s * c / rho**2 * uthth
        - s * c / rho * ur + (s**2 - c**2) / rho**2 * uth
    )
    d2[1:, :, 1, 0] = d2[1:, :, 0, 1]

    # pole: symmetric Cartesian stencils along the axis rays; first
    # derivatives at 4th order so pole values of derived fields carry no
    # O(h^2) bias (second differences of those fields would inherit it)
    q = nt // 4
    e = nt // 8
    p0 = vals[0, 0]
    r1 = vals[1]
    r2 = vals[2]
    ps = (-r2[0] + 8.0 * r1[0] - 8.0 * r1[2 * q] + r2[2 * q]) / (12.0 * h)
    pt = (-r2[q] + 8.0 * r1[q] - 8.0 * r1[3 * q] + r2[3 * q]) / (12.0 * h)
    pss = (r1[0] - 2.0 * p0 + r1[2 * q]) / h**2
    ptt = (r1[q] - 2.0 * p0 + r1[3 * q]) / h**2
    pst = (r1[e] - r1[3 * e] + r1[5 * e] - r1[7 * e]) / (2.0 * h**2)
    d1[0, :, 0] = ps
    d1[0, :, 1] = pt
    d2[0, :, 0, 0] = pss
    d2[0, :, 1, 1] = ptt
    d2[0, :, 0, 1] = pst
    d2[0, :, 1, 0] = pst

    if squeeze:
        return d1[..., 0], d2[..., 0]
    return d1, d2


# ---------------------------------------------------------------------------
# surfaces


@dataclass(frozen=True)
class GridImmersion:
    """A surface sampled on a polar grid inside an ambient chart.

    ``values`` uses the padded layout; for graphical surfaces the first two
    components equal the node coordinates exactly.  Values are immutable
    after construction, so every measurement below is a pure function.
    """

    grid: PolarGrid
    ambient: G.ChartManifold
    values: np.ndarray
    graphical: bool = True

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if vals.shape != (self.grid.n_rings + 1, self.grid.n_theta, self.ambient.dim):
            raise ValueError("values do not match the grid layout")
        if np.abs(vals[0] - vals[0, 0]).max() != 0.0:
            raise ValueError("pole row must be replicated exactly")
        if self.graphical:
            nodes = self.grid.nodes()
            if np.abs(vals[..., :2] - nodes).max() != 0.0:
                raise NotImmersed("graphical surface must carry the node coordinates")
        # margin 2x: every measurement below differentiates ambient fields
        if not self.ambient.domain.contains(vals, 2.0 * self.ambient.deriv_margin()).all():
            raise LeftDomain("surface values leave the ambient chart box")

    @property
    def pole(self) -> np.ndarray:
        return self.values[0, 0]

    def with_values(self, vals: np.ndarray) -> "GridImmersion":
        return GridImmersion(self.grid, self.ambient, vals, graphical=self.graphical)

    def boundary_masks(self) -> dict:
        return self.grid.boundary_masks()


def graph_surface(
    ambient: G.ChartManifold,
    fn: Callable,
    r: float,
    h: float,
    center: tuple = (0.0, 0.0),
    half: bool = False,
) -> GridImmersion:
    """Graphical surface x = (s, t, fn(s, t)) over a disc or half-disc.

    ``fn`` maps coordinate arrays (s, t) to the trailing ambient components,
    shape (..., dim - 2).  Half-disc graphs are parity-symmetrized exactly.
    """
    grid = PolarGrid(r, h, center, half)
    nodes = grid.nodes()
    w = np.asarray(fn(nodes[..., 0], nodes[..., 1]), dtype=float)
    vals = np.concatenate([nodes, w], axis=-1)
    vals[0] = vals[0, 0]
    if half:
        vals = symmetrize_half(grid, vals)
    return GridImmersion(grid, ambient, vals)


def holomorphic_graph(coeffs: dict) -> Callable:
    """Graph map of a polynomial w(z) = sum coeffs[k] z^k (complex values)."""

    def fn(s, t):
        z = s + 1j * t
        w = np.zeros_like(z)
        for k, a in coeffs.items():
            w = w + a * z**k
        return np.stack([w.real, w.imag], axis=-1)

    return fn


def sphere_patch(
    ambient: G.ChartManifold, rho_s: float, r: float, h: float
) -> GridImmersion:
    """Geodesic polar patch of a round 2-sphere of radius rho_s (test path).

    The patch is not graphical: the grid coordinates are geodesic polar
    parameters, and the surface sits in the (x1, x2, x3) hyperplane.
    """
    if ambient.dim < 3:
        raise ValueError("sphere patch needs at least three ambient coordinates")
    grid = PolarGrid(r, h)
    nodes = grid.nodes()
    q = np.sqrt((nodes**2).sum(-1))
    with np.errstate(invalid="ignore", divide="ignore"):
        direction = np.where(q[..., None] > 0, nodes / np.maximum(q[..., None], 1e-300), 0.0)
    lat = q / rho_s
    vals = np.zeros(nodes.shape[:-1] + (ambient.dim,))
    vals[..., :2] = rho_s * np.sin(lat)[..., None] * direction
    vals[..., 2] = rho_s * (1.0 - np.cos(lat))
    vals[0] = vals[0, 0]
    return GridImmersion(grid, ambient, vals, graphical=False)


# ---------------------------------------------------------------------------
# measurement bundle shared by the operators


@dataclass(frozen=True)
class SurfaceGeometry:
    """Per-node first-order data every curvature operator starts from."""

    du: np.ndarray        # (..., 2, dim) coordinate tangent vectors
    d2u: np.ndarray       # (..., 2, 2, dim)
    g: np.ndarray         # ambient metric at the nodes
    gamma: np.ndarray     # induced metric, (..., 2, 2)
    gamma_inv: np.ndarray
    sqrt_det: np.ndarray
    frame: np.ndarray     # (..., 2, dim): g-orthonormal tangent frame


def _tangent_frame(du: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    e1 = du[..., 0, :] / np.sqrt(gamma[..., 0, 0])[..., None]
    v = du[..., 1, :] - (gamma[..., 0, 1] / gamma[..., 0, 0])[..., None] * du[..., 0, :]
    v_norm2 = gamma[..., 1, 1] - gamma[..., 0, 1] ** 2 / gamma[..., 0, 0]
    e2 = v / np.sqrt(v_norm2)[..., None]
    return np.stack([e1, e2], axis=-2)


def surface_geometry(u: GridImmersion) -> SurfaceGeometry:
    du, d2u = grid_derivatives(u.grid, u.values)
    g = u.ambient.metric(u.values)
    gamma = np.einsum("...ia,...ab,...jb->...ij", du, g, du)
    det = gamma[..., 0, 0] * gamma[..., 1, 1] - gamma[..., 0, 1] ** 2
    if det.min() < TOL_IMM:
        raise DegenerateMetric(f"induced metric determinant fell to {det.min():.3g}")
    gamma_inv = np.empty_like(gamma)
    gamma_inv[..., 0, 0] = gamma[..., 1, 1] / det
    gamma_inv[..., 1, 1] = gamma[..., 0, 0] / det
    gamma_inv[..., 0, 1] = -gamma[..., 0, 1] / det
    gamma_inv[..., 1, 0] = -gamma[..., 0, 1] / det
    frame = _tangent_frame(du, gamma)
    return SurfaceGeometry(du, d2u, g, gamma, gamma_inv, np.sqrt(det), frame)


def induced_metric(u: GridImmersion):
    """Per-node induced metric, its inverse, and area density."""
    sg = surface_geometry(u)
    return sg.gamma, sg.gamma_inv, sg.sqrt_det


def _normal_projection(sg: SurfaceGeometry, vec: np.ndarray) -> np.ndarray:
    """Remove the tangential part of ambient vectors (last axis), batched."""
    rhs = np.einsum("...ia,...ab,...b->...i", sg.du, sg.g, vec)
    coeff = np.einsum("...ij,...j->...i", sg.gamma_inv, rhs)
    return vec - np.einsum("...i,...ia->...a", coeff, sg.du)


def dbar_residual(u: GridImmersion) -> np.ndarray:
    """Per-node norm of the normal part of J applied to the tangent frame."""
    sg = surface_geometry(u)
    j = u.ambient.j(u.values)
    je = np.einsum("...ab,...ib->...ia", j, sg.frame)
    perp = np.stack(
        [_normal_projection(sg, je[..., 0, :]), _normal_projection(sg, je[..., 1, :])],
        axis=-2,
    )
    sq = np.einsum("...ia,...ab,...ib->...i", perp, sg.g, perp)
    return np.sqrt(np.maximum(sq.sum(-1), 0.0))


def _normal_frame(sg: SurfaceGeometry, dim: int) -> np.ndarray:
    """Deterministic g-orthonormal frame of the normal bundle, (..., dim-2, dim).

    Per-node pivoted Gram-Schmidt on the projected coordinate basis: the
    pivot always has squared norm >= (remaining normal dimensions) / dim, so
    the construction never degenerates on an immersed surface.
    """
    eye = np.eye(dim)
    cand = np.broadcast_to(eye, sg.du.shape[:-2] + (dim, dim)).copy()
    rhs = np.einsum("...ia,...ab,...mb->...mi", sg.du, sg.g, cand)
    coeff = np.einsum("...ij,...mj->...mi", sg.gamma_inv, rhs)
    cand = cand - np.einsum("...mi,...ia->...ma", coeff, sg.du)
    out = []
    for _ in range(dim - 2):
        n2 = np.einsum("...ma,...ab,...mb->...m", cand, sg.g, cand)
        pick = n2.argmax(axis=-1)
        w = np.take_along_axis(cand, pick[..., None, None], axis=-2)[..., 0, :]
        w = w / np.sqrt(np.take_along_axis(n2, pick[..., None], axis=-1))
        inner = np.einsum("...a,...ab,...mb->...m", w, sg.g, cand)
        cand = cand - inner[..., None] * w[..., None, :]
        out.append(w)
    return np.stack(out, axis=-2)


@dataclass(frozen=True)
class CurvatureField:
    """Second-order measurements of an immersed surface."""

    B: np.ndarray          # (..., 2, 2, dim) in the orthonormal tangent frame
    B_norm: np.ndarray
    A_norm: np.ndarray
    H: np.ndarray          # (..., dim) mean curvature vector
    H_norm: np.ndarray
    K_gauss: Optional[np.ndarray] = None
    gradB_norm: Optional[np.ndarray] = None


def second_fundamental(u: GridImmersion, frame_angle: float = 0.0) -> CurvatureField:
    """Normal-valued second fundamental form and its two norm routes.

    ``frame_angle`` rotates the orthonormal tangent frame (the norms and the
    mean curvature vector must not notice).
    """
    sg = surface_geometry(u)
    m = u.ambient
    gam_amb = G.christoffel(m, u.values, check=False)
    W = sg.d2u + np.einsum("...mab,...ia,...jb->...ijm", gam_amb, sg.du, sg.du)
    rhs = np.einsum("...ijm,...mn,...kn->...ijk", W, sg.g, sg.du)
    coeff = np.einsum("...kl,...ijl->...ijk", sg.gamma_inv, rhs)
    B_coord = W - np.einsum("...ijk,...ka->...ija", coeff, sg.du)

    frame = sg.frame
    if frame_angle:
        ca, sa = np.cos(frame_angle), np.sin(frame_angle)
        frame = np.stack(
            [ca * frame[..., 0, :] + sa * frame[..., 1, :],
             -sa * frame[..., 0, :] + ca * frame[..., 1, :]],
            axis=-2,
        )
    # frame components of coordinate vectors: e_a = P[..., a, i] du_i
    P = np.einsum("...ia,...ab,...jb->...ij", frame, sg.g, sg.du)
    P = np.einsum("...ij,...jk->...ik", P, sg.gamma_inv)
    B = np.einsum("...ai,...bj,...ijm->...abm", P, P, B_coord)
    B_norm = np.sqrt(np.einsum("...abm,...mn,...abn->...", B, sg.g, B))

    normals = _normal_frame(sg, m.dim)
    comp = np.einsum("...wm,...mn,...abn->...wab", normals, sg.g, B)
    A_norm = np.sqrt((comp**2).sum((-1, -2, -3)))

    H = B[..., 0, 0, :] + B[..., 1, 1, :]
    H_norm = np.sqrt(np.einsum("...m,...mn,...n->...", H, sg.g, H))
    return CurvatureField(B=B, B_norm=B_norm, A_norm=A_norm, H=H, H_norm=H_norm)


def mean_curvature(u: GridImmersion) -> np.ndarray:
    return second_fundamental(u).H


def mc_residual(u: GridImmersion) -> np.ndarray:
    """Per-node distance between the mean curvature vector and the ambient
    structure-torsion trace over the tangent frame."""
    sg = surface_geometry(u)
    cf = second_fundamental(u)
    q = G.q_tensor(u.ambient, u.values)
    tr = sum(
        np.einsum("...mab,...a,...b->...m", q, sg.frame[..., i, :], sg.frame[..., i, :])
        for i in range(2)
    )
    diff = cf.H - tr
    return np.sqrt(np.einsum("...m,...mn,...n->...", diff, sg.g, diff))


def gauss_curvature(u: GridImmersion) -> np.ndarray:
    """Intrinsic curvature of the induced metric via its coordinate derivatives."""
    sg = surface_geometry(u)
    E, F, Gc = sg.gamma[..., 0, 0], sg.gamma[..., 0, 1], sg.gamma[..., 1, 1]
    dE, d2E = grid_derivatives(u.grid, E)
    dF, d2F = grid_derivatives(u.grid, F)
    dG, d2G = grid_derivatives(u.grid, Gc)
    m1 = np.stack(
        [
            np.stack(
                [
                    -0.5 * d2E[..., 1, 1] + d2F[..., 0, 1] - 0.5 * d2G[..., 0, 0],
                    0.5 * dE[..., 0],
                    dF[..., 0] - 0.5 * dE[..., 1],
                ],
                axis=-1,
            ),
            np.stack([dF[..., 1] - 0.5 * dG[..., 0], E, F], axis=-1),
            np.stack([0.5 * dG[..., 1], F, Gc], axis=-1),
        ],
        axis=-2,
    )
    m2 = np.stack(
        [
            np.stack([np.zeros_like(E), 0.5 * dE[..., 1], 0.5 * dG[..., 0]], axis=-1),
            np.stack([0.5 * dE[..., 1], E, F], axis=-1),
            np.stack([0.5 * dG[..., 0], F, Gc], axis=-1),
        ],
        axis=-2,
    )
    det = (E * Gc - F**2) ** 2
    return (np.linalg.det(m1) - np.linalg.det(m2)) / det


def gauss_defect(u: GridImmersion) -> np.ndarray:
    """Pointwise failure of the curvature relation tying K to the ambient
    sectional curvature and the second fundamental form."""
    sg = surface_geometry(u)
    cf = second_fundamental(u)
    K = gauss_curvature(u)
    k_amb = G.sectional(u.ambient, u.values, sg.frame[..., 0, :], sg.frame[..., 1, :])
    b11_b22 = np.einsum("...m,...mn,...n->...", cf.B[..., 0, 0, :], sg.g, cf.B[..., 1, 1, :])
    b12_sq = np.einsum("...m,...mn,...n->...", cf.B[..., 0, 1, :], sg.g, cf.B[..., 0, 1, :])
    return np.abs(k_amb - K + b11_b22 - b12_sq)


# ---------------------------------------------------------------------------
# integration


def integrate(u: GridImmersion, f=None, region: Optional[np.ndarray] = None) -> float:
    """Surface integral of a per-node field over a node subset.

    ``f`` defaults to 1 (area); ``region`` is a boolean padded mask (default:
    all public nodes).  Cell areas follow the polar layout with half-width
    outer ring cells; half-disc grids halve the straight-edge cells.
    """
    sg = surface_geometry(u)
    w = u.grid.half_weights() if u.grid.half else u.grid.cell_areas()
    mask = u.grid.public_mask() if region is None else np.asarray(region, dtype=bool)
    mask = mask & u.grid.public_mask()
    if not mask.any():
        raise EmptyRegion("no nodes selected for integration")
    vals = np.ones_like(sg.sqrt_det) if f is None else np.asarray(f, dtype=float)
    if not u.grid.half:
        # the pole cell is one node: count its whole weight there
        w = w.copy()
        w[0, 1:] = 0.0
        w[0, 0] *= u.grid.n_theta
    contrib = vals * sg.sqrt_det * w
    return float(contrib[mask].sum())


# ---------------------------------------------------------------------------
# surface Laplacian (conservative flux form in polar index space)


def _flux_assembly(u: GridImmersion, f: np.ndarray):
    """Half-integer-position fluxes of the divergence-form surface Laplacian.

    Works in polar index coordinates, where every node cell is the same
    h x dtheta rectangle; the polar-index metric density already carries the
    rho factor.  Returns (flux_r, flux_t, root, pole_area, sg): flux_r[i] is
    the radial flux density through the interface between rings i and i + 1.
    """
    f = np.asarray(f, dtype=float)
    sg = surface_geometry(u)
    grid = u.grid
    h, dth = grid.h, grid.dtheta
    nr, nt = grid.n_rings, grid.n_theta
    cos_t, sin_t = grid.trig()

    # polar-index components of the induced metric: tilde(gamma) = T^t gamma T
    rho = (np.arange(nr + 1) * h)[:, None]
    T = np.empty((nr + 1, nt, 2, 2))
    T[..., 0, 0] = cos_t[None, :]
    T[..., 0, 1] = -rho * sin_t[None, :]
    T[..., 1, 0] = sin_t[None, :]
    T[..., 1, 1] = rho * cos_t[None, :]
    gt = np.einsum("...ai,...ab,...bj->...ij", T, sg.gamma, T)
    det = gt[..., 0, 0] * gt[..., 1, 1] - gt[..., 0, 1] ** 2
    # the polar frame degenerates at the pole; row 0 never feeds a flux
    det[0] = 1.0
    root = np.sqrt(np.maximum(det, 0.0))
    a_rr = root * gt[..., 1, 1] / det
    a_rt = -root * gt[..., 0, 1] / det
    a_tt = root * gt[..., 0, 0] / det

    f_th = (np.roll(f, -1, axis=1) - np.roll(f, 1, axis=1)) / (2.0 * dth)

    # radial fluxes between ring i and i + 1 (i = 0 .. nr - 1)
    mid_rr = 0.5 * (a_rr[:-1] + a_rr[1:])
    mid_rt = 0.5 * (a_rt[:-1] + a_rt[1:])
    mid_fth = 0.5 * (f_th[:-1] + f_th[1:])
    flux_r = mid_rr * (f[1:] - f[:-1]) / h + mid_rt * mid_fth
    # pole interface: the index-metric density vanishes linearly at rho = 0,
    # so its midpoint value is half the ring-1 value
    flux_r[0] = 0.5 * a_rr[1] * (f[1] - f[0]) / h + 0.5 * a_rt[1] * f_th[1]

    # angular fluxes between j and j + 1 at each ring
    mid_tt = 0.5 * (a_tt + np.roll(a_tt, -1, axis=1))
    mid_tr = 0.5 * (a_rt + np.roll(a_rt, -1, axis=1))
    f_r = np.empty_like(f)
    f_r[1:-1] = (f[2:] - f[:-2]) / (2.0 * h)
    f_r[0] = 0.0  # only feeds the unused ring-0 angular flux
    f_r[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * h)
    mid_fr = 0.5 * (f_r + np.roll(f_r, -1, axis=1))
    flux_t = mid_tt * (np.roll(f, -1, axis=1) - f) / dth + mid_tr * mid_fr

    pole_area = np.pi * (h / 2.0) ** 2 * sg.sqrt_det[0, 0]
    return flux_r, flux_t, root, pole_area, sg


def laplace_beltrami(u: GridImmersion, f: np.ndarray) -> np.ndarray:
    """Divergence-form surface Laplacian of a padded scalar field.

    Fluxes sit at half-integer ring and angle positions, so integrating the
    result over the nodes inside any ring interface telescopes to the flux
    through that interface (discrete divergence theorem).  The pole value is
    the net flux out of the pole cell over its metric area; the outer ring
    has no complete stencil and copies the adjacent ring.
    """
    flux_r, flux_t, root, pole_area, _ = _flux_assembly(u, f)
    grid = u.grid
    h, dth = grid.h, grid.dtheta
    out = np.zeros((grid.n_rings + 1, grid.n_theta))
    div_r = (flux_r[1:] - flux_r[:-1]) / h
    div_t = (flux_t - np.roll(flux_t, 1, axis=1)) / dth
    out[1:-1] = (div_r + div_t[1:-1]) / root[1:-1]
    out[0] = (flux_r[0] * dth).sum() / pole_area
    out[-1] = out[-2]
    return out


def divergence_defect(u: GridImmersion, f: np.ndarray) -> float:
    """|integral of the Laplacian inside the outer interface - its flux|.

    Integration runs through the public quadrature weights while the flux
    comes from the half-integer interface, so this measures how conservative
    the assembled operator actually is.  Full-disc surfaces only.
    """
    if u.grid.half:
        raise ValueError("the flux balance check runs on full-disc surfaces")
    lap = laplace_beltrami(u, f)
    masks = u.grid.boundary_masks()
    total = integrate(u, lap, region=masks["interior"])
    flux_r, _, _, _, _ = _flux_assembly(u, f)
    return abs(total - (flux_r[-1] * u.grid.dtheta).sum())


# ---------------------------------------------------------------------------
# covariant derivative of the second fundamental form


def grad_B_norm(u: GridImmersion):
    """Per-node norm of the covariant derivative of the second fundamental
    form, returned as (direct norm, duality-route norm)."""
    sg = surface_geometry(u)
    m = u.ambient
    gam_amb = G.christoffel(m, u.values, check=False)
    W = sg.d2u + np.einsum("...mab,...ia,...jb->...ijm", gam_amb, sg.du, sg.du)
    rhs = np.einsum("...ijm,...mn,...kn->...ijk", W, sg.g, sg.du)
    T = np.einsum("...kl,...ijl->...ijk", sg.gamma_inv, rhs)  # surface connection
    B_coord = W - np.einsum("...ijk,...ka->...ija", T, sg.du)

    nr, nt = u.grid.n_rings, u.grid.n_theta
    dim = m.dim
    flat = B_coord.reshape(nr + 1, nt, 4 * dim)
    dB, _ = grid_derivatives(u.grid, flat)
    dB = dB.reshape(nr + 1, nt, 2, 2, 2, dim)  # (..., c, i, j, mu)

    amb_corr = np.einsum("...mab,...ca,...ijb->...cijm", gam_amb, sg.du, B_coord)
    lower = np.einsum("...cik,...kjm->...cijm", T, B_coord) + np.einsum(
        "...cjk,...ikm->...cijm", T, B_coord
    )
    nabla = dB + amb_corr - lower
    # project the value slot to the normal bundle; einsum broadcasting lets
    # one call handle all (c, i, j) slots as leading axes
    moved = np.moveaxis(nabla, (-4, -3, -2), (0, 1, 2))
    nabla = np.moveaxis(_normal_projection(sg, moved), (0, 1, 2), (-4, -3, -2))

    gi = sg.gamma_inv
    norm_sq = np.einsum(
        "...cd,...ik,...jl,...cijm,...mn,...dkln->...",
        gi, gi, gi, nabla, sg.g, nabla,
    )
    direct = np.sqrt(np.maximum(norm_sq, 0.0))

    normals = _normal_frame(sg, dim)
    comp = np.einsum("...wm,...mn,...cijn->...wcij", normals, sg.g, nabla)
    dual_sq = np.einsum(
        "...cd,...ik,...jl,...wcij,...wdkl->...", gi, gi, gi, comp, comp
    )
    dual = np.sqrt(np.maximum(dual_sq, 0.0))
    return direct, dual


def curvature_field(u: GridImmersion) -> CurvatureField:
    """All second-order measurements bundled."""
    cf = second_fundamental(u)
    direct, _ = grad_B_norm(u)
    return CurvatureField(
        B=cf.B,
        B_norm=cf.B_norm,
        A_norm=cf.A_norm,
        H=cf.H,
        H_norm=cf.H_norm,
        K_gauss=gauss_curvature(u),
        gradB_norm=direct,
    )


# ---------------------------------------------------------------------------
# grid import/export

_SHAPE_CODES = {"disc": 0.0, "half-disc": 1.0}
_MAGIC = b"PGRD"


def save_grid(u: GridImmersion, path: str) -> None:
    """Write a surface to ``path``: text rows for .csv, packed floats else.

    Both layouts carry the same header fields (shape, r, h, center, ambient
    dimension, ring and angle counts, graphical flag) followed by row-major
    node values, pole first.
    """
    grid = u.grid
    shape = "half-disc" if grid.half else "disc"
    if path.endswith(".csv"):
        lines = [
            f"# shape = {shape}",
            f"# r = {grid.r!r}",
            f"# h = {grid.h!r}",
            f"# s0 = {grid.center[0]!r}",
            f"# t0 = {grid.center[1]!r}",
            f"# dim = {u.ambient.dim}",
            f"# n_rings = {grid.n_rings}",
            f"# n_theta = {grid.n_theta}",
            f"# graphical = {int(u.graphical)}",
        ]
        pole = ",".join("%.17g" % v for v in u.pole)
        lines.append(f"0,0,{pole}")
        for i in range(1, grid.n_rings + 1):
            for j in range(grid.n_theta):
                row = ",".join("%.17g" % v for v in u.values[i, j])
                lines.append(f"{i},{j},{row}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        return
    header = np.array(
        [
            _SHAPE_CODES[shape],
            grid.r,
            grid.h,
            grid.center[0],
            grid.center[1],
            float(u.ambient.dim),
            float(grid.n_rings),
            float(grid.n_theta),
            float(int(u.graphical)),
        ]
    )
    body = np.concatenate([u.pole, u.values[1:].ravel()])
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(np.array([1], dtype="<u4").tobytes())
        fh.write(header.astype("<f8").tobytes())
        fh.write(body.astype("<f8").tobytes())


def load_grid(path: str, ambient: G.ChartManifold) -> GridImmersion:
    """Read a surface written by :func:`save_grid` (layout by extension)."""
    if path.endswith(".csv"):
        meta = {}
        rows = []
        with open(path) as fh:
            for ln, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    try:
                        key, val = line[1:].split("=", 1)
                    except ValueError:
                        raise ParseError(f"{path}:{ln}: malformed header line")
                    meta[key.strip()] = val.strip()
                else:
                    rows.append(line.split(","))
        try:
            grid = PolarGrid(
                float(meta["r"]),
                float(meta["h"]),
                (float(meta["s0"]), float(meta["t0"])),
                meta["shape"] == "half-disc",
            )
            dim = int(meta["dim"])
            graphical = bool(int(meta.get("graphical", "1")))
        except KeyError as exc:
            raise ParseError(f"{path}: missing header field {exc}")
        vals = np.empty((grid.n_rings + 1, grid.n_theta, dim))
        for row in rows:
            i, j = int(row[0]), int(row[1])
            vals[i, j] = [float(v) for v in row[2:]]
        vals[0] = vals[0, 0]
        return GridImmersion(grid, ambient, vals, graphical=graphical)
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ParseError(f"{path}: not a grid file (bad magic)")
        version = np.frombuffer(fh.read(4), dtype="<u4")[0]
        if version != 1:
            raise ParseError(f"{path}: unsupported grid format version {version}")
        header = np.frombuffer(fh.read(9 * 8), dtype="<f8")
        code, r, h, s0, t0, dim, n_rings, n_theta, graphical = header
        grid = PolarGrid(r, h, (s0, t0), code == 1.0)
        dim = int(dim)
        body = np.frombuffer(fh.read(), dtype="<f8")
        expect = dim + grid.n_rings * grid.n_theta * dim
        if body.size != expect:
            raise ParseError(f"{path}: body holds {body.size} floats, expected {expect}")
        vals = np.empty((grid.n_rings + 1, grid.n_theta, dim))
        vals[0] = body[:dim]
        vals[1:] = body[dim:].reshape(grid.n_rings, grid.n_theta, dim)
        return GridImmersion(grid, ambient, vals, graphical=bool(graphical))
