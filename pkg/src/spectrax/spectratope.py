"""Spectratope outer approximations of the convex hull of a variety.

At level k the hierarchy defines a linear Gram map ``c -> M_k(c · z)`` on the
coordinates of ``U_{2τ}``.  The spectratope ``S_k`` is the set of
``y`` with ``y_i = <M_k(e_i), X>`` for some ``X ⪰ 0`` with ``<M_k(1), X> = 1``,
so its support function in direction ``c`` is one generalized eigenvalue:
``max_{y ∈ S_k} <c, y> = λ_max(M_k(c · z), M_k(1))``.  Everything here is
certified one-sidedly through supporting hyperplanes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import gram as gm
from .eig import lambda_min_generalized
from .hierarchy import PrecomputedContext, precompute
from .ideal import IdealPresentation
from .polyring import Polynomial, parse
from .subspace import NotRepresentableError, SubspaceBasis, augment_with_constant

CONTAINMENT_TOL = 1e-8


@dataclass
class SpectratopeHandle:
    level: int
    tau: int
    basis_2tau: SubspaceBasis
    maps: List[np.ndarray]          # M_k(e_i) for each basis element of U_{2τ}
    M_1: np.ndarray
    method: str
    projection: Optional[np.ndarray] = None   # rows: coordinates of the projected functions
    coordinate_names: Tuple[str, ...] = ()

    @property
    def dim(self) -> int:
        return self.M_1.shape[0]

    def full_direction(self, c, projected: bool = False) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        if projected:
            if self.projection is None:
                raise ValueError("handle has no projection")
            return self.projection.T @ c
        if c.shape != (len(self.maps),):
            raise ValueError("direction has the wrong dimension")
        return c

    def gram(self, c) -> np.ndarray:
        out = np.zeros_like(self.M_1)
        for ci, Mi in zip(c, self.maps):
            if ci:
                out += ci * Mi
        return out


@dataclass
class BoundaryPolygon:
    level: int
    directions: List[float]         # angles in radians
    supports: List[float]
    points: List[Tuple[float, float]]

    def rows(self):
        return list(zip(self.directions, self.supports, self.points))


@dataclass
class ContainmentReport:
    n_points: int
    n_directions: int
    violations: List[Tuple[int, int, float]] = field(default_factory=list)
    max_excess: float = -math.inf

    @property
    def ok(self) -> bool:
        return not self.violations


def _as_matrix(M) -> np.ndarray:
    import scipy.sparse as sp

    return M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)


def find_tau(ctx: PrecomputedContext, coordinates: Sequence[Polynomial], k_max: Optional[int] = None) -> int:
    """Smallest k with every coordinate function inside ``U_{2k}``."""
    k_max = ctx.levels if k_max is None else k_max
    nfs = [ctx.gb.nf_terms(f.as_dict()) for f in coordinates]
    for k in range(1, k_max + 1):
        b = ctx.basis(2 * k)
        if all(b.coords_terms(nf) is not None for nf in nfs):
            return k
    raise NotRepresentableError(f"coordinates are not all in U_2k for k <= {k_max}")


def spectratope_chain(ctx: PrecomputedContext, k_max: int, tau: Optional[int] = None,
                      method: str = "method2",
                      coordinates: Optional[Sequence[Polynomial]] = None,
                      coordinate_names: Sequence[str] = ()) -> Dict[int, SpectratopeHandle]:
    """Handles for every level ``τ..k_max``, lifting the Gram map of each basis element.

    ``coordinates`` (default: the variables) define the projection used for
    2-D boundaries and projected directions.
    """
    sys = ctx.system
    n = sys.nvars
    if coordinates is None:
        coordinates = [Polynomial.variable(n, i) for i in range(n)]
    if tau is None:
        tau = find_tau(ctx, coordinates, k_max)
    if tau > k_max:
        raise ValueError("k_max is below τ")
    b2 = ctx.basis(2 * tau)
    proj = np.array([[float(v) for v in b2.coords_terms(ctx.gb.nf_terms(f.as_dict()))]
                     for f in coordinates]) if coordinates else None
    init = gm.method1_init if method == "method1" else gm.method2_init
    exact = sys.m ** tau <= gm.EXACT_GRAM_LIMIT
    M1 = ctx.m1(tau, method, tau)
    pairs = [init(e, sys, tau, ctx.basis(tau), ctx.P_matrix(tau), b2, ctx.norm, exact, M1=M1)
             for e in b2.elements]
    out: Dict[int, SpectratopeHandle] = {}
    for k in range(tau, k_max + 1):
        if k > tau:
            L = ctx.L_matrix(k)
            M1k = ctx.m1(tau, method, k)
            pairs = [gm.lift(p, sys, ctx.basis(k), L, ctx.exact_limit, M1_next=M1k) for p in pairs]
        out[k] = SpectratopeHandle(k, tau, b2, [_as_matrix(p.M_p) for p in pairs],
                                   _as_matrix(pairs[0].M_1), method, proj, tuple(coordinate_names))
    return out


def build_handle(ctx: PrecomputedContext, level: int, **kwargs) -> SpectratopeHandle:
    return spectratope_chain(ctx, level, **kwargs)[level]


def support(handle: SpectratopeHandle, c, projected: bool = False) -> float:
    """``max <c, y>`` over the spectratope, as ``-λ_min(M_k(-c·z), M_k(1))``."""
    full = handle.full_direction(c, projected)
    return -lambda_min_generalized(-handle.gram(full), handle.M_1, want_vector=False).lambda_min


def _support_point(handle: SpectratopeHandle, full: np.ndarray) -> Tuple[float, np.ndarray]:
    res = lambda_min_generalized(-handle.gram(full), handle.M_1, want_vector=True)
    v = res.vector
    denom = float(v @ handle.M_1 @ v)
    y = np.array([float(v @ Mi @ v) / denom for Mi in handle.maps])
    return -res.lambda_min, y


def boundary_2d(handle: SpectratopeHandle, n_directions: int = 360) -> BoundaryPolygon:
    """Supports and touching points in ``n_directions`` evenly spaced directions."""
    if handle.projection is None or handle.projection.shape[0] != 2:
        raise ValueError("boundary_2d needs a two-dimensional projection")
    if n_directions < 1:
        raise ValueError("need at least one direction")
    angles, sups, pts = [], [], []
    for t in range(n_directions):
        theta = 2.0 * math.pi * t / n_directions
        c = np.array([math.cos(theta), math.sin(theta)])
        s, y = _support_point(handle, handle.projection.T @ c)
        p = handle.projection @ y
        angles.append(theta)
        sups.append(s)
        pts.append((float(p[0]), float(p[1])))
    return BoundaryPolygon(handle.level, angles, sups, pts)


def lift_point(handle: SpectratopeHandle, x: Sequence[float]) -> np.ndarray:
    """``z_{2τ}(x)``: the basis of ``U_{2τ}`` evaluated at a point."""
    return np.array([e.evaluate([float(v) for v in x]) for e in handle.basis_2tau.elements], dtype=float)


def containment_check(handle: SpectratopeHandle, points: Sequence[Sequence[float]], n_directions: int = 360,
                      n_random: int = 32, seed: int = 0, tol: float = CONTAINMENT_TOL) -> ContainmentReport:
    """Check ``<c, z_{2τ}(x)> <= support(c) + tol`` for every point and sampled direction.

    Directions are ``n_directions`` angles in the projected plane (when the
    projection is 2-D) plus ``n_random`` random directions in the full
    coordinate space.
    """
    dirs = []
    if handle.projection is not None and handle.projection.shape[0] == 2:
        for t in range(n_directions):
            theta = 2.0 * math.pi * t / n_directions
            dirs.append(handle.projection.T @ np.array([math.cos(theta), math.sin(theta)]))
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        c = rng.standard_normal(len(handle.maps))
        dirs.append(c / np.linalg.norm(c))
    sups = [support(handle, c) for c in dirs]
    Z = np.array([lift_point(handle, x) for x in points]) if len(points) else np.zeros((0, len(handle.maps)))
    report = ContainmentReport(len(points), len(dirs))
    for j, (c, s) in enumerate(zip(dirs, sups)):
        vals = Z @ c
        for i, v in enumerate(vals):
            excess = float(v - s)
            report.max_excess = max(report.max_excess, excess)
            if excess > tol:
                report.violations.append((i, j, excess))
    return report


# -- presets ----------------------------------------------------------------------------------


@dataclass
class Preset:
    names: Tuple[str, ...]
    ideal: IdealPresentation
    spherical: Tuple[Polynomial, ...]
    scale: Fraction

    def context(self, levels: int, **kwargs) -> PrecomputedContext:
        return precompute(self.ideal, self.spherical, self.scale, levels, **kwargs)


def preset_ex51() -> Preset:
    """Plane sextic curve with family ``((y - x^2 y)/2, (x - x^2 y)/2, y/2)`` plus a constant.

    The three listed polynomials are odd under ``(x, y) -> (-x, -y)``, a
    symmetry of the curve, so the even-degree subspaces ``U_{2k}`` they span
    contain only even functions and never the coordinates x and y.
    Appending the constant 1 (square-scale 1/2) nests the subspaces and
    puts x and y in ``U_2``.
    """
    names = ("x", "y")
    gen = parse("x^2 + 2*y^2 - 2*x^3*y - 2*x^2*y^2 + 2*x^4*y^2 - 4", names)
    h = tuple(parse(s, names) for s in ("(y - x^2*y)/2", "(x - x^2*y)/2", "y/2"))
    h, scale = augment_with_constant(h, Fraction(1))
    return Preset(names, IdealPresentation((gen,)), h, scale)


def preset_circle() -> Preset:
    """Unit circle with family ``{x1, x2, 1} / sqrt(2)`` so linear functions lie in ``U_2``."""
    names = ("x1", "x2")
    gen = parse("x1^2 + x2^2 - 1", names)
    h, scale = augment_with_constant([parse("x1", names), parse("x2", names)], Fraction(1))
    return Preset(names, IdealPresentation((gen,)), h, scale)


PRESETS = {"ex51": preset_ex51, "circle": preset_circle}


def ex51_points(count: int, seed: int = 0) -> List[Tuple[float, float]]:
    """Sample real points of the ex51 sextic curve by solving its quadratic in y."""
    rng = np.random.default_rng(seed)
    pts: List[Tuple[float, float]] = []
    while len(pts) < count:
        x = rng.uniform(-3.0, 3.0)
        a = 2.0 * (1.0 - x * x + x ** 4)
        b = -2.0 * x ** 3
        c = x * x - 4.0
        disc = b * b - 4 * a * c
        if disc < 0:
            continue
        r = math.sqrt(disc)
        for y in ((-b + r) / (2 * a), (-b - r) / (2 * a)):
            if len(pts) < count:
                pts.append((x, y))
    return pts


# -- output -----------------------------------------------------------------------------------


def boundary_csv(polygons: Sequence[BoundaryPolygon]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["level", "angle", "support", "x", "y"])
    for poly in polygons:
        for a, s, (px, py) in poly.rows():
            w.writerow([poly.level, repr(a), repr(s), repr(px), repr(py)])
    return buf.getvalue()


def boundary_json(polygons: Sequence[BoundaryPolygon], meta: Optional[dict] = None) -> str:
    doc = {"meta": meta or {},
           "levels": [{"level": p.level, "angle": p.directions, "support": p.supports,
                       "points": [list(q) for q in p.points]} for p in polygons]}
    return json.dumps(doc, indent=1)
