"""Conformal maps onto the upper half plane with two marked boundary points.

Every builder returns a DomainMap phi with phi(a) ~ 0 and phi(b) ~ infinity.
Lattice curves carry medial points that stick out of the continuum domain by
up to half a mesh, so the maps are built on a copy of the domain enlarged by
a little over one mesh unit; the marked points then land near, not exactly
at, 0 and infinity (the offset vanishes with the mesh and is recorded).

Squares and rectangles map through Jacobi elliptic sn evaluated by theta
series (the nome is tiny for moderate aspect ratios, so a handful of terms
reaches machine precision); disks go through the Cayley transform; other
simple polygons use a small Schwarz-Christoffel solver with numerically
determined accessory parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .lattice import ShapeSpec

_THETA_TERMS = 12


class MapBuildError(RuntimeError):
    """Uniformization failed to meet its tolerance."""


# ---------------------------------------------------------------------------
# Moebius transforms


@dataclass(frozen=True)
class Mobius:
    """(a z + b) / (c z + d)."""

    a: complex
    b: complex
    c: complex
    d: complex

    def __call__(self, z):
        return (self.a * z + self.b) / (self.c * z + self.d)

    def deriv(self, z):
        det = self.a * self.d - self.b * self.c
        return det / (self.c * z + self.d) ** 2

    def inverse(self) -> "Mobius":
        return Mobius(self.d, -self.b, -self.c, self.a)

    def compose(self, other: "Mobius") -> "Mobius":
        """self after other: z -> self(other(z))."""
        return Mobius(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    @staticmethod
    def real_zero_pole(zero: float, pole: float, scale: float = 1.0) -> "Mobius":
        """Half-plane self-map w -> scale (w - zero)/(w - pole), orientation kept.

        An infinite pole degenerates to the affine map w -> scale (w - zero).
        """
        if not np.isfinite(pole):
            return Mobius(scale, -scale * zero, 0.0, 1.0)
        m = Mobius(scale, -scale * zero, 1.0, -pole)
        det = m.a * m.d - m.b * m.c
        if det.real < 0:
            m = Mobius(-m.a, -m.b, m.c, m.d)
        return m

    @staticmethod
    def cayley() -> "Mobius":
        """Unit disk onto the upper half plane, -1 -> 0, 1 -> infinity."""
        return Mobius(1j, 1j, -1.0, 1.0)

    @staticmethod
    def disk_automorphism(alpha: complex, rot: complex = 1.0) -> "Mobius":
        """z -> rot (z - alpha)/(1 - conj(alpha) z)."""
        return Mobius(rot, -rot * alpha, -np.conj(alpha), 1.0)


# ---------------------------------------------------------------------------
# Jacobi theta / elliptic machinery (complex arguments)


def _theta_series(v, q, kind):
    v = np.asarray(v, dtype=complex)
    out = np.zeros_like(v)
    if kind in (1, 2):
        for m in range(_THETA_TERMS):
            coef = q ** ((m + 0.5) ** 2)
            if kind == 1:
                out = out + ((-1) ** m) * coef * np.sin((2 * m + 1) * v)
            else:
                out = out + coef * np.cos((2 * m + 1) * v)
        return 2.0 * out
    for m in range(1, _THETA_TERMS):
        coef = q ** (m * m)
        if kind == 3:
            out = out + coef * np.cos(2 * m * v)
        else:
            out = out + ((-1) ** m) * coef * np.cos(2 * m * v)
    return 1.0 + 2.0 * out


def _theta_series_dv(v, q, kind):
    v = np.asarray(v, dtype=complex)
    out = np.zeros_like(v)
    if kind in (1, 2):
        for m in range(_THETA_TERMS):
            coef = q ** ((m + 0.5) ** 2) * (2 * m + 1)
            if kind == 1:
                out = out + ((-1) ** m) * coef * np.cos((2 * m + 1) * v)
            else:
                out = out - coef * np.sin((2 * m + 1) * v)
        return 2.0 * out
    for m in range(1, _THETA_TERMS):
        coef = q ** (m * m) * 2 * m
        if kind == 3:
            out = out - coef * np.sin(2 * m * v)
        else:
            out = out - ((-1) ** m) * coef * np.sin(2 * m * v)
    return 2.0 * out


@dataclass(frozen=True)
class JacobiSn:
    """sn(. , m) with derivative, valid on the fundamental rectangle."""

    m: float  # parameter m = k^2
    K: float
    Kp: float
    q: float

    @staticmethod
    def from_aspect(two_h_over_w: float) -> "JacobiSn":
        """Modulus with K'/K equal to the given ratio."""

        def gap(mm):
            return special.ellipk(1 - mm) / special.ellipk(mm) - two_h_over_w

        mm = optimize.brentq(gap, 1e-14, 1 - 1e-14, xtol=1e-15, rtol=8.9e-16)
        K = float(special.ellipk(mm))
        Kp = float(special.ellipk(1 - mm))
        return JacobiSn(mm, K, Kp, float(np.exp(-np.pi * Kp / K)))

    def __call__(self, u):
        v = np.pi * np.asarray(u, dtype=complex) / (2 * self.K)
        t2z = _theta_series(0.0, self.q, 2)
        t3z = _theta_series(0.0, self.q, 3)
        return (t3z / t2z) * _theta_series(v, self.q, 1) / _theta_series(v, self.q, 4)

    def deriv(self, u):
        v = np.pi * np.asarray(u, dtype=complex) / (2 * self.K)
        t2z = _theta_series(0.0, self.q, 2)
        t3z = _theta_series(0.0, self.q, 3)
        t1, t4 = _theta_series(v, self.q, 1), _theta_series(v, self.q, 4)
        d1, d4 = _theta_series_dv(v, self.q, 1), _theta_series_dv(v, self.q, 4)
        return (np.pi / (2 * self.K)) * (t3z / t2z) * (d1 * t4 - t1 * d4) / t4**2


# ---------------------------------------------------------------------------
# DomainMap: geometry stage + half-plane Moebius stage


@dataclass(eq=False)
class DomainMap:
    """Conformal map of an enlarged planar domain onto the upper half plane.

    ``geom``/``dgeom`` send the physical domain into a standard model (half
    plane already for synthetic data); ``mob`` is the final half-plane Moebius
    placing the marks.  ``mark_images`` records where a and b actually landed
    before the Moebius stage, as an honest offset report.
    """

    geom: object  # callable z -> H
    dgeom: object  # callable z -> derivative
    mob: Mobius
    a: complex
    b: complex
    pad: float
    note: str = ""

    def __call__(self, z):
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.mob(self.geom(np.asarray(z, dtype=complex)))

    def deriv(self, z):
        z = np.asarray(z, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = self.geom(z)
            return self.mob.deriv(w) * self.dgeom(z)


def halfplane_map() -> DomainMap:
    """Identity on the upper half plane (synthetic-path extraction)."""
    return DomainMap(
        geom=lambda z: np.asarray(z, dtype=complex),
        dgeom=lambda z: np.ones_like(np.asarray(z, dtype=complex)),
        mob=Mobius(1.0, 0.0, 0.0, 1.0),
        a=0.0,
        b=np.inf,
        pad=0.0,
        note="identity",
    )


def _nearest_real(w: complex) -> float:
    """Point of R (or infinity) closest to w on the Riemann sphere.

    The marks sit a little inside the enlarged domain, so their half-plane
    images are near, not on, the boundary circle R + {inf}; plain .real is the
    wrong anchor when the image is large and nearly imaginary (antipodal marks
    on a disk), where the honest anchor is infinity.
    """
    u, v = w.real, w.imag
    s = 1.0 + u * u + v * v
    x, z = 2.0 * u / s, (u * u + v * v - 1.0) / s
    r = np.hypot(x, z)
    if r < 1e-300:
        return 0.0  # w = i is equidistant from every real point
    x, z = x / r, z / r
    if 1.0 - z < 1e-12:
        return np.inf
    return x / (1.0 - z)


def _finish(geom, dgeom, shape: ShapeSpec, pad: float, ref: complex, note: str) -> DomainMap:
    w_a = complex(geom(np.array([shape.a]))[0])
    w_b = complex(geom(np.array([shape.b]))[0])
    zero, pole = _nearest_real(w_a), _nearest_real(w_b)
    if not np.isfinite(zero):
        raise MapBuildError("first mark landed at infinity in the model domain")
    if np.isfinite(pole) and abs(pole - zero) < 1e-9 * (1.0 + abs(zero)):
        raise MapBuildError("marks collide after uniformization")
    mob = Mobius.real_zero_pole(zero, pole)
    w_ref = mob(complex(geom(np.array([ref]))[0]))
    if w_ref.imag <= 0:
        raise MapBuildError("reference point mapped out of the half plane")
    mob = Mobius.real_zero_pole(zero, pole, scale=1.0 / w_ref.imag)
    dm = DomainMap(geom=geom, dgeom=dgeom, mob=mob, a=shape.a, b=shape.b, pad=pad, note=note)
    # the enlarged-domain offset: images of the true marks
    im_a = complex(dm(np.array([shape.a]))[0])
    if not np.isfinite(im_a.real) or abs(im_a) > 1e3 * max(pad, 1e-12):
        raise MapBuildError("mark normalization failed")
    return dm


def disk_to_h(shape: ShapeSpec, pad: float) -> DomainMap:
    if shape.kind != "disk":
        raise ValueError("disk_to_h wants a disk shape")
    c, rho = shape.center, shape.radius + pad
    cay = Mobius.cayley()
    # rotate so that a sits near -1 (image near 0)
    u_a = (shape.a - c) / abs(shape.a - c)
    rot = -1.0 / u_a

    def geom(z):
        return cay(rot * (np.asarray(z, dtype=complex) - c) / rho)

    def dgeom(z):
        u = rot * (np.asarray(z, dtype=complex) - c) / rho
        return cay.deriv(u) * rot / rho

    return _finish(geom, dgeom, shape, pad, c, "disk")


def square_to_h(shape: ShapeSpec, pad: float) -> DomainMap:
    if shape.kind != "square":
        raise ValueError("square_to_h wants a square shape")
    x0, x1, y0, y1 = shape.bbox()
    x0, y0, x1, y1 = x0 - pad, y0 - pad, x1 + pad, y1 + pad
    w, h = x1 - x0, y1 - y0
    sn = JacobiSn.from_aspect(2.0 * h / w)
    corner = x0 + 1j * y0

    def to_u(z):
        zz = (np.asarray(z, dtype=complex) - corner)
        return (zz.real / w * 2 - 1) * sn.K + 1j * (zz.imag / h * sn.Kp)

    du_dz = 2 * sn.K / w  # du/dx; du/d(iy) = Kp/h, equal by the modulus choice

    if not np.isclose(2 * sn.K / w, sn.Kp / h, rtol=1e-12):
        raise MapBuildError("rectangle aspect solve inconsistent")

    def geom(z):
        return sn(to_u(z))

    def dgeom(z):
        return sn.deriv(to_u(z)) * du_dz

    ref = (x0 + x1) / 2 + 1j * (y0 + y1) / 2
    return _finish(geom, dgeom, shape, pad, ref, "square-sn")


# ---------------------------------------------------------------------------
# Schwarz-Christoffel for simple polygons (accessory parameters fitted)


@dataclass(eq=False)
class SchwarzChristoffel:
    """Map H -> polygon; to_h inverts it by Newton iteration.

    Quadrature follows the classic compound scheme: each evaluation is
    anchored at the nearest prevertex whose endpoint singularity a
    Gauss-Jacobi rule absorbs exactly, and the remaining path is covered in
    hops never longer than half the distance to the nearest other
    singularity, so a plain Gauss rule is accurate on every hop.
    """

    vertices: np.ndarray  # complex corners, ccw; the last one maps from infinity
    alphas: np.ndarray  # interior angles / pi
    prevertices: np.ndarray  # real, increasing, one per finite vertex
    scale: complex
    offset: complex
    _starts: tuple = field(default=None, repr=False)
    _vertex_vals: np.ndarray = field(default=None, repr=False)
    _rules: dict = field(default_factory=dict, repr=False)

    _QUAD_N = 16
    _MAX_HOPS = 64

    def _integrand(self, w, skip: int = -1):
        w = np.asarray(w, dtype=complex)
        out = np.ones_like(w)
        for j, (x, al) in enumerate(zip(self.prevertices, self.alphas[:-1])):
            if j != skip:
                out = out * (w - x) ** (al - 1.0)
        return out

    def _rule(self, beta: float | None):
        """(nodes, weights) on [-1, 1]; beta = left-endpoint weight exponent."""
        key = round(beta, 14) if beta is not None else None
        if key not in self._rules:
            if beta is None:
                self._rules[key] = np.polynomial.legendre.leggauss(self._QUAD_N)
            else:
                self._rules[key] = special.roots_jacobi(self._QUAD_N, 0.0, beta)
        return self._rules[key]

    def _hop(self, a: complex, b: complex, sing: int) -> complex:
        """One quadrature rule application over [a, b]; sing anchors at a."""
        half = (b - a) / 2.0
        if sing >= 0:
            beta = self.alphas[sing] - 1.0
            s, wt = self._rule(beta)
            pts = a + half * (1.0 + s)
            vals = self._integrand(pts, skip=sing)
            return half ** (1.0 + beta) * np.sum(wt * vals)
        s, wt = self._rule(None)
        pts = a + half * (1.0 + s)
        return half * np.sum(wt * self._integrand(pts))

    def _int_from(self, anchor: int, w1: complex) -> complex:
        """Integral of the SC integrand from prevertex ``anchor`` to w1."""
        pv = self.prevertices
        a = complex(pv[anchor])
        sing = anchor
        total = 0.0 + 0.0j
        for _ in range(self._MAX_HOPS):
            rest = w1 - a
            if rest == 0:
                return total
            d = np.min(np.abs(np.delete(pv, sing) - a)) if sing >= 0 else np.min(np.abs(pv - a))
            if abs(rest) <= 0.5 * d:
                return total + self._hop(a, w1, sing)
            a_next = a + rest * (0.5 * d / abs(rest))
            total += self._hop(a, a_next, sing)
            a, sing = a_next, -1
        # bail out: finish in one (rarely reached) gulp; callers that need
        # certainty re-verify residuals after Newton anyway
        return total + self._hop(a, w1, -1)

    def side_integral(self, i: int) -> complex:
        """Integral between consecutive prevertices i, i+1 (both singular)."""
        mid = (self.prevertices[i] + self.prevertices[i + 1]) / 2.0
        return self._int_from(i, mid) - self._int_from(i + 1, mid)

    def _vertex_values(self) -> np.ndarray:
        if self._vertex_vals is None:
            vals = np.empty(len(self.prevertices), dtype=complex)
            vals[0] = self.offset
            for i in range(len(self.prevertices) - 1):
                vals[i + 1] = vals[i] + self.scale * self.side_integral(i)
            object.__setattr__(self, "_vertex_vals", vals)
        return self._vertex_vals

    def from_h(self, w):
        w = np.asarray(w, dtype=complex)
        out = np.empty_like(w)
        vv = self._vertex_values()
        for i, wi in np.ndenumerate(w):
            k = int(np.argmin(np.abs(self.prevertices - wi.real)))
            out[i] = vv[k] + self.scale * self._int_from(k, complex(wi))
        return out

    def deriv_from_h(self, w):
        return self.scale * self._integrand(w)

    def _start_candidates(self):
        """Coarse image table of H used to seed Newton (crowded legs included)."""
        if self._starts is None:
            pv = self.prevertices
            span = float(pv[-1] - pv[0]) + 1.0
            xs = np.linspace(pv[0] - 1.5 * span, pv[-1] + 1.5 * span, 27)
            ys = span * np.geomspace(1e-4, 3.0, 12)
            grid = [(xs[:, None] + 1j * ys[None, :]).ravel()]
            # near a prevertex the map flattens like a fractional power, so a
            # uniform grid never lands close: seed columns right above each
            columns = span * np.geomspace(1e-7, 0.3, 10)
            anchors = np.concatenate([pv, (pv[:-1] + pv[1:]) / 2.0])
            grid.append((anchors[:, None] + 1j * columns[None, :]).ravel())
            # far field, for targets near the implied vertex at infinity
            theta = np.linspace(0.15, np.pi - 0.15, 9)
            for radius in (5.0, 25.0):
                grid.append(np.mean(pv) + radius * span * np.exp(1j * theta))
            grid = np.concatenate(grid)
            object.__setattr__(self, "_starts", (grid, self.from_h(grid)))
        return self._starts

    def _newton(self, zi, w, tol, max_iter):
        for _ in range(max_iter):
            fz = complex(self.from_h(np.array([w]))[0])
            dz = complex(self.deriv_from_h(np.array([w]))[0])
            if dz == 0:
                return None
            step = (zi - fz) / dz
            # keep the iterate in the open half plane
            while (w + step).imag <= 0:
                step /= 2.0
            w = w + step
            if abs(step) < tol * (1 + abs(w)):
                break
        if abs(complex(self.from_h(np.array([w]))[0]) - zi) <= 1e-7 * (1 + abs(zi)):
            return w
        return None

    def to_h(self, z, w_start=None, tol=1e-10, max_iter=80):
        """Invert point by point; consecutive array entries seed each other.

        Cold points fall back to the best few entries of a cached coarse image
        table, so roots in exponentially crowded regions are still found.
        """
        z = np.asarray(z, dtype=complex)
        out = np.empty_like(z)
        w_prev = None
        for i, zi in np.ndenumerate(z):
            starts = []
            if w_prev is not None:
                starts.append(w_prev)
            if w_start is not None:
                starts.append(complex(w_start))
            grid, vals = self._start_candidates()
            starts.extend(grid[np.argsort(np.abs(vals - zi))[:8]])
            w = None
            for s in starts:
                w = self._newton(zi, complex(s), tol, max_iter)
                if w is not None:
                    break
            if w is None:
                raise MapBuildError(f"could not invert point {zi} (crowded region?)")
            out[i] = w_prev = w
        return out


def _polygon_enlarge(vertices: np.ndarray, pad: float) -> np.ndarray:
    """Push each vertex outward along its angle bisector by ~pad."""
    n = len(vertices)
    out = np.empty(n, dtype=complex)
    for i in range(n):
        prev_v, v, next_v = vertices[i - 1], vertices[i], vertices[(i + 1) % n]
        u1 = (v - prev_v) / abs(v - prev_v)
        u2 = (next_v - v) / abs(next_v - v)
        # inward normal of each edge for ccw polygon is i*direction; outward is -i*dir
        n1 = -1j * u1
        n2 = -1j * u2
        bis = n1 + n2
        if abs(bis) < 1e-12:
            bis = n1
        bis /= abs(bis)
        # displacement so both adjacent edges move out by pad
        cosha = max(abs((n1 * np.conj(bis)).real), 0.3)
        out[i] = v + bis * pad / cosha
    return out


def polygon_to_h(shape: ShapeSpec, pad: float, tol: float = 1e-6) -> DomainMap:
    if shape.kind != "polygon":
        raise ValueError("polygon_to_h wants a polygon shape")
    verts = _polygon_enlarge(np.asarray(shape.vertices, dtype=complex), pad)
    n = len(verts)
    # keep the first mark away from the implied vertex at infinity (the last
    # prevertex): start the vertex list at the corner nearest to it
    j0 = int(np.argmin(np.abs(np.asarray(shape.vertices, dtype=complex) - shape.a)))
    verts = np.roll(verts, -j0)
    # interior angles (ccw polygon)
    alphas = np.empty(n)
    for i in range(n):
        u_in = verts[i] - verts[i - 1]
        u_out = verts[(i + 1) % n] - verts[i]
        ang = np.angle(u_out / u_in)  # exterior turn in (-pi, pi)
        alphas[i] = 1.0 - ang / np.pi
    if not np.isclose(np.sum(1 - alphas), 2.0, atol=1e-9):
        raise MapBuildError("polygon angle sum inconsistent (non-simple?)")

    sides = np.array([abs(verts[(i + 1) % n] - verts[i]) for i in range(n)])

    def unpack(params):
        # prevertices: x_0 = 0, x_1 = 1 fixed; gaps parametrized by exp
        gaps = np.exp(params)
        return np.concatenate([[0.0, 1.0], 1.0 + np.cumsum(gaps)])

    def residual(params):
        sc = SchwarzChristoffel(verts, alphas, unpack(params), 1.0, 0.0)
        lens = np.array([abs(sc.side_integral(i)) for i in range(n - 2)])
        # ratios of consecutive finite side lengths against the target polygon
        tgt = sides[: n - 2]
        return np.log(lens / lens[0]) - np.log(tgt / tgt[0])

    if n > 3:
        sol = optimize.least_squares(residual, np.zeros(n - 3), xtol=1e-14, ftol=1e-14, gtol=1e-14)
        if not sol.success and np.max(np.abs(sol.fun)) > tol:
            raise MapBuildError("accessory-parameter solve did not converge")
        prev = unpack(sol.x)
    else:
        prev = np.array([0.0, 1.0])
    sc = SchwarzChristoffel(verts, alphas, prev, 1.0, 0.0)
    # scale/offset from the first side
    img = sc.side_integral(0)
    sc = SchwarzChristoffel(verts, alphas, prev, (verts[1] - verts[0]) / img, verts[0])
    # verify side lengths
    for i in range(n - 2):
        got = abs(sc.scale) * abs(sc.side_integral(i))
        if abs(got - sides[i]) > 50 * tol * max(1.0, sides[i]):
            raise MapBuildError(f"side {i} length error {abs(got - sides[i]):.2e}")

    def geom(z):
        return sc.to_h(z)

    def dgeom(z):
        w = sc.to_h(z)
        return 1.0 / sc.deriv_from_h(w)

    ref = np.mean(verts)
    return _finish(geom, dgeom, shape, pad, ref, "schwarz-christoffel")


def domain_to_h(shape: ShapeSpec, delta: float) -> DomainMap:
    """Uniformize the shape enlarged by a bit over one mesh unit."""
    pad = 1.05 * delta
    if shape.kind == "disk":
        return disk_to_h(shape, pad)
    if shape.kind == "square":
        return square_to_h(shape, pad)
    return polygon_to_h(shape, pad)
