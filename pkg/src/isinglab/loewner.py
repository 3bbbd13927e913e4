"""Loewner-chain numerics: driving extraction, forward sampling, capacities.

Curves are unzipped point by point with vertical-slit elementary maps in the
half-plane-capacity parametrization: absorbing a point at x + iv advances
capacity by v^2/4 and samples the driving function at x.  The same elementary
maps run forward to draw SLE traces from Brownian driving.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._util import make_rng
from .conformal import DomainMap, domain_to_h, halfplane_map
from .interface import LatticePath
from .lattice import DiscreteDomain, ShapeSpec

_CHAIN_MAGIC = b"LCHN"


class DegenerateStep(ValueError):
    """Two consecutive mapped curve points coincide beyond precision."""


def _sqrt_h(u):
    """Branch of sqrt mapping C minus the positive real axis cut onto H.

    Elementwise: principal square root reflected so the image has Im >= 0,
    with real negatives resolved by the sign of the input's real part.
    """
    s = np.sqrt(u)
    s = np.where(s.imag < 0, -s, s)
    return s


def _fix_branch(s, u):
    """Reflect sqrt values into H; real outputs keep the source's real sign."""
    s = np.where(s.imag < 0.0, -s, s)
    on_axis = s.imag == 0.0
    wrong_side = (s.real >= 0.0) != (u.real >= 0.0)
    return np.where(on_axis & wrong_side, -s, s)


def slit_up(z, x: float, v: float):
    """Unzip map for a vertical slit of height v rooted at x: tip -> x."""
    u = np.asarray(z, dtype=complex) - x
    return _fix_branch(np.sqrt(u * u + v * v), u) + x


def slit_down(w, x: float, v: float):
    """Inverse of slit_up: welds [x - 2 sqrt(tau), x + 2 sqrt(tau)] into the slit."""
    u = np.asarray(w, dtype=complex) - x
    return _fix_branch(np.sqrt(u * u - v * v), u) + x


def _slit_down_scalar(w: complex, x: float, v: float) -> complex:
    u = w - x
    s = complex(np.lib.scimath.sqrt(u * u - v * v))
    if s.imag < 0.0 or (s.imag == 0.0 and (s.real >= 0.0) != (u.real >= 0.0)):
        s = -s
    return s + x


@dataclass(eq=False)
class DrivingFunction:
    """Driving samples (t, W) in the capacity parametrization, t[0] = 0."""

    t: np.ndarray
    W: np.ndarray
    slit_heights: np.ndarray  # Im of each absorbed point when absorbed

    def __post_init__(self):
        if len(self.t) != len(self.W):
            raise ValueError("t and W must align")
        if len(self.t) and (self.t[0] != 0.0 or np.any(np.diff(self.t) <= 0)):
            raise ValueError("capacity samples must start at 0 and strictly increase")

    @property
    def total_capacity(self) -> float:
        return float(self.t[-1]) if len(self.t) else 0.0

    @property
    def max_jump(self) -> float:
        return float(np.max(np.abs(np.diff(self.W)))) if len(self.W) > 1 else 0.0

    def sample_at(self, t_grid) -> np.ndarray:
        return np.interp(np.asarray(t_grid, dtype=float), self.t, self.W)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t,W\n")
            for ti, wi in zip(self.t, self.W):
                fh.write(f"{ti!r},{wi!r}\n")


@dataclass(eq=False)
class ConformalChain:
    """Base uniformization plus the ordered elementary slit maps."""

    base: DomainMap
    xs: np.ndarray
    taus: np.ndarray
    tol_note: str = ""

    def __post_init__(self):
        if np.any(self.taus < 0):
            raise ValueError("capacity increments must be nonnegative")

    @property
    def total_capacity(self) -> float:
        return float(self.taus.sum())

    def capacities(self) -> np.ndarray:
        return np.cumsum(self.taus)

    def map_to_h(self, z, n_steps: int | None = None):
        """g_t o phi applied to physical points (first n_steps slits)."""
        w = self.base(np.asarray(z, dtype=complex))
        stop = len(self.xs) if n_steps is None else n_steps
        for x, tau in zip(self.xs[:stop], self.taus[:stop]):
            w = slit_up(w, x, 2.0 * np.sqrt(tau))
        return w

    def hydro_residual(self, radius: float = 1e6, n_probe: int = 8) -> float:
        """max over probes of |g(z) - z - 2t/z| |z|^2 at |z| = radius.

        Computed incrementally so the answer reflects the chain's geometry
        (the z^-2 coefficient) rather than floating-point cancellation.
        """
        ang = np.linspace(0.25, np.pi - 0.25, n_probe)
        z = radius * np.exp(1j * ang)
        shift = np.zeros_like(z)
        for x, tau in zip(self.xs, self.taus):
            u = (z + shift) - x
            v2 = 4.0 * tau
            # s - u computed stably: (s - u)(s + u) = v^2
            s_min_u = v2 / (_sqrt_h(u * u + v2) + u)
            shift = shift + s_min_u
        res = shift - 2.0 * self.total_capacity / z
        return float(np.max(np.abs(res) * radius**2))

    def hydro_bound(self) -> float:
        """A priori bound on the z^-2 coefficient plus numerical slack."""
        t = self.total_capacity
        lead = np.sum(2.0 * self.taus * (np.abs(self.xs) + 2.0 * np.sqrt(self.taus)))
        return float(2.0 * (lead + 4.0 * t * t) + 1e-9 * (1 + len(self.xs)))

    def to_binary(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(_CHAIN_MAGIC)
            fh.write(struct.pack("<qd", len(self.xs), self.total_capacity))
            np.column_stack([self.xs, self.taus]).astype("<f8").tofile(fh)

    @staticmethod
    def from_binary(path, base: DomainMap | None = None) -> "ConformalChain":
        with open(path, "rb") as fh:
            if fh.read(4) != _CHAIN_MAGIC:
                raise ValueError("not a chain file")
            n, total = struct.unpack("<qd", fh.read(16))
            dat = np.fromfile(fh, dtype="<f8", count=2 * n).reshape(n, 2)
        chain = ConformalChain(base or halfplane_map(), dat[:, 0].copy(), dat[:, 1].copy())
        if not np.isclose(chain.total_capacity, total, rtol=1e-12, atol=1e-15):
            raise ValueError("chain file capacity mismatch")
        return chain


@lru_cache(maxsize=32)
def _uniformizer_cached(shape: ShapeSpec, delta: float) -> DomainMap:
    return domain_to_h(shape, delta)


def uniformizer(domain: DiscreteDomain) -> DomainMap:
    """Half-plane uniformization of the domain, cached by (shape, mesh)."""
    return _uniformizer_cached(domain.shape, domain.delta)


def _as_h_points(path, domain) -> tuple:
    """(points in H, base map) for a lattice path or raw complex points."""
    if isinstance(path, LatticePath):
        base = uniformizer(domain if isinstance(domain, DiscreteDomain) else path.domain)
        return np.asarray(base(path.positions()), dtype=complex), base
    pts = np.asarray(path, dtype=complex)
    if isinstance(domain, DomainMap):
        return np.asarray(domain(pts), dtype=complex), domain
    if isinstance(domain, DiscreteDomain):
        base = uniformizer(domain)
        return np.asarray(base(pts), dtype=complex), base
    if domain is None:
        return pts, halfplane_map()
    raise TypeError("domain must be a DiscreteDomain, DomainMap, or None")


def extract_driving(path, domain=None, max_capacity: float | None = None) -> tuple:
    """Unzip a curve: (DrivingFunction, ConformalChain).

    ``path`` is a LatticePath (with its domain) or an array of points already
    in the half plane (domain=None) / mapped by an explicit DomainMap.
    Absorption stops once cumulative capacity reaches max_capacity.
    """
    w, base = _as_h_points(path, domain)
    if len(w) == 0:
        empty = np.empty(0)
        return (
            DrivingFunction(np.zeros(1), np.zeros(1), empty),
            ConformalChain(base, empty, empty),
        )
    scale = float(np.max(np.abs(w[: min(len(w), 64)])) + 1.0)
    xs, taus, heights = [], [], []
    start_x = None
    total = 0.0
    w = w.copy()
    for k in range(len(w)):
        wk = w[k]
        x, v = float(wk.real), float(wk.imag)
        if v <= 1e-13 * scale:
            if not xs and start_x is None:
                start_x = x  # boundary-touching start carries no capacity
                continue
            raise DegenerateStep(f"point {k} collapsed onto the real axis (v={v:.2e})")
        xs.append(x)
        taus.append(v * v / 4.0)
        heights.append(v)
        total += v * v / 4.0
        if k + 1 < len(w):
            w[k + 1 :] = slit_up(w[k + 1 :], x, v)
        if max_capacity is not None and total >= max_capacity:
            break
    xs = np.asarray(xs)
    taus = np.asarray(taus)
    w0 = xs[0] if len(xs) else (start_x if start_x is not None else 0.0)
    t = np.concatenate([[0.0], np.cumsum(taus)])
    W = np.concatenate([[w0], xs])
    driving = DrivingFunction(t, W, np.asarray(heights))
    chain = ConformalChain(base, xs, taus)
    return driving, chain


def hcap_of_hull(points) -> float:
    """Half-plane capacity of a point path in H via unzipping."""
    pts = np.asarray(points, dtype=complex)
    if pts.size == 0:
        return 0.0
    driving, _ = extract_driving(pts, None)
    return driving.total_capacity


def stop_at_capacity(path: LatticePath, domain: DiscreteDomain, t: float) -> LatticePath:
    """Shortest path prefix whose extracted capacity reaches t (full if never)."""
    if t < 0:
        raise ValueError("capacity must be nonnegative")
    if t == 0.0:
        return LatticePath(path.domain, path.crossings[:0], "")
    base = uniformizer(domain)
    w = np.asarray(base(path.positions()), dtype=complex)
    total = 0.0
    for k in range(len(w)):
        v = float(w[k].imag)
        x = float(w[k].real)
        if v > 0:
            total += v * v / 4.0
        if total >= t:
            return LatticePath(path.domain, path.crossings[: k + 1], path.turns[: max(k, 0)])
        if k + 1 < len(w) and v > 0:
            w[k + 1 :] = slit_up(w[k + 1 :], x, v)
    return path


# ---------------------------------------------------------------------------
# forward SLE sampling


@dataclass(eq=False)
class SLEPath:
    times: np.ndarray
    driving: np.ndarray
    trace: np.ndarray  # complex points in H, one per time step


def sample_sle(kappa: float, total_t: float, dt: float, rng_seed: int, *, stream: int = 0,
               trace: bool = True) -> SLEPath:
    """Forward discretization of the Loewner flow driven by sqrt(kappa) B_t.

    The driving is interpolated on each step as a square-root arch, whose
    Loewner hull is an exact straight tilted slit; composing those welds keeps
    every tip on the growing hull boundary, so for simple curves the sampled
    chords only ever intersect inside the two-step corner-cutting window (a
    plain piecewise-constant scheme instead hops ~0.03% of tips across the
    hull at any dt).  kappa = 0 reduces to the vertical slit.
    """
    if kappa < 0 or dt <= 0 or total_t <= 0:
        raise ValueError("need kappa >= 0, dt > 0, total_t > 0")
    n = int(np.ceil(total_t / dt))
    rng = make_rng(rng_seed, stream)
    dW = np.sqrt(kappa * dt) * rng.standard_normal(n)
    W = np.concatenate([[0.0], np.cumsum(dW)])
    times = dt * np.arange(n + 1)
    if not trace:
        return SLEPath(times, W, np.empty(0, dtype=complex))
    # tilted slit for step k: angle pi*alpha with 2(1-2 alpha) = c sqrt(m),
    # m = alpha(1-alpha), c = dW/sqrt(dt); welding map in local coordinates is
    # w -> (w + x_l)^(1-alpha) (w - x_r)^alpha, which sends dW to the tip
    u = dW / np.sqrt(dW * dW + 16.0 * dt)
    alpha = 0.5 * (1.0 - u)
    d = np.sqrt(dW * dW + 16.0 * dt)
    x_l, x_r = alpha * d, (1.0 - alpha) * d
    pts = np.empty(n, dtype=complex)
    for j in range(1, n + 1):
        z = complex(W[j])
        for k in range(j, 0, -1):
            w = z - W[k - 1]
            z = W[k - 1] + (w + x_l[k - 1]) ** (1.0 - alpha[k - 1]) * (w - x_r[k - 1]) ** alpha[k - 1]
        pts[j - 1] = z
    return SLEPath(times, W, pts)
