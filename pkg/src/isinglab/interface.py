"""Tracing the +/- interface of a mixed-arc spin configuration.

The interface is the curve from the a-mark to the b-mark that separates the
plus cluster attached to the plus arc from the minus cluster attached to the
minus arc.  It is walked face by face on the dual lattice: each step crosses
one primal edge with opposite endpoint spins, always keeping +1 on the left,
and ambiguous diagonal faces resolve by the leftmost rule (turn left), which
keeps the walk hugging the plus cluster.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ._util import FIELD_EXPONENT, loglog_fit, make_rng
from .coupling import bonds_given_spins
from .ising import FieldSpec, IsingSampler, Region, SpinConfig, boundary_spin_values
from .lattice import DiscreteDomain, ShapeSpec, build_domain

# direction indices: 0=east 1=north 2=west 3=south
DIRV = ((1, 0), (0, 1), (-1, 0), (0, -1))


class NoInterface(ValueError):
    """Raised when the configuration does not pin an a-to-b interface."""


class AnnulusOutOfDomain(ValueError):
    """Raised when an arm-event annulus pokes outside the spin support."""


@dataclass(eq=False)
class LatticePath:
    """A dual-lattice interface: crossed edges, medial points, turn codes."""

    domain: DiscreteDomain
    crossings: np.ndarray  # (n, 2, 2) int64; [k,0]=+1 endpoint, [k,1]=-1 endpoint
    turns: str  # length n-1, over {'S','L','R'}; step 0 has no turn

    @property
    def n_steps(self) -> int:
        return len(self.crossings)

    def medial_points(self) -> np.ndarray:
        """Midpoints of the crossed edges, in lattice units (n, 2) float."""
        return self.crossings.mean(axis=1)

    def positions(self) -> np.ndarray:
        """Medial points as physical complex coordinates."""
        m = self.medial_points() * self.domain.delta
        return m[:, 0] + 1j * m[:, 1]

    def flank_vertices(self) -> tuple:
        """(V_L, V_R): interior vertices flanking the curve on the +/- sides."""
        dom = self.domain
        out = []
        for side in (0, 1):
            ends = self.crossings[:, side, :]
            keep = dom.code_at(ends) == 1
            out.append(np.unique(ends[keep], axis=0).reshape(-1, 2))
        return tuple(out)

    def to_csv(self, path) -> None:
        m = self.medial_points()
        pos = self.positions()
        with open(path, "w") as fh:
            fh.write("step,mi,mj,x,y,plus_i,plus_j,minus_i,minus_j,turn\n")
            for k in range(self.n_steps):
                t = self.turns[k - 1] if k > 0 else "S"
                fh.write(
                    f"{k},{m[k,0]},{m[k,1]},{pos[k].real},{pos[k].imag},"
                    f"{self.crossings[k,0,0]},{self.crossings[k,0,1]},"
                    f"{self.crossings[k,1,0]},{self.crossings[k,1,1]},{t}\n"
                )


def _spin_grid(config: SpinConfig) -> tuple:
    """Padded int8 grid of spins (0 outside the vertex set) plus its origin."""
    dom = config.domain
    sg = np.zeros_like(dom._code, dtype=np.int8)
    gi, gj = dom.grid_index(dom.interior)
    sg[gi, gj] = config.interior_spins
    bi, bj = dom.grid_index(dom.boundary)
    sg[bi, bj] = config.boundary_spins
    return sg, dom._origin


def _transitions(domain: DiscreteDomain):
    """Arc-change steps of the hull circuit: (a_transition, b_transition).

    Each transition is (w_plus, w_minus, v_first, v_second) where the w's are
    the boundary vertices on either side of the mark and the v's are the
    interior vertices of the two circuit steps involved.
    """
    wv = domain._circuit_w
    vv = domain._circuit_v
    minus_set = {tuple(r) for r in domain.arc_minus.tolist()}
    signs = np.array([-1 if tuple(r) in minus_set else 1 for r in wv.tolist()])
    n = len(wv)
    a_tr = b_tr = None
    for k in range(n):
        k2 = (k + 1) % n
        if signs[k] == 1 and signs[k2] == -1:
            a_tr = (wv[k], wv[k2], vv[k], vv[k2])
        elif signs[k] == -1 and signs[k2] == 1:
            b_tr = (wv[k2], wv[k], vv[k], vv[k2])  # (w_plus, w_minus, ...)
    if a_tr is None or b_tr is None:
        raise NoInterface("boundary arcs do not alternate around the circuit")
    return a_tr, b_tr


def _transition_crossings(tr, sg, origin) -> list:
    """Admissible +/- crossings at an arc transition, best first."""
    w_plus, w_minus, v1, v2 = (np.asarray(t) for t in tr)

    def spin(v):
        return int(sg[v[0] - origin[0], v[1] - origin[1]])

    out = []
    if abs(w_plus - w_minus).sum() == 1:
        out.append((w_plus, w_minus))
    for v in (v2, v1):
        if abs(v - w_minus).sum() == 1 and spin(v) > 0:
            out.append((v, w_minus))
    for v in (v1, v2):
        if abs(v - w_plus).sum() == 1 and spin(v) < 0:
            out.append((w_plus, v))
    if abs(v1 - v2).sum() == 1 and spin(v1) > 0 and spin(v2) < 0:
        out.append((v1, v2))
    if abs(v1 - v2).sum() == 1 and spin(v2) > 0 and spin(v1) < 0:
        out.append((v2, v1))
    # drop duplicates, keep priority order
    seen, uniq = set(), []
    for p, m in out:
        key = (tuple(p), tuple(m))
        if key not in seen:
            seen.add(key)
            uniq.append((p, m))
    if not uniq:
        raise NoInterface("no admissible crossing at an arc transition")
    return uniq


def extract_interface(config: SpinConfig, max_steps: int | None = None) -> LatticePath:
    """Walk the a-to-b interface of a mixed-arc configuration."""
    if config.bc != "dobrushin":
        raise NoInterface(f"boundary condition {config.bc!r} does not pin an interface")
    dom = config.domain
    sg, origin = _spin_grid(config)
    a_tr, b_tr = _transitions(dom)
    start = _transition_crossings(a_tr, sg, origin)[0]
    terminal = {
        (tuple(p.tolist()), tuple(m.tolist())) for p, m in _transition_crossings(b_tr, sg, origin)
    }

    def spin(i, j):
        return int(sg[i - origin[0], j - origin[1]])

    def rot90(d):
        return (-d[1], d[0])

    p, m = (tuple(start[0].tolist()), tuple(start[1].tolist()))
    crossings = [(p, m)]
    turns = []
    if max_steps is None:
        max_steps = 16 * (dom.n_interior + dom.n_boundary) + 64

    done = (p, m) in terminal
    while not done:
        if len(crossings) > max_steps:
            raise RuntimeError("interface walk failed to terminate (spin grid inconsistent?)")
        e = (m[0] - p[0], m[1] - p[1])
        d = rot90(e)  # travel keeps the + endpoint on the left
        # face entered: corners are p, m, p+d, m+d
        far_left = (p[0] + d[0], p[1] + d[1])
        far_right = (m[0] + d[0], m[1] + d[1])
        s_l = spin(*far_left)
        s_r = spin(*far_right)
        if s_l < 0:
            p2, m2, turn = p, far_left, "L"
        elif s_l > 0 and s_r < 0:
            p2, m2, turn = far_left, far_right, "S"
        elif s_r > 0:
            # covers (+,+) and the corner-cut face whose far-left vertex
            # carries no spin; both exit through the right side
            p2, m2, turn = far_right, m, "R"
        else:
            raise RuntimeError("interface walk dead-ended in a spinless face")
        p, m = p2, m2
        crossings.append((p, m))
        turns.append(turn)
        done = (p, m) in terminal

    arr = np.array([[list(pp), list(mm)] for pp, mm in crossings], dtype=np.int64)
    return LatticePath(domain=dom, crossings=arr, turns="".join(turns))


def adjacency_counts(path: LatticePath) -> tuple:
    """(n_left, n_right, delta^{15/8} (n_left - n_right)) over flank vertices."""
    vl, vr = path.flank_vertices()
    n_l, n_r = len(vl), len(vr)
    scaled = path.domain.delta**FIELD_EXPONENT * (n_l - n_r)
    return n_l, n_r, scaled


# ---------------------------------------------------------------------------
# arm events


def two_arm_indicator(config: SpinConfig, center: complex, r: float, R: float) -> tuple:
    """(plus_arm, minus_arm): sign-constant crossings of the annulus r..R.

    An arm is a 4-connected constant-sign component within the closed annulus
    that touches both the inner circle (some vertex within r + delta of the
    center) and the outer one (within delta of radius R).
    """
    if not (0 < r < R):
        raise ValueError("need 0 < r < R")
    dom = config.domain
    sg, origin = _spin_grid(config)
    nx, ny = sg.shape
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    x = dom.delta * (ii + origin[0])
    y = dom.delta * (jj + origin[1])
    dist = np.hypot(x - center.real, y - center.imag)
    if np.any((dist <= R + dom.delta) & (sg == 0)):
        raise AnnulusOutOfDomain("annulus exceeds the spin support")
    ann = (dist >= r) & (dist <= R)
    four = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    out = []
    for sign in (1, -1):
        mask = ann & (sg == sign)
        lab, n = ndimage.label(mask, structure=four)
        hit = False
        if n:
            inner = set(np.unique(lab[(dist <= r + dom.delta) & mask])) - {0}
            outer = set(np.unique(lab[(dist >= R - dom.delta) & mask])) - {0}
            hit = bool(inner & outer)
        out.append(hit)
    return tuple(out)


@dataclass
class OneArmFit:
    sizes: np.ndarray
    probs: np.ndarray
    errs: np.ndarray
    slope: float
    slope_err: float
    intercept: float


def one_arm_estimate(sizes, n_samples: int, rng_seed: int, *, sweeps: int = 2, stream0: int = 0) -> OneArmFit:
    """P(center joins the wired boundary cluster) across box sizes, with fit.

    For each L the box is an L x L square at unit mesh with all-plus boundary;
    the bond draw conditioned on the spins makes the event {center <-> boundary}
    exactly the wired one-arm event.  Returns a log-log fit whose slope should
    sit near -1/8.
    """
    sizes = np.asarray(sizes, dtype=int)
    probs, errs = [], []
    stream = stream0
    for L in sizes:
        shape = ShapeSpec.square(corner=0j, side=float(L), a=0j, b=L + 1j * L)
        dom = build_domain(shape, 1.0)
        center = np.array([L // 2, L // 2])
        c_idx = int(dom.interior_index_of(center[None, :])[0])
        region = Region.from_domain(dom, "plus", FieldSpec.zero())
        rng = make_rng(rng_seed, stream)
        stream += 1
        sampler = IsingSampler(region, rng)
        sampler.run(8)  # burn-in: cluster sweeps decorrelate in a few passes
        hits = 0
        for _ in range(n_samples):
            sampler.run(sweeps)
            sc = SpinConfig(dom, sampler.spins, boundary_spin_values(dom, "plus"), "plus")
            cfg = bonds_given_spins(sc, "wired", rng)
            lab = cfg.labels
            hits += int(cfg.forced[lab[c_idx]] == 1)
        p = hits / n_samples
        probs.append(p)
        errs.append(np.sqrt(max(p * (1 - p), 1e-12) / n_samples))
    probs = np.array(probs)
    errs = np.array(errs)
    slope, intercept, slope_err = loglog_fit(sizes.astype(float), probs, errs)
    return OneArmFit(sizes, probs, errs, slope, slope_err, intercept)
