"""Random-cluster couplings: FK sampling, ghost attachment, spin assignment.

The bond model lives at p = 1 - exp(-2 beta_c) with cluster weight 2.  A site
field H >= 0 couples through a ghost vertex: conditionally on the bonds, each
cluster C attaches to the ghost independently with probability
tanh(sum_{x in C} H_x), attached clusters are assigned +1, the rest get fair
coins.  The bond marginal of the field model reweights the plain measure by
a per-cluster cosh product; both directions are enumerable exactly on tiny
graphs, which is how this module is validated.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from ._util import BETA_C, P_C, make_rng
from .ising import FieldSpec, IsingSampler, Region, SpinConfig, boundary_spin_values
from .lattice import DIRS, DiscreteDomain, arc_neighborhood

FK_BOUNDARY_CONDITIONS = ("free", "wired", "two_wired")


class NegativeField(ValueError):
    """Ghost attachment requires H >= 0."""


class MissingGhost(ValueError):
    """Spin assignment under a field needs ghost flags first."""


class UnionFind:
    """Disjoint sets over 0..n-1 with union by rank and path compression."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: int, y: int) -> None:
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return
        if self.rank[rx] < self.rank[ry]:
            rx, ry = ry, rx
        self.parent[ry] = rx
        if self.rank[rx] == self.rank[ry]:
            self.rank[rx] += 1

    def labels(self) -> np.ndarray:
        roots = [self.find(x) for x in range(len(self.parent))]
        _, lab = np.unique(np.asarray(roots), return_inverse=True)
        return lab.astype(np.int32)


# ---------------------------------------------------------------------------
# edge sets and configurations


def fk_edge_list(domain: DiscreteDomain, bc: str):
    """Node-indexed edge list for the bond model under the given identification.

    Nodes 0..n-1 are interior vertices (row order); identified boundary
    super-nodes follow: `wired` appends one node for the whole vertex
    boundary, `two_wired` appends one node per arc (plus first).  Under
    `free` the boundary does not participate at all.
    """
    if bc not in FK_BOUNDARY_CONDITIONS:
        raise ValueError(f"unknown FK boundary condition {bc!r}")
    n = domain.n_interior
    gi, gj = domain.grid_index(domain.interior)
    int_id = domain._interior_id
    pairs = []
    for di, dj in ((1, 0), (0, 1)):
        nb = int_id[gi + di, gj + dj]
        ok = nb >= 0
        a = int_id[gi, gj][ok]
        pairs.append(np.column_stack([a, nb[ok]]))
    super_ids = {}
    if bc == "free":
        n_nodes = n
    elif bc == "wired":
        super_ids["wired"] = n
        n_nodes = n + 1
    else:
        super_ids["plus"] = n
        super_ids["minus"] = n + 1
        n_nodes = n + 2
    if bc != "free":
        bid = domain._boundary_id
        if bc == "two_wired":
            arc_code = np.zeros(domain.n_boundary, dtype=np.int8)
            arc_code[domain.boundary_index_of(domain.arc_plus)] = 1
            arc_code[domain.boundary_index_of(domain.arc_minus)] = -1
        for di, dj in DIRS:
            nb = bid[gi + di, gj + dj]
            ok = nb >= 0
            a = int_id[gi, gj][ok]
            if bc == "wired":
                tgt = np.full(ok.sum(), super_ids["wired"], dtype=np.int64)
            else:
                code = arc_code[nb[ok]]
                tgt = np.where(code > 0, super_ids["plus"], super_ids["minus"]).astype(np.int64)
            pairs.append(np.column_stack([a, tgt]))
    edges = np.concatenate(pairs, axis=0).astype(np.int32) if pairs else np.empty((0, 2), np.int32)
    return edges, n_nodes, super_ids


@dataclass(eq=False)
class EdgeConfig:
    """Bond configuration with its cluster partition and optional ghost flags."""

    domain: DiscreteDomain
    bc: str
    edges: np.ndarray  # (n_e, 2) int32 node ids
    omega: np.ndarray  # (n_e,) bool
    labels: np.ndarray  # (n_nodes,) int32 cluster ids
    n_clusters: int
    sizes: np.ndarray  # interior-vertex count per cluster
    forced: np.ndarray  # per cluster: +1 / -1 boundary identification, else 0
    ghost_flags: np.ndarray | None = None
    H: np.ndarray | None = None  # per-interior field used for the flags

    @property
    def n_interior(self) -> int:
        return self.domain.n_interior

    def cluster_of_interior(self) -> np.ndarray:
        return self.labels[: self.n_interior]

    def verify_clusters(self) -> bool:
        """Structural self-check: union-find recomputation matches labels."""
        n_nodes = len(self.labels)
        uf = UnionFind(n_nodes)
        for (a, b), o in zip(self.edges.tolist(), self.omega.tolist()):
            if o:
                uf.union(a, b)
        lab = uf.labels()
        # same partition iff the label pairing is a bijection
        pairs = set(zip(lab.tolist(), self.labels.tolist()))
        return len(pairs) == len(set(lab.tolist())) == len(set(self.labels.tolist()))


def build_edge_config(domain: DiscreteDomain, bc: str, omega: np.ndarray) -> EdgeConfig:
    edges, n_nodes, super_ids = fk_edge_list(domain, bc)
    omega = np.asarray(omega, dtype=bool)
    if omega.shape != (len(edges),):
        raise ValueError("omega length does not match the edge list")
    if omega.any():
        sel = omega
        adj = sparse.coo_matrix(
            (np.ones(int(sel.sum()), dtype=np.int8), (edges[sel, 0], edges[sel, 1])),
            shape=(n_nodes, n_nodes),
        )
        n_clusters, labels = csgraph.connected_components(adj, directed=False)
    else:
        n_clusters, labels = n_nodes, np.arange(n_nodes, dtype=np.int32)
    sizes = np.bincount(labels[: domain.n_interior], minlength=n_clusters)
    forced = np.zeros(n_clusters, dtype=np.int8)
    if "wired" in super_ids:
        forced[labels[super_ids["wired"]]] = 1
    if "plus" in super_ids:
        forced[labels[super_ids["plus"]]] = 1
    if "minus" in super_ids:
        if forced[labels[super_ids["minus"]]] == 1:
            raise ValueError("the two identified arcs are connected; conditioned measure violated")
        forced[labels[super_ids["minus"]]] = -1
    return EdgeConfig(
        domain=domain,
        bc=bc,
        edges=edges,
        omega=omega,
        labels=np.asarray(labels, dtype=np.int32),
        n_clusters=int(n_clusters),
        sizes=sizes,
        forced=forced,
    )


# ---------------------------------------------------------------------------
# sampling


def sample_fk(
    domain: DiscreteDomain,
    bc: str,
    n_sweeps: int,
    rng_seed: int,
    *,
    stream: int = 0,
    method: str = "spin",
) -> EdgeConfig:
    """Approximate sample of the bond measure at p_c.

    method 'spin' runs the spin-chain sampler with the matching boundary
    condition and opens same-spin bonds with probability p_c (the coupling's
    conditional bond law) -- exact given an equilibrated spin sample, and fast.
    method 'heatbath' is the literal single-bond chain with connectivity
    queries; quadratic and intended for tiny cross-validation graphs.
    """
    if n_sweeps < 1:
        raise ValueError("n_sweeps must be >= 1")
    if bc not in ("free", "wired"):
        raise ValueError("sample_fk draws free or wired configurations")
    rng = make_rng(rng_seed, stream)
    if method == "heatbath":
        return _sample_fk_heatbath(domain, bc, n_sweeps, rng)
    spin_bc = "free" if bc == "free" else "plus"
    region = Region.from_domain(domain, spin_bc, FieldSpec.zero())
    sampler = IsingSampler(region, rng)
    sampler.run(n_sweeps)
    cfg = SpinConfig(domain, sampler.spins, boundary_spin_values(domain, spin_bc), spin_bc)
    return bonds_given_spins(cfg, bc, rng)


def bonds_given_spins(cfg: SpinConfig, bc: str, rng: np.random.Generator) -> EdgeConfig:
    """Conditional bond draw: open same-spin edges independently at p_c."""
    domain = cfg.domain
    edges, n_nodes, super_ids = fk_edge_list(domain, bc)
    node_spins = np.zeros(n_nodes, dtype=np.int8)
    node_spins[: domain.n_interior] = cfg.interior_spins
    for name, node in super_ids.items():
        node_spins[node] = 1 if name in ("wired", "plus") else -1
    same = node_spins[edges[:, 0]] == node_spins[edges[:, 1]]
    omega = same & (rng.random(len(edges)) < P_C)
    return build_edge_config(domain, bc, omega)


def sample_fk_dobrushin(domain: DiscreteDomain, n_sweeps: int, rng_seed: int, *, stream: int = 0) -> EdgeConfig:
    """Two-wired bond sample conditioned on the arcs not connecting.

    Drawing spins with the mixed-arc condition and then bonds given spins
    realizes the conditioned measure directly (opposite-spin arcs can never
    join through same-spin bonds), so no rejection loop is needed.
    """
    rng = make_rng(rng_seed, stream)
    region = Region.from_domain(domain, "dobrushin", FieldSpec.zero())
    sampler = IsingSampler(region, rng)
    sampler.run(n_sweeps)
    cfg = SpinConfig(domain, sampler.spins, boundary_spin_values(domain, "dobrushin"), "dobrushin")
    return bonds_given_spins(cfg, "two_wired", rng)


def _sample_fk_heatbath(domain: DiscreteDomain, bc: str, n_sweeps: int, rng: np.random.Generator) -> EdgeConfig:
    edges, n_nodes, _ = fk_edge_list(domain, bc)
    n_e = len(edges)
    omega = rng.random(n_e) < P_C
    adj: list[set] = [set() for _ in range(n_nodes)]  # open multiedge counts
    for k in np.flatnonzero(omega):
        a, b = edges[k]
        adj[a].add((k, b))
        adj[b].add((k, a))

    def connected_without(a: int, b: int, skip: int) -> bool:
        if a == b:
            return True
        seen = {a}
        stack = [a]
        while stack:
            u = stack.pop()
            for (k, v) in adj[u]:
                if k == skip or v in seen:
                    continue
                if v == b:
                    return True
                seen.add(v)
                stack.append(v)
        return False

    p_same = P_C
    p_split = P_C / (P_C + 2.0 * (1.0 - P_C))
    for _ in range(n_sweeps):
        for k in rng.permutation(n_e):
            a, b = int(edges[k, 0]), int(edges[k, 1])
            if omega[k]:
                adj[a].discard((k, b))
                adj[b].discard((k, a))
            p = p_same if connected_without(a, b, k) else p_split
            omega[k] = rng.random() < p
            if omega[k]:
                adj[a].add((k, b))
                adj[b].add((k, a))
    return build_edge_config(domain, bc, omega)


# ---------------------------------------------------------------------------
# ghost attachment and spin assignment


def cluster_field_sums(cfg: EdgeConfig, H_per_vertex: np.ndarray) -> np.ndarray:
    H = np.broadcast_to(np.asarray(H_per_vertex, dtype=float), (cfg.n_interior,))
    return np.bincount(cfg.cluster_of_interior(), weights=H, minlength=cfg.n_clusters)


def attach_ghost(cfg: EdgeConfig, H_per_vertex, rng_seed: int, *, stream: int = 0) -> EdgeConfig:
    """Flag clusters that join the ghost vertex.

    Unconstrained clusters flag independently with probability tanh(S_C),
    S_C = sum of H over the cluster's interior vertices.  A plus-identified
    boundary cluster flags with probability 1 - exp(-2 S_C) (its spin is +1
    regardless); a minus-identified cluster can never flag.
    """
    H = np.broadcast_to(np.asarray(H_per_vertex, dtype=float), (cfg.n_interior,)).copy()
    if np.any(H < 0):
        raise NegativeField("ghost coupling requires H >= 0")
    rng = make_rng(rng_seed, stream)
    S = cluster_field_sums(cfg, H)
    p = np.where(cfg.forced == 0, np.tanh(S), np.where(cfg.forced > 0, -np.expm1(-2.0 * S), 0.0))
    flags = rng.random(cfg.n_clusters) < p
    return replace(cfg, ghost_flags=flags, H=H)


def assign_spins(cfg: EdgeConfig, bc: str | None = None, rng_seed: int = 0, *, stream: int = 0) -> SpinConfig:
    """Cluster spins: forced/ghost-flagged clusters are pinned, the rest flip coins."""
    if bc is not None and bc != cfg.bc:
        raise ValueError(f"mismatched boundary condition: config has {cfg.bc!r}")
    if cfg.ghost_flags is None:
        if cfg.H is not None and np.any(cfg.H > 0):
            raise MissingGhost("attach_ghost must run before spins are assigned under a field")
        flags = np.zeros(cfg.n_clusters, dtype=bool)
    else:
        flags = cfg.ghost_flags
    rng = make_rng(rng_seed, stream)
    signs = (2 * rng.integers(0, 2, size=cfg.n_clusters) - 1).astype(np.int8)
    signs[flags & (cfg.forced == 0)] = 1
    signs[cfg.forced > 0] = 1
    signs[cfg.forced < 0] = -1
    interior = signs[cfg.cluster_of_interior()]
    spin_bc = {"free": "free", "wired": "plus", "two_wired": "dobrushin"}[cfg.bc]
    return SpinConfig(cfg.domain, interior, boundary_spin_values(cfg.domain, spin_bc), spin_bc)


def log_fk_marginal_weight(cfg: EdgeConfig, H_per_vertex) -> float:
    """log of the bond-marginal reweighting under the field.

    Free clusters contribute log cosh(S_C); clusters pinned to a sign
    contribute +-S_C directly (their spin sum is deterministic).
    """
    H = np.broadcast_to(np.asarray(H_per_vertex, dtype=float), (cfg.n_interior,))
    if np.any(H < 0):
        raise NegativeField("marginal weight defined for H >= 0")
    S = cluster_field_sums(cfg, H)
    free = cfg.forced == 0
    out = float(np.sum(np.logaddexp(S[free], -S[free]) - np.log(2.0)))
    out += float(np.sum(cfg.forced * S))
    return out


def fk_marginal_weight(cfg: EdgeConfig, H_per_vertex) -> float:
    return float(np.exp(min(log_fk_marginal_weight(cfg, H_per_vertex), 700.0)))


# ---------------------------------------------------------------------------
# exact enumeration (tiny graphs): oracle routes for the coupling identities


def _enumerate_omegas(n_e: int) -> np.ndarray:
    k = np.arange(2**n_e, dtype=np.int64)[:, None]
    return ((k >> np.arange(n_e)[None, :]) & 1).astype(bool)


def _try_build(domain: DiscreteDomain, bc: str, omega: np.ndarray) -> EdgeConfig | None:
    """As build_edge_config, but None when the two-arc disconnection fails."""
    try:
        return build_edge_config(domain, bc, omega)
    except ValueError:
        return None


def fk_log_weight(cfg: EdgeConfig) -> float:
    """log of 2^{#unconstrained clusters} p^{o} (1-p)^{c} for one bond state."""
    n_open = int(cfg.omega.sum())
    n_free_clusters = int(np.sum(cfg.forced == 0))
    return (
        n_free_clusters * np.log(2.0)
        + n_open * np.log(P_C)
        + (len(cfg.omega) - n_open) * np.log1p(-P_C)
    )


def enumerate_fk_distribution(domain: DiscreteDomain, bc: str) -> tuple:
    """All bond states with exact probabilities (tiny graphs only)."""
    edges, _, _ = fk_edge_list(domain, bc)
    if len(edges) > 22:
        raise ValueError("edge set too large for exhaustive enumeration")
    omegas = _enumerate_omegas(len(edges))
    logw = np.full(len(omegas), -np.inf)
    for i, om in enumerate(omegas):
        cfg = _try_build(domain, bc, om)
        if cfg is not None:
            logw[i] = fk_log_weight(cfg)
    w = np.exp(logw - logw.max())
    return omegas, w / w.sum()


def enumerate_es_spin_law(domain: DiscreteDomain, bc: str, H_per_vertex) -> np.ndarray:
    """Exact spin law of the full coupling pipeline, by enumeration.

    Sums over every bond state (weighted by the field-coupled bond marginal)
    and every cluster sign pattern with its flag/coin probability.  Returns
    probabilities indexed like ExactTable assignments (bit i = interior row i).
    """
    H = np.broadcast_to(np.asarray(H_per_vertex, dtype=float), (domain.n_interior,))
    if np.any(H < 0):
        raise NegativeField("enumeration follows the H >= 0 coupling")
    edges, _, _ = fk_edge_list(domain, bc)
    omegas = _enumerate_omegas(len(edges))
    n = domain.n_interior
    out = np.zeros(2**n)
    spins_matrix = (2 * ((np.arange(2**n, dtype=np.int64)[:, None] >> np.arange(n)[None, :]) & 1) - 1).astype(
        np.int8
    )
    total = 0.0
    for om in omegas:
        cfg = _try_build(domain, bc, om)
        if cfg is None:
            continue
        w_bond = np.exp(fk_log_weight(cfg) + log_fk_marginal_weight(cfg, H))
        total += w_bond
        S = cluster_field_sums(cfg, H)
        lab = cfg.cluster_of_interior()
        # per-assignment consistency: spins constant on clusters, forced respected
        p_plus = np.where(cfg.forced == 0, 0.5 + 0.5 * np.tanh(S), (cfg.forced > 0).astype(float))
        for idx in range(2**n):
            s = spins_matrix[idx]
            prob = 1.0
            ok = True
            for c in range(cfg.n_clusters):
                members = s[lab == c]
                if len(members) == 0:
                    if cfg.forced[c] != 0:
                        continue  # pure super-node cluster: spin pinned, no freedom
                    prob *= 1.0  # empty free cluster cannot occur off super nodes
                    continue
                if np.any(members != members[0]):
                    ok = False
                    break
                sign = members[0]
                if cfg.forced[c] != 0:
                    if sign != cfg.forced[c]:
                        ok = False
                        break
                    continue
                prob *= p_plus[c] if sign > 0 else 1.0 - p_plus[c]
            if ok:
                out[idx] += w_bond * prob
    return out / total


def enumerate_omega_marginal_two_routes(domain: DiscreteDomain, bc: str, H_per_vertex) -> tuple:
    """Bond marginal of the field coupling, computed two independent ways.

    Route A expands the ghost bonds explicitly: joint states (omega, omega*)
    weighted by 2^{#clusters off the ghost} with ghost-bond probabilities
    1 - exp(-2 H_x).  Route B reweights the plain bond measure by the
    per-cluster cosh product.  Both are normalized; they must agree to
    machine precision.
    """
    H = np.broadcast_to(np.asarray(H_per_vertex, dtype=float), (domain.n_interior,))
    if np.any(H < 0):
        raise NegativeField("enumeration follows the H >= 0 coupling")
    edges, n_nodes, super_ids = fk_edge_list(domain, bc)
    n_e, n = len(edges), domain.n_interior
    omegas = _enumerate_omegas(n_e)
    ghost_states = _enumerate_omegas(n)
    p_star = -np.expm1(-2.0 * H)

    # ghost node appended after all graph nodes
    g = n_nodes
    forced_plus = [super_ids[k] for k in ("wired", "plus") if k in super_ids]
    forced_minus = [super_ids["minus"]] if "minus" in super_ids else []

    route_a = np.zeros(len(omegas))
    for i, om in enumerate(omegas):
        if bc == "two_wired" and _try_build(domain, bc, om) is None:
            continue  # arcs connect: outside the conditioned state space
        for gs in ghost_states:
            # ghost-bond probability factor
            pf = float(np.prod(np.where(gs, p_star, 1.0 - p_star)))
            if pf == 0.0:
                continue
            uf = UnionFind(n_nodes + 1)
            for k in np.flatnonzero(om):
                uf.union(int(edges[k, 0]), int(edges[k, 1]))
            for x in np.flatnonzero(gs):
                uf.union(int(x), g)
            for node in forced_plus:
                uf.union(node, g)  # plus identification shares the ghost sign
            roots = {uf.find(x) for x in range(n_nodes + 1)}
            ghost_root = uf.find(g)
            minus_roots = {uf.find(node) for node in forced_minus}
            if ghost_root in minus_roots:
                continue  # a ghost bond reached a minus-pinned cluster
            n_free = len(roots - {ghost_root} - minus_roots)
            w_edges = P_C ** om.sum() * (1 - P_C) ** (n_e - om.sum())
            route_a[i] += pf * w_edges * 2.0**n_free
    route_a /= route_a.sum()

    route_b = np.zeros(len(omegas))
    for i, om in enumerate(omegas):
        cfg = _try_build(domain, bc, om)
        if cfg is None:
            continue
        route_b[i] = np.exp(fk_log_weight(cfg) + log_fk_marginal_weight(cfg, H))
    route_b /= route_b.sum()
    return route_a, route_b


# ---------------------------------------------------------------------------
# crossing probe (cluster-chain crossings of a boundary band)


@dataclass(frozen=True)
class RectSpec:
    """Band around one boundary arc: distances in (eta/2, eta], ends near the marks."""

    eta: float
    side: str = "minus"


def crossing_probe(cfg: EdgeConfig, rect: RectSpec, K: int, size_floor: float) -> bool:
    """True iff <= K ghost-flagged clusters of size >= size_floor chain across the band.

    The chain uses open edges inside the band and closed band edges between
    segments of different clusters; it must join the band's two ends (near
    the a-mark and b-mark).  Segment count along the path upper-bounds the
    distinct-cluster count, so the hop bound is conservative.
    """
    if cfg.ghost_flags is None:
        return False
    domain = cfg.domain
    band_outer = arc_neighborhood(domain, rect.side, rect.eta)
    band_inner = arc_neighborhood(domain, rect.side, rect.eta / 2.0)
    inner_keys = set(map(tuple, band_inner.tolist()))
    band = np.array([v for v in band_outer.tolist() if tuple(v) not in inner_keys], dtype=np.int64)
    if len(band) == 0:
        return False

    qual_clusters = np.flatnonzero(cfg.ghost_flags & (cfg.sizes >= size_floor) & (cfg.forced == 0))
    if len(qual_clusters) == 0:
        return False
    qual = np.zeros(cfg.n_clusters, dtype=bool)
    qual[qual_clusters] = True

    ids = domain.interior_index_of(band)
    lab = cfg.cluster_of_interior()
    keep = qual[lab[ids]]
    band = band[keep]
    ids = ids[keep]
    if len(band) == 0:
        return False

    # open-edge segments within the band
    in_band = np.zeros(domain.n_interior, dtype=bool)
    in_band[ids] = True
    interior_edge = (cfg.edges[:, 0] < domain.n_interior) & (cfg.edges[:, 1] < domain.n_interior)
    e_int = cfg.edges[interior_edge]
    o_int = cfg.omega[interior_edge]
    both = in_band[e_int[:, 0]] & in_band[e_int[:, 1]]
    open_e = e_int[both & o_int]
    closed_e = e_int[both & ~o_int]
    n = domain.n_interior
    if len(open_e):
        adj = sparse.coo_matrix((np.ones(len(open_e)), (open_e[:, 0], open_e[:, 1])), shape=(n, n))
        _, seg_all = csgraph.connected_components(adj, directed=False)
    else:
        seg_all = np.arange(n, dtype=np.int32)
    segs, seg_of = np.unique(seg_all[ids], return_inverse=True)
    n_seg = len(segs)
    seg_id = np.full(n, -1, dtype=np.int64)
    seg_id[ids] = seg_of

    # segment graph: closed band edges between different clusters
    links = []
    for a, b in closed_e.tolist():
        sa, sb = seg_id[a], seg_id[b]
        if sa >= 0 and sb >= 0 and sa != sb and lab[a] != lab[b]:
            links.append((sa, sb))

    pos = domain.delta * band.astype(float)
    a_pos = np.array([domain.a_mark[0], domain.a_mark[1]], dtype=float) * domain.delta
    b_pos = np.array([domain.b_mark[0], domain.b_mark[1]], dtype=float) * domain.delta
    near_a = np.linalg.norm(pos - a_pos, axis=1) <= rect.eta
    near_b = np.linalg.norm(pos - b_pos, axis=1) <= rect.eta
    start_segs = set(seg_of[near_a].tolist())
    goal_segs = set(seg_of[near_b].tolist())
    if not start_segs or not goal_segs:
        return False

    neigh = [[] for _ in range(n_seg)]
    for sa, sb in links:
        neigh[sa].append(sb)
        neigh[sb].append(sa)
    # BFS counting segments along the chain (each segment = one cluster visit)
    frontier = set(start_segs)
    visited = set(frontier)
    used = 1
    while True:
        if used > K:
            return False
        if frontier & goal_segs:
            return True
        nxt = {t for s in frontier for t in neigh[s]} - visited
        if not nxt:
            return False
        visited |= nxt
        frontier = nxt
        used += 1
