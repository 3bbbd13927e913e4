import numpy as np

from isinglab.lattice import ShapeSpec, build_domain
from isinglab.ising import FieldSpec, exact_distribution
from isinglab import coupling as cp

# thin rectangle: interior is a 3-vertex path
shape = ShapeSpec.polygon([0 + 0j, 4 + 0j, 4 + 2j, 0 + 2j], a=0 + 0j, b=4 + 2j)
dom = build_domain(shape, 1.0)
print("interior:", dom.interior.tolist())
assert dom.n_interior == 3

H = 0.3
field = FieldSpec(h=H, exponent=0.0, g=1.0, c_sigma_inv=1.0)  # site value exactly 0.3 at delta=1
print("site values:", field.site_values(dom.delta, dom.positions(dom.interior)))

for bc_fk, bc_spin in (("free", "free"), ("wired", "plus")):
    law = cp.enumerate_es_spin_law(dom, bc_fk, H)
    table = exact_distribution(dom, bc_spin, field)
    tv = 0.5 * np.abs(law - table.probabilities).sum()
    print(f"{bc_fk}: TV(pipeline law, exact spin law) = {tv:.3e}")
    assert tv < 1e-10, tv

for bc in ("free", "wired", "two_wired"):
    ra, rb = cp.enumerate_omega_marginal_two_routes(dom, bc, H)
    err = np.abs(ra - rb).max()
    print(f"{bc}: omega-marginal two-route max diff = {err:.3e}")
    assert err < 1e-12, (bc, err)

# weighted stochastic pipeline vs exact magnetization (free bc)
table = exact_distribution(dom, "free", field)
m_exact = table.expectation(table.spins_matrix().sum(axis=1))
num = den = 0.0
nn = 4000
for i in range(nn):
    cfg = cp.sample_fk(dom, "free", 6, 77, stream=3 * i)
    assert cfg.verify_clusters()
    cfg = cp.attach_ghost(cfg, H, 77, stream=3 * i + 1)
    sc = cp.assign_spins(cfg, rng_seed=77, stream=3 * i + 2)
    w = cp.fk_marginal_weight(cfg, H)
    num += w * sc.interior_spins.sum()
    den += w
print(f"weighted pipeline magnetization {num/den:.4f} vs exact {m_exact:.4f}")
assert abs(num / den - m_exact) < 0.05

# heat-bath reference chain matches enumerated bond law (free bc)
omegas, probs = cp.enumerate_fk_distribution(dom, "free")
counts = np.zeros(len(omegas))
code = {tuple(om.tolist()): i for i, om in enumerate(omegas)}
for i in range(3000):
    cfg = cp._sample_fk_heatbath(dom, "free", 4, cp.make_rng(5, i))
    counts[code[tuple(cfg.omega.tolist())]] += 1
freq = counts / counts.sum()
tv = 0.5 * np.abs(freq - probs).sum()
print(f"heat-bath chain vs exact bond law TV = {tv:.4f} (MC noise)")
assert tv < 0.05

# spin-route sampler matches the same bond law
counts = np.zeros(len(omegas))
for i in range(3000):
    cfg = cp.sample_fk(dom, "free", 8, 11, stream=i)
    counts[code[tuple(cfg.omega.tolist())]] += 1
freq = counts / counts.sum()
tv = 0.5 * np.abs(freq - probs).sum()
print(f"spin-route sampler vs exact bond law TV = {tv:.4f} (MC noise)")
assert tv < 0.05

# conditioned two-wired draw on a small square
shape2 = ShapeSpec.square(corner=0 + 0j, side=1.0, a=0 + 0j, b=1 + 1j)
dom2 = build_domain(shape2, 1 / 5)
cfg2 = cp.sample_fk_dobrushin(dom2, 30, 9)
assert cfg2.verify_clusters()
assert (cfg2.forced == 1).sum() >= 1 and (cfg2.forced == -1).sum() >= 1
sc2 = cp.assign_spins(cfg2, rng_seed=1)
assert sc2.bc == "dobrushin"
print("two-wired conditioned draw OK; clusters:", cfg2.n_clusters)

# crossing probe smoke: all-open band should cross with K large
cfg3 = cp.build_edge_config(dom2, "free", np.ones(len(cp.fk_edge_list(dom2, "free")[0]), bool))
cfg3 = cp.attach_ghost(cfg3, 5.0, 3)
print("flags:", cfg3.ghost_flags, "sizes:", cfg3.sizes)
r = cp.RectSpec(eta=0.45, side="minus")
print("crossing (one giant flagged cluster):", cp.crossing_probe(cfg3, r, K=3, size_floor=1))
cfg4 = cp.build_edge_config(dom2, "free", np.zeros(len(cp.fk_edge_list(dom2, "free")[0]), bool))
cfg4 = cp.attach_ghost(cfg4, 0.0, 3)
print("crossing (all closed, H=0):", cp.crossing_probe(cfg4, r, K=3, size_floor=1))
print("ALL COUPLING SMOKE TESTS PASSED")
