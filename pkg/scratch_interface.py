import numpy as np

from isinglab.lattice import ShapeSpec, build_domain
from isinglab.ising import FieldSpec, SpinConfig, boundary_spin_values, sample_ising
from isinglab import interface as itf

shape = ShapeSpec.square(corner=0j, side=1.0, a=0j, b=1 + 1j)
dom = build_domain(shape, 1 / 8)


def constant_config(dom, s):
    spins = np.full(dom.n_interior, s, dtype=np.int8)
    return SpinConfig(dom, spins, boundary_spin_values(dom, "dobrushin"), "dobrushin")


def check_path(dom, config, path):
    sg, origin = itf._spin_grid(config)
    m = path.medial_points()
    for k in range(path.n_steps):
        (pi, pj), (mi, mj) = path.crossings[k]
        sp = sg[pi - origin[0], pj - origin[1]]
        sm = sg[mi - origin[0], mj - origin[1]]
        assert sp == 1 and sm == -1, (k, sp, sm)
        assert abs(pi - mi) + abs(pj - mj) == 1
    steps = np.linalg.norm(np.diff(m, axis=0), axis=1)
    assert np.all(np.isclose(steps, 1.0) | np.isclose(steps, np.sqrt(2) / 2)), set(np.round(steps, 3))
    vl, vr = path.flank_vertices()
    sl = {tuple(v) for v in vl.tolist()}
    sr = {tuple(v) for v in vr.tolist()}
    assert not (sl & sr)
    allv = set()
    for k in range(path.n_steps):
        for side in (0, 1):
            v = path.crossings[k, side]
            if dom.code_at(v[None, :])[0] == 1:
                allv.add(tuple(v.tolist()))
    assert sl | sr == allv


for s, name in ((-1, "all-minus"), (1, "all-plus")):
    cfg = constant_config(dom, s)
    path = itf.extract_interface(cfg)
    check_path(dom, cfg, path)
    nl, nr, scaled = itf.adjacency_counts(path)
    print(f"{name}: steps={path.n_steps} nL={nl} nR={nr} scaled={scaled:+.4f} turns={path.turns[:12]}...")
    if s == -1:
        assert nl == 0 and nr > 0  # curve hugs the plus arc; only minus flanks are interior
    else:
        assert nr == 0 and nl > 0

rng_lens = []
for seed in range(12):
    cfg = sample_ising(dom, "dobrushin", FieldSpec.zero(), 25, seed)
    path = itf.extract_interface(cfg)
    check_path(dom, cfg, path)
    rng_lens.append(path.n_steps)
    cfg2 = sample_ising(dom, "dobrushin", FieldSpec.zero(), 25, seed)
    path2 = itf.extract_interface(cfg2)
    assert np.array_equal(path.crossings, path2.crossings)  # deterministic given spins
print("random interfaces OK, lengths:", rng_lens)

# finer mesh for scale
dom2 = build_domain(shape, 1 / 32)
cfg = sample_ising(dom2, "dobrushin", FieldSpec.zero(), 40, 3)
path = itf.extract_interface(cfg)
check_path(dom2, cfg, path)
print(f"delta=1/32: steps={path.n_steps}")
path.to_csv("/tmp/iface.csv")

# two-arm indicator
cfgp = constant_config(dom2, 1)
assert itf.two_arm_indicator(cfgp, 0.5 + 0.5j, 0.1, 0.3) == (True, False)
spins = ((dom2.interior.sum(axis=1) % 2) * 2 - 1).astype(np.int8)
cfg_cb = SpinConfig(dom2, spins, boundary_spin_values(dom2, "dobrushin"), "dobrushin")
assert itf.two_arm_indicator(cfg_cb, 0.5 + 0.5j, 0.1, 0.3) == (False, False)
try:
    itf.two_arm_indicator(cfgp, 0.5 + 0.5j, 0.1, 0.8)
    raise SystemExit("expected AnnulusOutOfDomain")
except itf.AnnulusOutOfDomain:
    pass
cfg_r = sample_ising(dom2, "dobrushin", FieldSpec.zero(), 40, 9)
print("two-arm on a random config:", itf.two_arm_indicator(cfg_r, 0.5 + 0.5j, 1 / 16, 0.4))

# one-arm decay (coarse, quick)
fit = itf.one_arm_estimate([8, 16, 32], 300, 5)
print(f"one-arm probs={np.round(fit.probs,3)} slope={fit.slope:+.3f} +- {fit.slope_err:.3f}")
assert -0.25 < fit.slope < -0.05
print("ALL INTERFACE SMOKE TESTS PASSED")
