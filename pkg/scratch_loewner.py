import time

import numpy as np

from isinglab.conformal import disk_to_h, square_to_h, polygon_to_h, domain_to_h
from isinglab.lattice import ShapeSpec, build_domain
from isinglab.ising import FieldSpec, sample_ising
from isinglab.interface import extract_interface
from isinglab import loewner as lw

t0 = time.time()

# --- disk map sanity
shape = ShapeSpec.disk(center=0.2 + 0.1j, radius=0.9, a=0.2 + 1.0j, b=0.2 - 0.8j)
dm = disk_to_h(shape, pad=0.02)
th = np.linspace(0, 2 * np.pi, 61)
circle = shape.center + (shape.radius + 0.02) * np.exp(1j * th)
imgs = dm(circle)
fin = np.isfinite(imgs)
assert np.max(np.abs(imgs.imag[fin]) / (1 + np.abs(imgs[fin]))) < 1e-9, "padded circle must map to R"
za = dm(np.array([shape.a]))[0]
zc = dm(np.array([shape.center]))[0]
print(f"disk: phi(a)={za:.4f} phi(center)={zc:.4f}")
assert abs(za) < 0.5  # near 0 (offset ~ pad)
assert abs(zc.imag - 1) < 1e-9
# conformality: numerical derivative vs deriv()
z0 = shape.center + 0.3 - 0.2j
h = 1e-6
num = (dm(np.array([z0 + h]))[0] - dm(np.array([z0 - h]))[0]) / (2 * h)
assert abs(num - dm.deriv(np.array([z0]))[0]) < 1e-5 * abs(num)

# --- square map sanity
sq = ShapeSpec.square(corner=0j, side=1.0, a=0j, b=1 + 1j)
sm = square_to_h(sq, pad=0.03)
edge = np.concatenate([
    np.linspace(-0.03 - 0.03j, 1.03 - 0.03j, 41),
    np.linspace(1.03 - 0.03j, 1.03 + 1.03j, 41),
    np.linspace(1.03 + 1.03j, -0.03 + 1.03j, 41),
    np.linspace(-0.03 + 1.03j, -0.03 - 0.03j, 41),
])
ie = sm(edge)
fin = np.isfinite(ie)
assert np.max(np.abs(ie.imag[fin]) / (1 + np.abs(ie[fin]))) < 1e-8
za, zc = sm(np.array([sq.a]))[0], sm(np.array([0.5 + 0.5j]))[0]
print(f"square: phi(a)={za:.4f} phi(center)={zc:.4f}")
assert abs(za) < 0.5 and abs(zc.imag - 1) < 1e-9
num = (sm(np.array([0.4 + 0.3j + h]))[0] - sm(np.array([0.4 + 0.3j - h]))[0]) / (2 * h)
assert abs(num - sm.deriv(np.array([0.4 + 0.3j]))[0]) < 1e-5 * abs(num)
# interior stays in H
ri = np.random.default_rng(0)
pts = ri.random(200) + 1j * ri.random(200)
assert np.all(sm(pts).imag > 0)

# --- vertical slit oracles
y = 0.8
slit = 1j * np.linspace(0.8 / 400, y, 400)
drv, chain = lw.extract_driving(slit, None)
print(f"slit: sup|W|={np.max(np.abs(drv.W)):.2e} hcap={drv.total_capacity:.6f} vs {y*y/4:.6f}")
assert np.max(np.abs(drv.W)) < 1e-3
assert abs(drv.total_capacity - y * y / 4) < 0.01 * (y * y / 4)
assert lw.hcap_of_hull(np.empty(0)) == 0.0
assert abs(lw.hcap_of_hull(slit) - y * y / 4) < 0.01 * y * y / 4
caps = chain.capacities()
assert np.all(np.diff(caps) > 0)
res, bound = chain.hydro_residual(), chain.hydro_bound()
print(f"slit hydro: residual={res:.3e} bound={bound:.3e}")
assert res <= bound

# --- kappa=0 forward = straight slit; roundtrip
sle0 = lw.sample_sle(0.0, 0.25, 0.25 / 300, 1)
assert np.max(np.abs(sle0.trace.real)) < 1e-12
drv0, _ = lw.extract_driving(sle0.trace, None)
assert np.max(np.abs(drv0.W)) < 1e-3
assert abs(drv0.total_capacity - 0.25) < 0.01

# --- kappa=3 driving variance (no trace)
T = 1.0
finals = np.array([lw.sample_sle(3.0, T, 1e-3, 7, stream=s, trace=False).driving[-1] for s in range(10_000)])
print(f"kappa=3: E[W_T^2]={np.mean(finals**2):.4f} (target 3)")
assert abs(np.mean(finals**2) - 3.0) < 0.1

# --- kappa=3 traces: stay in closed H, no self-crossing beyond the
# two-step corner-cut window (100 samples); kappa=6 must fail the same check
def self_crossing(z, min_sep=3):
    a, b = z[:-1], z[1:]
    n = len(a)
    i, j = np.triu_indices(n, k=1 + min_sep)

    def orient(p, q, r):
        return np.sign(((q - p) * np.conj(r - p)).imag)

    o1 = orient(a[i], b[i], a[j]) * orient(a[i], b[i], b[j])
    o2 = orient(a[j], b[j], a[i]) * orient(a[j], b[j], b[i])
    return bool(np.any((o1 < 0) & (o2 < 0)))

for s in range(100):
    sp = lw.sample_sle(3.0, 0.1, 1e-3, 11, stream=s)
    assert np.all(sp.trace.imag > -1e-12)
    assert not self_crossing(sp.trace), f"self-crossing in stream {s}"
n6 = sum(self_crossing(lw.sample_sle(6.0, 0.1, 1e-3, 11, stream=s).trace) for s in range(100))
assert n6 > 0, "the crossing detector must catch non-simple curves"
print(f"kappa=3 traces simple over 100 samples (kappa=6 control: {n6}/100 cross)")

# --- zip/unzip roundtrip on resolved simple curves
def forward_trace(chain):
    out = np.empty(len(chain.xs), dtype=complex)
    for k in range(len(chain.xs)):
        z = complex(chain.xs[k])
        for j in range(k, -1, -1):
            z = lw._slit_down_scalar(z, chain.xs[j], 2.0 * np.sqrt(chain.taus[j]))
        out[k] = z
    return out

s_arc = np.linspace(0.05, 2.2, 500)
arc = 0.5 * np.sin(s_arc) + 0.5j * (1 - np.cos(s_arc))
s_ray = np.linspace(1 / 400, 1.0, 400)
ray = s_ray * np.exp(1j * np.pi / 3)
worst = 0.0
for crv in (arc, ray, slit):
    drv_c, ch_c = lw.extract_driving(crv, None)
    assert np.all(np.diff(ch_c.capacities()) > 0)
    back = forward_trace(ch_c)
    rel = np.max(np.abs(back - crv) / (np.abs(crv) + 1e-9))
    flat = ch_c.map_to_h(crv)
    assert np.max(np.abs(flat.imag) / (1 + np.abs(flat))) < 1e-6, "chain must flatten its curve"
    worst = max(worst, rel)
assert worst < 1e-2, worst
print(f"zip/unzip roundtrip worst rel err: {worst:.2e}")
# slanted ray at angle pi/3 has exact driving sqrt(2 t)
drv_r, _ = lw.extract_driving(ray, None)
ratio = drv_r.W[-1] / np.sqrt(drv_r.t[-1])
print(f"ray driving W/sqrt(t) = {ratio:.4f} (target sqrt2 = {np.sqrt(2):.4f})")
assert abs(ratio - np.sqrt(2)) < 0.05

# --- lattice path end-to-end + stop_at_capacity + binary/CSV io
dom = build_domain(sq, 1 / 16)
cfg = sample_ising(dom, "dobrushin", FieldSpec.zero(), 30, 4)
path = extract_interface(cfg)
drv_l, ch_l = lw.extract_driving(path, dom)
print(f"lattice path: {path.n_steps} pts, capacity={drv_l.total_capacity:.4f}, maxjump={drv_l.max_jump:.3f}")
assert drv_l.total_capacity > 0.02
prefix = lw.stop_at_capacity(path, dom, 0.05)
dp, _ = lw.extract_driving(prefix, dom)
step_cap = np.max(np.diff(dp.t)) if len(dp.t) > 1 else 0
assert 0.05 <= dp.total_capacity <= 0.05 + step_cap + 1e-12
assert lw.stop_at_capacity(path, dom, 0.0).n_steps == 0
assert lw.stop_at_capacity(path, dom, 1e9).n_steps == path.n_steps
ch_l.to_binary("/tmp/chain.bin")
ch2 = lw.ConformalChain.from_binary("/tmp/chain.bin")
assert np.allclose(ch2.xs, ch_l.xs) and np.allclose(ch2.taus, ch_l.taus)
drv_l.to_csv("/tmp/drv.csv")
res, bound = ch_l.hydro_residual(), ch_l.hydro_bound()
print(f"lattice chain hydro: residual={res:.3e} bound={bound:.3e}")
assert res <= bound

# --- polygon SC map (L-shape), light exercise
L = ShapeSpec.polygon([0j, 2 + 0j, 2 + 1j, 1 + 1j, 1 + 2j, 0 + 2j], a=0j, b=1 + 2j)
pm = polygon_to_h(L, pad=0.02)
za = pm(np.array([L.a]))[0]
mid = pm(np.array([0.5 + 0.5j, 1.5 + 0.5j, 0.5 + 1.5j]))
print(f"L-shape: phi(a)={za:.4f} interior Im={np.round(mid.imag,3)}")
assert np.all(mid.imag > 0)
assert abs(za) < 1.0

print(f"ALL LOEWNER/CONFORMAL SMOKE TESTS PASSED in {time.time()-t0:.1f}s")
