"""A conformal flow on S^3, the caps it carries, and the energies it lowers.

Run:  python3 demos/flow_and_energy.py
"""
import numpy as np

from capflow import conformal as cf
from capflow import functionals as fn
from capflow import surfaces as sg

# The flow generated by u_a(x) = <x, a> is a one-parameter family of Moebius maps.
spec = cf.FlowSpec(cf.SpherePoint.normalized([0.3, 0.8, 0.0, 0.5]))
x = cf.random_sphere_point(np.random.default_rng(0), 4)
print("u_a along the flow vs tanh(t + artanh u_0):")
for t in (0.0, 0.5, 1.0, 2.0):
    print(f"  t={t:.1f}  u={float(spec.u(cf.flow_point(spec, t, x))):+.12f}  closed={cf.flow_potential(float(spec.u(x)), t):+.12f}")

# A cap about e0 moves and changes radius; horizontal directions keep the hemisphere.
cap = cf.Cap.about_e0(1.0)
for t in (0.0, 0.5, 1.0):
    moved = cf.flow_cap(spec, t, cap)
    print(f"  cap at t={t:.1f}: radius {moved.radius:.6f}, center {np.round(moved.center.coords, 4)}")

# Along a flow, the capillary energy of the half Clifford torus never goes up.
hc = sg.half_clifford_torus()
trace = fn.monotonicity_trace(hc, cf.FlowSpec(cf.SpherePoint.normalized([0.2, 1.0, 0.3, 0.0])), np.linspace(0, 1, 6))
print(f"\nmonotone quantity ({trace.mode}):", np.round(trace.monotone, 6), "ok" if trace.ok else "VIOLATED")

# Cap-preserving images of the half Clifford torus have energy at most its own.
rng = np.random.default_rng(1)
base = fn.energy(hc).E
excess = [fn.energy(sg.pushforward_surface(cf.random_cap_element(rng, hc.radius), hc)).E - base for _ in range(8)]
print(f"energy of the half Clifford torus {base:.6f}; largest excess over 8 random images {max(excess):+.2e}")
