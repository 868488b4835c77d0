"""The Gauss-map dual of the half Clifford torus, and conformal balancing.

Run:  python3 demos/dual_and_balance.py
"""
import numpy as np

from capflow import conformal as cf
from capflow import index_lab as il
from capflow import surfaces as sg

hc = sg.half_clifford_torus()
dual = il.dual_annulus(hc)
print(f"dual: eps={dual.epsilon}, R~={dual.R_tilde:.6f}, gamma~={dual.gamma_tilde:.6f}")
print("dual parameters of (pi/2, pi/3):", np.round(il.dual_parameters(np.pi / 2, np.pi / 3, 1), 12))

ident = il.dual_form_identity_check(hc, trials=10)
print(f"Q^A vs dual Q^A: {ident['max_index_dual']:.2e}   Q^A_* vs dual Q^S: {ident['max_index_energy']:.2e}")

# Unbalance the torus with a known map, then let the solver find its inverse.
y0 = np.array([0.0, 0.2, -0.1, 0.15])
m = cf.conf_cap_element(np.pi / 2, np.eye(4), y0)
pushed = sg.pushforward_surface(m, hc)
res = il.conformal_balance(pushed, lambda s: 1.0 / cf.conformal_factor(m, cf.phi(-y0, s.x)))
print(f"balancing: y={np.round(res.y, 10)} (expected {-y0}), residual {res.residual:.1e}, {res.iterations} Newton steps")
