"""Morse and spectral indices of three minimal surfaces by P1 finite elements.

Run:  python3 demos/index_counts.py   (about 20 s)
"""
from capflow import index_lab as il
from capflow import surfaces as sg

for surface in (sg.half_equator(), sg.half_clifford_torus(), sg.clifford_torus()):
    for flavor in il.FLAVORS:
        rep = il.build_index_problem(surface, flavor, h=0.05).index()
        print(f"{surface.name:22s} {flavor:9s} ind={rep.ind} (a={rep.a}, b={rep.b}) robin_count={rep.ind_robin} nullity={rep.nullity}")

# The summary that compares the counts with the index theorems.
rep = il.urbano_report(sg.half_clifford_torus())
print("\nhalf Clifford torus:", {k: rep[k] for k in ("ind", "ind0_modified", "dichotomy_branch", "boundary_integral_qA")})
