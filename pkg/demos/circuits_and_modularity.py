# Circuits of a TU configuration, one weight row on top, and a conformal decomposition.
# Run: python3 demos/circuits_and_modularity.py

from nearlytu import configcore as cc
from nearlytu import oracle
from nearlytu.cographic import DirectedGraph, incidence_matrix

# incidence matrix of K4 minus one edge, with vertex 0 dropped so the rows are independent
G = DirectedGraph(4, ((0, 1), (1, 2), (2, 0), (1, 3), (3, 2)))
A = incidence_matrix(G, drop=0)
conf = cc.Configuration.from_matrix(A, m=len(A))
print("A =", A)
print("TU:", cc.is_totally_unimodular(conf))

# circuits are the directed cycles of G; every entry is -1, 0 or 1
for c in cc.positive_circuits(conf):
    print("circuit", c)

# stacking a weight row keeps subdeterminants small exactly when circuit weights stay small
w = [1, 0, 0, 1, 0]
scan = oracle.max_abs_subdeterminant(A + [w])
print("largest |subdeterminant| of [A; w]:", scan)
for delta in (1, 2, 3):
    print(f"  delta={delta}: circuit test says {cc.is_totally_delta_modular_stacked(conf, w, delta)}")

# x2 - x splits into circuits that never disagree in sign
x = [0, 0, 0, 0, 0]
x2 = [2, 1, 2, 1, 1]
terms = cc.conformal_decompose(conf, x, x2, [0] * 5, [2] * 5)
for c, lam in terms:
    print(f"  {lam} * {c}")
print("pairwise conformal:", all(cc.conformal(a, b) for a, _ in terms for b, _ in terms))
