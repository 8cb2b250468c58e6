# A small potential problem on a triangle: docsets, beta, the DP and the oracle.
# Run: python3 demos/potential_problem.py

from nearlytu import oracle
from nearlytu import pipeline as pl
from nearlytu.cographic import DirectedGraph, McippInstance, beta, docset_sum, docsets
from nearlytu.mcippdp import dp_solve, shift_normalize
from nearlytu.proximity import f_bound

G = DirectedGraph(3, ((0, 1), (1, 2), (2, 0)))

# docsets: vertex sets S with both S and its complement connected
print("docsets:", [sorted(S) for S in docsets(G)])
print("beta(G, (1, -1, 0)) =", beta(G, [1, -1, 0]))

# maximise y0 - y1 subject to y0 - y1 = 1 and every edge difference in [-1, 1]
inst = McippInstance.build(G, [1, -1, 0], [[1, -1, 0]], [1], [-1] * 3, [1] * 3, 1)
res = pl.solve_mcipp(inst)
print("pipeline:", res.status, res.value, res.x)

truth = oracle.brute_mcipp(G.n, G.edges, inst.p, inst.W, inst.d, inst.lower, inst.upper)
print("oracle:  ", truth.value, truth.x)

# the DP runs on the translate that puts an integer anchor at the origin
shifted, y_z = pl.anchor_mcipp(inst)
value, y = dp_solve(shifted)
print("anchored DP value", value, "+ offset", inst.value(y_z))

# the anchored optimum is a short sum of docset indicators; here the anchor is already optimal,
# so the sum is empty
budget = f_bound(shifted.k, shifted.delta)
masks = docset_sum(G, shift_normalize(y), budget)
print("as docsets:", [[v for v in range(G.n) if S >> v & 1] for S in masks], "budget", budget)
