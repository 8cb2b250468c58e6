"""Exact solvers for integer programs whose constraint matrix is totally
unimodular apart from a few extra weight rows.

Modules, bottom up: ``ratcore`` (exact rationals and simplex), ``configcore``
(configurations, circuits, conformal decomposition), ``proximity`` (LP,
anchoring, reduction to a circuit search), ``sumdecomp`` (1-sum and 2-sum
dynamic programs), ``cographic`` (graphs, docsets, potentials),
``mcippdp`` (tree-decomposition DP for potential problems), ``oracle``
(brute-force ground truth) and ``cli``.
"""

__version__ = "0.1.0"
