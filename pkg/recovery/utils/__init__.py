"""
Numerical core of matsense: dense linear algebra, the sensing operator,
the factorized objective, the solvers, diagnostics and the experiment harness.
"""
