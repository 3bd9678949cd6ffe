"""
Short-time pump operator for six-wave mixing
============================================

Derive A(t) to second order in t and print it in plain and LaTeX form.
"""

from hoa import builtin, taylor_solve

system = builtin("six_wave")
print(system.h_int.format(system.labels))

# second order Taylor series of the pump annihilator
sol = taylor_solve(system, "A", order=2)
print("A(t) =", sol.series.format(system.labels))
print(sol.series.to_latex(system.labels))

# first order only: one correction term
print("A(t) =", taylor_solve(system, "A", order=1).series.format(system.labels))
