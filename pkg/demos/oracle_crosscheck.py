"""
Symbolic d(l) against a truncated Fock space propagation
========================================================

Evolve |alpha, 0, 0> under each interaction Hamiltonian and compare the
measured d(l) with the second-order closed forms.  At gt = 1e-3 the six-wave
d(2) is off by about 1.6e-4 relative; the fourth-order series closes the gap.
"""

from hoa import builtin, criterion_d, run_oracle, taylor_solve

g, t, alpha = 1e-3, 1.0, 1.0
for name in ("six_wave", "four_wave", "shg"):
    system = builtin(name)
    res = run_oracle(system, g, t, alpha, l_max=2)
    print(name, "cutoffs", res.cutoffs, "norm drift", f"{res.norm_drift:.1e}")
    for order in (2, 4):
        sol = taylor_solve(system, system.labels[0], order)
        for l in (1, 2):
            sym = criterion_d(system, sol, l).evaluate_real(alpha, {"g": g, "t": t})
            print(f"  order {order} d({l}) symbolic {sym:.10e} oracle {res.d(l):.10e} rel {abs(res.d(l) - sym) / abs(sym):.2e}")
