"""
A user-defined Hamiltonian
==========================

Parse a three-mode system from source text, check it and derive its moments.
"""

from hoa import moment_report, parse_system, render_system, taylor_solve

SOURCE = """
system cascade;
mode P coherent(alpha) freq w1;
mode S vacuum freq w2;
mode I vacuum freq w3;
H = g*(Pd^2*S*I^2 + hc);
"""

system = parse_system(SOURCE)
print(render_system(system))

sol = taylor_solve(system, "P", order=2)
rep = moment_report(system, sol, l_max=2)
for l in (1, 2):
    print(f"d({l}) =", rep.d(l).format_grouped())
