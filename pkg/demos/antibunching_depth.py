"""
Depth of higher-order antibunching across three processes
=========================================================

d(l) for six-wave mixing, four-wave mixing and second harmonic generation,
then a numeric scan over the mean photon number.
"""

import numpy as np

from hoa import builtin, moment_report, taylor_solve

reports = {}
for name in ("six_wave", "four_wave", "shg"):
    system = builtin(name)
    sol = taylor_solve(system, system.labels[0], order=2)
    reports[name] = moment_report(system, sol, l_max=3)
    for l in (1, 2, 3):
        print(f"{name:10s} d({l}) = {reports[name].d(l).format_grouped()}")

# |d(2)| grows with |alpha|^2 at fixed gt
nbar = np.arange(1, 11)
for name, rep in reports.items():
    depth = [rep.d(2).evaluate_real(np.sqrt(n), {"g": 1e-3, "t": 1.0}) for n in nbar]
    print(name, np.round(depth, 9))
