"""Where does the low-power branch lose stability?

A second-harmonic drive leaves the fundamental empty until the parametric
threshold; a fundamental drive destabilizes its branch at a different
power. Both are found by bisection along the followed branch.
"""
from qong import critical_power, dual_design, fundamental_design, second_harmonic_design

for name, design, scheme in [("second harmonic", second_harmonic_design, "second_harmonic"),
                             ("fundamental", fundamental_design, "fundamental")]:
    cp = critical_power(design(), scheme)
    print(f"{name:16s} Pc = {cp.Pc * 1e3:.3f} mW  after {cp.evaluations} branch solves")
    print("  slowest eigenvalue just below:", max(cp.eigs_below.real))
    print("  slowest eigenvalue just above:", max(cp.eigs_above.real))

# the dual design drives both harmonics; check it still sits on a stable point
from qong import operating_point  # noqa: E402

s = operating_point(dual_design())
print(f"dual design: {s.stability.value}, max growth rate {s.max_growth_rate:.3e} rad/s")
