#!/usr/bin/env python3
"""Independent evaluation of the modified Schottky emission current.

Straight-line formula in SI units with 50-digit arithmetic. The C++ tests
freeze the printed values.
"""
from mpmath import mp, mpf, sqrt, exp, pi

mp.dps = 50

Q = mpf("1.602176634e-19")          # C
EPS0 = mpf("8.8541878128e-12")     # F/m
AREA = mpf(4) * mpf("1e-12")        # 4 um^2 -> m^2
ALPHA = mpf("3e-4") * mpf("1e6")    # A s cm^-3 K^-3/2 -> A s m^-3 K^-3/2
T = mpf(300)
D = mpf(5) * mpf("1e-9")            # m
MU = mpf("8.9e-3") * mpf("1e-4")    # cm^2/(V s) -> m^2/(V s)
PHI_B = mpf("0.19")                 # eV
EPS_R = mpf("18.2")
K_B = mpf("8.617e-5")               # eV/K


def current(v):
    v = mpf(v)
    if v == 0:
        return mpf(0)
    e_field = v / D
    lowering_ev = sqrt(Q * e_field / (4 * pi * EPS0 * EPS_R))
    return AREA * ALPHA * T ** mpf("1.5") * e_field * MU * exp(-(PHI_B - lowering_ev) / (K_B * T))


def energy(v, t):
    return current(v) * mpf(v) * mpf(t)


if __name__ == "__main__":
    lo, hi = mpf("0.1"), mpf(4)
    print("// 20 log-spaced voltages in [0.1, 4] V: {v, I}")
    for k in range(20):
        v = lo * (hi / lo) ** (mpf(k) / 19)
        print("{%s, %s}," % (mp.nstr(v, 17), mp.nstr(current(v), 17)))
    print("// bundled family: {t, v, E}")
    for t, v in (("20e-9", "3.6"), ("1e-6", "2.8"), ("0.2e-3", "2.0"), ("2e-3", "1.5")):
        print("{%s, %s, %s}," % (t, v, mp.nstr(energy(v, t), 17)))
