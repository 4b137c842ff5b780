"""Independent evaluation of closed-form reference values used by the unit tests."""
import cmath
import math

from mpmath import mp, mpf, quad, sin, cos, coth, exp, inf

mp.dps = 30

HBAR = mpf("1.054571817e-34")
KB = mpf("1.380649e-23")
M0 = mpf("9.1093837015e-31")
EV = mpf("1.602176634e-19")


def gaas_j(omega_ps, d1=-3.5, d2=7.0, m1=0.45, m2=0.067, hw1=12.0, hw2=25.0, rho=5370.0, cs=5110.0):
    q = mpf(omega_ps) * mpf(10) ** 12 / cs

    def g(d, m, hw):
        pref = mp.sqrt(HBAR * q / (2 * rho * cs)) * (d * EV) / HBAR
        return pref * exp(-(HBAR ** 2) * q * q / (4 * m * M0 * hw * mpf("1e-3") * EV))

    gq = g(d2, m2, hw2) - g(d1, m1, hw1)
    return 4 * mp.pi * q * q * gq * gq / cs * mpf("1e-12")


def influence(eta, kappa, j, jp, d=2):
    i, ip = divmod(j, d)
    m, mp_ = divmod(jp, d)
    s = -(kappa[i] - kappa[ip]) * (eta * kappa[m] - eta.conjugate() * kappa[mp_])
    return cmath.exp(s)


def ibm_rho01(alpha, s, wc, p, temperature, t, rho01_0=0.5j):
    """Closed-form pure-dephasing coherence, frequency integrals in mpmath."""
    hb = HBAR / KB * mpf(10) ** 12

    def j(w):
        return 2 * alpha * w ** s * mpf(wc) ** (1 - s) * exp(-((w / wc) ** p))

    re = quad(lambda w: -j(w) * coth(w * hb / (2 * temperature)) * (1 - cos(w * t)) / w ** 2, [0, wc, 10 * wc, inf])
    im = quad(lambda w: j(w) * (sin(w * t) - w * t) / w ** 2, [0, wc, 10 * wc, inf])
    return complex(exp(mp.mpc(re, im)) * mp.mpc(rho01_0.real, rho01_0.imag))


def round_trip_series(gamma, tau, omega0, t):
    total = cmath.exp(-gamma * t)
    n = 1
    while n * tau < t:
        sn = t - n * tau
        total += math.exp(-gamma * sn) * (gamma * sn) ** n / math.factorial(n) * cmath.exp(-1j * n * omega0 * tau)
        n += 1
    return total


if __name__ == "__main__":
    for temp in (4, 77, 300):
        v = ibm_rho01(0.05, 1, 2.0, 1, temp, 1.0)
        print("ibm ohmic T=%d t=1: %.17g %.17g" % (temp, v.real, v.imag))
    v = round_trip_series(1.0, 3.0, 2 * math.pi / 3.0, 4.0)
    print("round trip G=1 tau=3 t=4: %.17g %.17g" % (v.real, v.imag))
    print("hbar/kB K ps", HBAR / KB * mpf(10) ** 12)
    for w in (0.5, 1.0, 2.0):
        print("gaas J(%g) = %s" % (w, mp.nstr(gaas_j(w), 17)))
    eta = complex(0.137, -0.0421)
    for j in range(4):
        for jp in range(4):
            v = influence(eta, (0.0, 1.0), j, jp)
            print("I[%d][%d] = %.17g %.17g" % (j, jp, v.real, v.imag))
