"""Reference values of the Kelvin function ker_0 at 40 significant digits.

The ascending series is summed in extended precision (mpmath) with no
truncation heuristics shared with the C++ code; mpmath.ker is printed
alongside as a second opinion.
"""
import mpmath as mp

mp.mp.dps = 40


def ker0_series(x, terms=80):
    x = mp.mpf(x)
    q = (x / 2) ** 2
    ber = bei = tail = mp.mpf(0)
    for k in range(terms):
        t = (-1) ** k * q ** (2 * k) / mp.factorial(2 * k) ** 2
        u = (-1) ** k * q ** (2 * k + 1) / mp.factorial(2 * k + 1) ** 2
        ber += t
        bei += u
        tail += mp.digamma(2 * k + 1) * t
    return -mp.log(x / 2) * ber + mp.pi / 4 * bei + tail


if __name__ == "__main__":
    for x in ["1e-8", "1e-6", "0.01", "0.5", "1", "2", "5", "6", "7", "8", "9", "10", "12", "20", "30", "50"]:
        s = ker0_series(x, 120)
        print(f"{x:>6}  series={mp.nstr(s, 25):>32}  mpmath={mp.nstr(mp.ker(0, mp.mpf(x)), 25)}")
