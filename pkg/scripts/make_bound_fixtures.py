"""Regenerate tests/fixtures/bound_fixtures.json with 50-digit mpmath arithmetic.

Run from the repository root:  python3 scripts/make_bound_fixtures.py
The JSON is committed; the test suite never imports mpmath.
"""

import json
from pathlib import Path

import mpmath as mp

mp.mp.dps = 50


def coverage_ratio(k, d, eps, vol_k, n):
    v = (
        mp.pi ** (mp.mpf(k) / 2)
        * mp.gamma(mp.mpf(d - k) / 2 + 1)
        / mp.gamma(mp.mpf(d) / 2 + 1)
        * mp.mpf(eps) ** k
        * n
        / mp.mpf(vol_k)
    )
    return v


def plane_coverage(k, d):
    return (
        mp.pi ** (mp.mpf(k) / 2)
        * mp.gamma(mp.mpf(d - k) / 2 + 1)
        / mp.gamma(mp.mpf(d) / 2 + 1)
        * (mp.sqrt(k) / 2) ** k
    )


def tube_cover_samples(k, d, lo, hi):
    return (
        mp.pi ** (-mp.mpf(k) / 2)
        * mp.gamma(mp.mpf(d) / 2 + 1)
        / mp.gamma(mp.mpf(d - k) / 2 + 1)
        * (mp.mpf(hi) - mp.mpf(lo)) ** k
    )


def sphere_coverage(n, d, eps):
    eps = mp.mpf(eps)
    return n * eps**d / ((1 + eps) ** d - (1 - eps) ** d)


def linear_regions(r1, rch, tau, d):
    return (
        2
        * mp.sqrt(mp.pi)
        * mp.gamma(mp.mpf(d + 1) / 2)
        / mp.gamma(mp.mpf(d) / 2)
        * ((mp.mpf(r1) + mp.mpf(rch)) / (4 * mp.mpf(tau))) ** (mp.mpf(d - 1) / 2)
    )


def segment_count(r1, r2, eps):
    return mp.pi / mp.acos((mp.mpf(r1) + mp.mpf(eps)) / (mp.mpf(r2) - mp.mpf(eps)))


def medial_t_star(delta, omega1, omega2):
    delta, omega1, omega2 = mp.mpf(delta), mp.mpf(omega1), mp.mpf(omega2)
    gap = omega2**2 - omega1**2
    return (delta**2 + gap + 2 * delta * omega2) / (1 + gap)


def entry(formula, inputs, value):
    return {
        "formula": formula,
        "inputs": inputs,
        "value": mp.nstr(value, 30),
        "log_value": mp.nstr(mp.log(value), 30),
    }


def main():
    fixtures = []
    for k, d, eps, vol, n in [
        (2, 100, 1.0, 400.0, 450),
        (2, 4, 1.0, 400.0, 450),
        (3, 50, 0.5, 1000.0, 2000),
        (5, 10000, 1.0, 1e6, 10**9),
    ]:
        fixtures.append(
            entry("coverage_ratio", {"k": k, "d": d, "eps": eps, "vol_k": vol, "n": n},
                  coverage_ratio(k, d, eps, vol, n))
        )
    for k, d in [(2, 3), (2, 100), (4, 500), (8, 10000)]:
        fixtures.append(entry("plane_coverage", {"k": k, "d": d}, plane_coverage(k, d)))
    for k, d, lo, hi in [(2, 102, 0.0, 20.0), (1, 2, 0.0, 1.0), (3, 1000, -10.0, 10.0),
                         (2, 10000, -10.0, 10.0)]:
        fixtures.append(
            entry("tube_cover_samples", {"k": k, "d": d, "lo": lo, "hi": hi},
                  tube_cover_samples(k, d, lo, hi))
        )
    for n, d, eps in [(10**12, 500, 1.0), (1, 2, 1.0), (10**6, 784, 0.3), (2**20, 20, 1.0)]:
        fixtures.append(entry("sphere_coverage", {"n": n, "d": d, "eps": eps},
                              sphere_coverage(n, d, eps)))
    for r1, rch, tau, d in [(1.0, 1.0, 0.25, 2), (1.0, 1.0, 0.5, 2), (1.0, 1.0, 0.1, 100),
                            (2.0, 0.5, 0.25, 784)]:
        fixtures.append(entry("linear_regions", {"r1": r1, "rch": rch, "tau": tau, "d": d},
                              linear_regions(r1, rch, tau, d)))
    for r1, r2, eps in [(1.0, 3.0, 0.0), (1.0, 3.0, 0.5), (1.0, 3.0, 0.9), (2.0, 2.5, 0.1)]:
        fixtures.append(entry("segment_count", {"r1": r1, "r2": r2, "eps": eps},
                              segment_count(r1, r2, eps)))
    for delta, omega1, omega2 in [(0.1, 0.2, 0.5), (0.0, 0.0, 0.5), (0.5, 0.1, 0.9),
                                  (0.01, 0.5, 0.6), (0.3, 0.0, 0.99)]:
        fixtures.append(
            entry("medial_t_star", {"delta": delta, "omega1": omega1, "omega2": omega2},
                  medial_t_star(delta, omega1, omega2))
        )
    out = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "bound_fixtures.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as f:
        json.dump(fixtures, f, indent=2)
        f.write("\n")
    print(f"wrote {len(fixtures)} fixtures to {out}")


if __name__ == "__main__":
    main()
