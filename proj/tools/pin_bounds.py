#!/usr/bin/env python3
"""Regenerate tests/data/bound_pins.json.

Evaluates every bound calculator at 50 significant digits with mpmath on
randomized constant bundles. The C++ suite compares its double-precision
BoundReports against these values.

    python3 tools/pin_bounds.py [--count 100] [--seed 1234] [--out tests/data/bound_pins.json]
"""

import argparse
import json
import random

import mpmath as mp

mp.mp.dps = 50


def conc(n, d):
    ld = mp.log(d)
    return 5 * mp.sqrt(ld) + 4 * mp.e * ld / mp.sqrt(n)


def trap(c):
    if c["L2"] == 0:
        return 3 * c["D"]
    return min(3 * c["D"], 3 * c["lambda"] / (2 * c["L2"]))


def convex_terms(c, n, d, eps):
    L0, L1, L2, lam, D = (c[k] for k in ("L0", "L1", "L2", "lambda", "D"))
    f = conc(n, d)
    sqrt_eps = 4 * mp.sqrt(2) * L0 * (lam + 4 * D * L2) / lam ** mp.mpf(1.5) * mp.sqrt(eps)
    one_n = 8 * L0 / (n * lam) * (L0 + 64 * L0**2 * L2**2 * D / lam**3 + 16 * L1**2 * D / lam * f**2)
    return {"sqrt_eps_term": sqrt_eps, "one_over_n_term": one_n}


def good_event_terms(c, n, d):
    L0, L1, L2, lam = (c[k] for k in ("L0", "L1", "L2", "lambda"))
    f = conc(n, d)
    return {
        "gradient_event_term": 512 * L0**2 * L2**2 / (n * lam**4),
        "hessian_event_term": 128 * L1**2 / (n * lam**2) * f**2,
    }


def local_minima_terms(c, n, d):
    L0, L1, L2, lam = (c[k] for k in ("L0", "L1", "L2", "lambda"))
    f = conc(n, d)
    s = 8 * L0 / (n * lam)
    r = trap(c)
    return {
        "gradient_term": s * L0,
        "hessian_lipschitz_term": s * 64 * L0**2 * L2**2 / lam**3 * r,
        "hessian_concentration_term": s * 16 * L1**2 / lam * f**2 * r,
    }


def xi(c, n, d):
    L0, L1, L2, lam, alpha, D, K = (c[k] for k in ("L0", "L1", "L2", "lambda", "alpha", "D", "K"))
    xi1 = K * sum(good_event_terms(c, n, d).values())
    saddle = alpha**2 / (16 * L0 * L1)
    r = saddle if L2 == 0 else min(lam / (8 * L2), saddle)
    cover = mp.mpf(1) if r >= 3 * D else (3 * D / r) ** d
    xi2 = 2 * cover * mp.exp(-n * alpha**4 / (256 * L0**4)) + 4 * d * cover * mp.exp(-n * lam**2 / (256 * L1**2))
    return xi1, xi2, r


def nonconvex_terms(c, n, d, zeta, delta, variant, dprime, opt_gap, excess):
    L0, lam, D, M, K = (c[k] for k in ("L0", "lambda", "D", "M", "K"))
    xi1, xi2, _ = xi(c, n, d)
    if xi2 < mp.mpf("1e-300"):
        xi2 = mp.mpf(0)
    r = trap(c)
    zscale, dscale = (4, 1) if excess else (8, 2)
    out = {"zeta_term": zscale * L0 / lam * zeta, "delta_term": dscale * L0 * D * delta}
    if variant == "with_spurious":
        out["sqrt_n_term"] = 2 * K * M / mp.sqrt(n)
        out["one_over_n_term"] = 8 * K * L0**2 / (n * lam)
        out["xi1_term"] = (L0 * r + 2 * M) * xi1
        out["xi2_term"] = 2 * M * xi2
        if excess:
            out["opt_gap_term"] = opt_gap
    else:
        m = 8 if excess else 6
        out["delta_prime_term"] = m * M * dprime
        out["one_over_n_term"] = 8 * (K + 4) * L0**2 / (n * lam)
        out["xi1_term"] = ((K + 4) * L0 / K * r + m * M) * xi1
        out["xi2_term"] = m * M * xi2
    return out


def make_case(rng):
    def lu(lo, hi):
        return mp.mpf(10) ** rng.uniform(mp.log10(lo), mp.log10(hi))

    L1 = lu(0.1, 20)
    c = {
        "L0": lu(0.1, 20),
        "L1": L1,
        "L2": mp.mpf(0) if rng.random() < 0.2 else lu(0.05, 20),
        "lambda": L1 * mp.mpf(rng.uniform(0.02, 1.0)),
        "M": lu(0.1, 20),
        "D": lu(0.1, 10),
        "K": rng.randint(1, 6),
    }
    c["alpha"] = c["L0"] * mp.mpf(rng.uniform(0.01, 1.0))
    # Round constants to doubles so both sides see identical inputs.
    for k in ("L0", "L1", "L2", "lambda", "M", "D", "alpha"):
        c[k] = mp.mpf(float(c[k]))
    n = rng.choice([rng.randint(2, 100), rng.randint(100, 10**4), rng.randint(10**4, 10**7)])
    d = rng.randint(2, 60)
    args = {
        "n": n,
        "d": d,
        "t": rng.randint(1, 10**6),
        "eps": mp.mpf(float(lu(1e-8, 1.0))) if rng.random() < 0.9 else mp.mpf(0),
        "zeta": mp.mpf(float(lu(1e-8, 1.0))),
        "delta": mp.mpf(rng.uniform(0, 1)),
        "delta_prime": mp.mpf(rng.uniform(0, 1)),
        "opt_gap": mp.mpf(float(lu(1e-8, 1.0))),
        "pgd_eps": mp.mpf(float(lu(1e-9, 1e-2))),
        "dev": mp.mpf(float(lu(1e-3, 10.0))),
    }
    for k in ("delta", "delta_prime"):
        args[k] = mp.mpf(float(args[k]))
    return c, args


def unit_case(label, n, d, alpha=0.5, K=1, **overrides):
    c = {k: mp.mpf(1) for k in ("L0", "L1", "L2", "lambda", "M", "D")}
    c["alpha"] = mp.mpf(alpha)
    c["K"] = K
    args = {
        "n": n,
        "d": d,
        "t": 99,
        "eps": mp.mpf(0),
        "zeta": mp.mpf(0),
        "delta": mp.mpf(0),
        "delta_prime": mp.mpf(0),
        "opt_gap": mp.mpf(0),
        "pgd_eps": mp.mpf("0.1"),
        "dev": mp.mpf("0.5"),
    }
    for k, v in overrides.items():
        args[k] = mp.mpf(float(mp.mpf(v)))
    return label, c, args


# Fixed cases with round inputs; the random cases follow.
NAMED = [
    unit_case("convex_unit", 100, 3, eps="0.01"),
    unit_case("good_event_unit", 10**4, 10),
    unit_case("local_minima_unit", 10**3, 5),
    unit_case("xi_unit", 10**5, 4),
    unit_case("nonconvex_unit", 10**4, 4, K=4, zeta="1e-3", delta="1e-4", delta_prime="1e-4"),
    unit_case("tail_unit", 400, 2),
]


def evaluate(c, a):
    n, d = mp.mpf(a["n"]), a["d"]
    out = {}
    cs = convex_terms(c, n, d, a["eps"])
    out["convex_stability"] = cs
    out["convex_excess"] = {"eps_term": a["eps"], **cs}
    out["good_event_failure_prob"] = good_event_terms(c, n, d)
    out["local_minima_gen"] = local_minima_terms(c, n, d)
    for variant in ("with_spurious", "no_spurious"):
        for excess, name in ((False, "nonconvex_gen"), (True, "nonconvex_excess")):
            out[f"{name}/{variant}"] = nonconvex_terms(
                c, n, d, a["zeta"], a["delta"], variant, a["delta_prime"], a["opt_gap"], excess
            )
    t = mp.mpf(a["t"])
    L0, L1, L2, lam, D, M = (c[k] for k in ("L0", "L1", "L2", "lambda", "D", "M"))
    xi1, xi2, r = xi(c, n, d)
    e = a["pgd_eps"]
    scalars = {
        "gd_opt": D**2 * L1 / (2 * t),
        "sgd_opt": D * (L1**2 + 2 * L0**2) / (2 * L1 * mp.sqrt(t + 1)) * (1 + mp.log(t + 1)),
        "xi1": xi1,
        "xi2": xi2,
        "log_xi2": mp.log(xi2),
        "covering_radius": r,
        "pgd_iterations_statement": 2 * M * max(2 * L1 / e**2, 256 * L2**2 / (9 * e)),
        "pgd_iterations_proof": 2 * M * max(4 * L1 / e**2, 256 * L2**2 / (9 * e)),
        "tail_gradient_inner": 2 * mp.exp(-n * a["dev"] ** 2 / (16 * L0**4)),
        "tail_hessian": 2 * d * mp.exp(-n * a["dev"] ** 2 / (16 * L1**2)),
        "gradient_moment": L0**2 / n,
        "hessian_moment": (10 * mp.sqrt(mp.log(d)) * L1 + 8 * mp.e * mp.log(d) * L1 / mp.sqrt(n)) ** 2 / n,
        "minima_distance": 8 * L0 / (n * lam),
    }
    return out, scalars


def num(x):
    return float(x) if not isinstance(x, int) else x


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--count", type=int, default=100)
    ap.add_argument("--seed", type=int, default=1234)
    ap.add_argument("--out", default="tests/data/bound_pins.json")
    opts = ap.parse_args()
    rng = random.Random(opts.seed)
    cases = []
    todo = list(NAMED) + [(None, *make_case(rng)) for _ in range(opts.count)]
    for label, c, a in todo:
        reports, scalars = evaluate(c, a)
        cases.append(
            {
                "label": label or "random",
                "constants": {k: num(v) for k, v in c.items()},
                "args": {k: num(v) for k, v in a.items()},
                # Values are printed with 17 significant digits from the
                # 50-digit evaluation.
                "reports": {
                    name: {"terms": {k: mp.nstr(v, 17) for k, v in terms.items()}, "total": mp.nstr(sum(terms.values()), 17)}
                    for name, terms in reports.items()
                },
                "scalars": {k: mp.nstr(v, 17) for k, v in scalars.items()},
            }
        )
    with open(opts.out, "w") as fh:
        json.dump({"generator": "tools/pin_bounds.py", "digits": 50, "seed": opts.seed, "cases": cases}, fh, indent=1)
        fh.write("\n")


if __name__ == "__main__":
    main()
