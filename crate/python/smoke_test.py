"""Smoke test for the credal_lln Python extension.

Build and install first, e.g.  pip install maturin && maturin build -m crates/py/Cargo.toml --release && pip install target/wheels/credal_lln-*.whl
then run  python python/smoke_test.py
"""

import math

import credal_lln as cl


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol


def main():
    low = cl.FinitePmf([0.0, 1.0], [0.7, 0.3])
    high = cl.FinitePmf([0.0, 1.0], [0.3, 0.7])
    cs = cl.CredalSet([low, high])
    assert len(cs) == 2 and close(cs.mu_lower, 0.3) and close(cs.mu_upper, 0.7)
    assert cl.CredalSet.from_json(
        '{"priors": [{"values": [0, 1], "probs": [0.7, 0.3]}, {"values": [0, 1], "probs": [0.3, 0.7]}]}'
    ).fingerprint() == cs.fingerprint()

    # callables and named functions are interchangeable
    assert close(cl.upper_expectation(cs, lambda x: x * x), 0.7)
    assert close(cl.lower_expectation(cs, "square"), 0.3)
    assert close(cl.upper_capacity(cs, [1.0]) + cl.lower_capacity(cs, [0.0]), 1.0)
    assert close(cl.choquet_integral(cs, "upper"), 0.7) and close(cl.choquet_integral(cs, "lower"), 0.3)
    assert all(cl.axioms_check(cs, "square", lambda x: -x, 2.0, 1.5).values())

    # Peng-IID dynamic program against the strategy oracle
    up = cl.peng_sum(cs, 3, lambda s: (s - 1.5) ** 2)
    lo = cl.peng_sum(cs, 3, lambda s: (s - 1.5) ** 2, sense="lower")
    oracle = cl.strategy_oracle(cs, 3, lambda xs: (sum(xs) - 1.5) ** 2)
    assert close(up, oracle[0], 1e-9) and close(lo, oracle[1], 1e-9), (up, lo, oracle)
    assert close(cl.peng_path(cs, 2, lambda xs: float(xs[0] == 1.0 and xs[1] == 1.0)), 0.49)
    assert cl.joint_capacity_factorization(cs, [1.0], [1.0])["holds"]

    points, target = cl.weak_lln_curve(cs, "bump:0.5:0.25", [32, 256])
    assert abs(points[1][1] - target) <= abs(points[0][1] - target) and abs(points[1][1] - target) <= 0.05
    values = [v for _, _, v in cl.lemma4_product_bound(cs, 15.0, [10, 100, 1000])]
    assert values[0] >= values[1] >= values[2] and all(math.isfinite(v) for v in values)
    lhs, rhs, holds = cl.chebyshev_capacity_bound(cs, 0.1, 15.0, 100)
    assert holds and lhs <= rhs

    # simulation and analysis
    path = cl.sample_path(cs, "blocks:0.35,0.5,0.65", 5000, seed=42)
    again = cl.sample_path(cs, "blocks:0.35,0.5,0.65", 5000, seed=42)
    assert path.xs == again.xs and len(path) == 5000
    sup, inf, final = cl.tail_stats(path.xs, 2500)
    assert 0.25 <= inf <= final <= sup <= 0.75
    hits = cl.cluster_coverage(path.xs, [0.5], 64, 0.02)
    assert hits[0][0] == 0.5 and hits[0][2] >= 64
    paths = [cl.sample_path(cs, "max", 4000, seed=s) for s in range(10)]
    assert cl.violation_rate(paths, cs.mu_lower, cs.mu_upper, 0.05, 2000) == 0.0

    # errors surface as Python exceptions
    for bad in (lambda: cl.FinitePmf([0.0, 1.0], [0.5, 0.2]), lambda: cl.peng_sum(cs, 2, "nope")):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")
    try:
        cl.upper_expectation(cs, lambda x: 1 / 0)
    except ZeroDivisionError:
        pass
    else:
        raise AssertionError("callable errors must propagate")

    print("smoke test passed")


if __name__ == "__main__":
    main()
