"""Smoke test for the smoothflow Python extension.

Build and install first:  pip install ./crates/python
"""

import math

import smoothflow as sf


def main():
    p = sf.Problem.generate(10, 20, 50, seed=0)
    assert p.sigma > 0 and p.beta == 50
    assert p.true_value(p.optimum) == 0.0

    tr = sf.run_sgm(p, sf.Schedule.power(0.5), max_steps=500)
    cols = tr.columns()
    assert tr.status == "budget-exhausted" and len(tr) == 501
    assert all(f <= b + 1e-9 * (1 + b) for f, b in zip(cols["f_true"][1:], cols["bound"][1:]))
    assert tr.to_csv().splitlines()[0].startswith("k,t,s,mu")

    flow = sf.integrate_rk45(p, sf.Schedule.continuous_exponential(p.sigma + 5), t_end=1.5, rtol=1e-8, atol=1e-11)
    assert flow["t"][-1] == 1.5
    assert flow["f_true"][-1] <= flow["bound_ct"][-1] * (1 + 1e-3)

    assert sf.certify("huber", 5, samples=200)["pass"]
    b = sf.timeline_bounds(sf.Schedule.power(1.0), k=10, elapsed=tr.columns()["t"][10] - 1.0)
    assert b["t_lower"] <= b["t_upper"]

    ks = [float(k) for k in range(1, 2001)]
    slope, _, _ = sf.fit_rate(ks, [k ** -0.5 for k in ks], "power", (10.0, 2000.0))
    assert math.isclose(slope, -0.5, abs_tol=1e-9)

    try:
        sf.Schedule.exponential(1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("lambda >= 1 accepted")

    print(f"smoothflow {sf.__version__}: ok ({p!r}, final F = {cols['f_true'][-1]:.3e})")


if __name__ == "__main__":
    main()
