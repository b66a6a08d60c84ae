"""Smoke test for the pyedgecap extension. Run after `maturin develop`."""

import math

import pyedgecap as ec


def main():
    plan = ec.StoragePlan.build(n=3, k=2, overhead=1.5, scheme="xor", seed=1, mu=100.0)
    assert plan.n == 3 and plan.k == 2 and plan.scheme == "xor"
    assert ec.StoragePlan.from_text(plan.to_text()).to_text() == plan.to_text()

    # a + b <= 2 mu on the three-node coded system
    assert plan.covers([90.0, 100.0])
    assert not plan.covers([150.0, 60.0])
    v = plan.verdict([90.0, 100.0], gray_width=0.1)
    assert v["covered"] and v["gray"]
    assert math.isclose(plan.min_max_load([50.0, 50.0]), 0.5, abs_tol=1e-9)

    trace = ec.Trace.generate(plan, alpha=1.0, duration=2.0, seed=7)
    assert len(trace) > 0
    assert ec.Trace.from_text(trace.to_text()).requests() == trace.requests()
    (rates,) = trace.demand()
    assert len(rates) == 2

    a = ec.simulate(plan, trace, seed=3)
    b = ec.simulate(plan, trace, seed=3)
    assert a == b
    assert a["completed"] + a["dropped"] == len(trace)

    mean, std = ec.mm1_drop_experiment(0.9, 5, seed=1)
    expected = 100 * 0.1 * 0.9**5 / (1 - 0.9**6)
    assert abs(mean - expected) < 2.0, (mean, expected)

    assert ec.mcc([True, False, True, False], [True, False, True, False]) == 1.0
    assert ec.mcc([True, True], [True, False]) is None
    assert math.isclose(sum(ec.zipf_popularity(10, 1.0)), 1.0)
    assert len(ec.sample_demands(4, 10.0, 1.0, 1.0, 0.1, 3, seed=2)) == 3

    try:
        ec.StoragePlan.build(n=3, k=2, overhead=1.5, scheme="nonsense", seed=1)
    except ValueError:
        pass
    else:
        raise AssertionError("bad scheme accepted")
    print("pyedgecap smoke test ok", ec.__version__)


if __name__ == "__main__":
    main()
