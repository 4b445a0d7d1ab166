# SPDX-License-Identifier: MIT OR Apache-2.0
"""Smoke test for the cpsi Python bindings.

Build and install the extension first:

    pip install --no-build-isolation ./crates/python
    python python/smoke_test.py
"""

import random

import cpsi_py


def step_series(n=200, at=100, jump=3.0, seed=1):
    rng = random.Random(seed)
    return [rng.gauss(0.0, 1.0) + (jump if i >= at else 0.0) for i in range(n)]


def main():
    assert isinstance(cpsi_py.__version__, str)
    values = step_series()

    sigma = cpsi_py.estimate_sigma_mad(values)
    assert 0.7 < sigma < 1.3, sigma

    cps = cpsi_py.detect(values, changepoints=1)
    assert cps == [100], cps

    report = cpsi_py.analyze(values, changepoints=1, sigma=1.0, n_samples=10, seed=3)
    assert report["schema_version"] == cpsi_py.SCHEMA_VERSION
    (record,) = report["changepoints"]
    assert record["tau_hat"] == 100
    assert record["p_adjusted"] < 1e-3, record
    assert report["significant"] == 1

    # One sample means only the observed data is used: the seed cannot matter.
    a = cpsi_py.analyze(values, changepoints=1, n_samples=1, seed=1)
    b = cpsi_py.analyze(values, changepoints=1, n_samples=1, seed=2)
    assert a["changepoints"] == b["changepoints"]

    assert cpsi_py.adjust_p_values([0.6, 0.01]) == [0.6, 0.02]
    bh = cpsi_py.adjust_p_values([0.01, 0.02, 0.03], method="bh")
    assert all(abs(x - 0.03) < 1e-15 for x in bh), bh

    for bad in (
        lambda: cpsi_py.detect([1.0]),
        lambda: cpsi_py.detect(values, algorithm="l0"),
        lambda: cpsi_py.analyze([2.0] * 20),
        lambda: cpsi_py.adjust_p_values([1.5]),
    ):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")

    print("python smoke test: OK")


if __name__ == "__main__":
    main()
