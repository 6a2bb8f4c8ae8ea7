"""Smoke test for the Python bindings: python python/smoke_test.py"""

import json
import math

import uldp_lab


def main():
    s = uldp_lab.solve(5, 1, 1.0)
    assert s.method == "closed_form", s
    assert abs(sum(s.t_star) - 1.0) < 1e-12

    s = uldp_lab.solve(6, 4, 0.5)
    assert s.t_star == [0.0, 1.0, 0.0, 0.0], s
    assert abs(s.value - uldp_lab.objective(6, 4, 0.5, s.alpha_star, s.t_star)) < 1e-9 * s.value

    value, k_star = uldp_lab.ldp_optimum(4, 0.5)
    assert k_star and value > 0

    rows = uldp_lab.sweep(6, 3, points=5, workers=2)
    assert rows[0]["epsilon"] == 0.1 and rows[-1]["epsilon"] == 10.0
    assert all(r["m_star"] <= r["r_uss_min"] * (1 + 1e-9) for r in rows)

    r = uldp_lab.simulate(6, 3, 1.0, n=2000, trials=40, seed=1, workers=2)
    assert abs(r["mean_scaled_mse"] - r["theory"]) < 5 * r["stderr"], r
    assert r == uldp_lab.simulate(6, 3, 1.0, n=2000, trials=40, seed=1, workers=1)

    text = uldp_lab.export_mechanism(4, 2, 0.5, [1.0, 0.0])
    assert uldp_lab.validate_mechanism(text)[0]
    doc = json.loads(text)
    row = doc["rows"][0]
    row[0], row[1] = row[0] + 0.8 * row[1], 0.2 * row[1]
    ok, why = uldp_lab.validate_mechanism(json.dumps(doc))
    assert not ok and why

    try:
        uldp_lab.solve(3, 4, 1.0)
    except ValueError as e:
        assert "v < w" in str(e)
    else:
        raise AssertionError("expected ValueError")

    assert math.isfinite(uldp_lab.objective(10, 4, 1.0, 0.3, [0.5, 0.5, 0.0, 0.0]))
    print("smoke test passed")


if __name__ == "__main__":
    main()
