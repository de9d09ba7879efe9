"""Smoke test for the rcac_autopilot extension module."""

import math
import tempfile
from pathlib import Path

import rcac_autopilot as ap


def close(a, b, tol=1e-9):
    return all(abs(x - y) <= tol for x, y in zip(a, b))


def main():
    q = ap.Quaternion.from_euler(0.3, 0.1, -0.2)
    back = q.inverse_rotate(q.rotate([1.0, 2.0, 3.0]))
    assert close(back, [1.0, 2.0, 3.0]), back
    assert close(q.to_euler(), (0.3, 0.1, -0.2))

    f = [1.0, -2.0, -15.0]
    n = math.sqrt(sum(c * c for c in f))
    q_axis = ap.f2q(f, 0.5).rotate([0.0, 0.0, 1.0])
    assert close(q_axis, [-c / n for c in f]), q_axis

    rc = ap.RcacController(1.0, 1, 2)
    for k in range(20):
        rc.step([0.1 * math.sin(k)], [[math.cos(k), 1.0]])
    assert rc.step_count == 19  # the first step has nothing to update with
    cov = rc.covariance
    assert abs(cov[0][1] - cov[1][0]) < 1e-12

    assert abs(ap.hover_thrust() - 2.0 * 9.81) < 0.1
    assert "mode trajectory" in ap.default_mission()

    stock = ap.run_experiment(1.0)
    assert stock.metrics.completed and stock.abort_reason is None
    with tempfile.TemporaryDirectory() as tmp:
        flight = ap.run_experiment(0.3, adaptive=True, out=tmp)
        assert flight.metrics.completed, flight.metrics
        assert any(t != 0.0 for t in flight.theta[-1])
        replayed = ap.replay_metrics(Path(tmp) / "log.csv")
        assert replayed.position_rmse == flight.metrics.position_rmse

    print("stock:", stock.metrics)
    print("adaptive at alpha 0.3:", flight.metrics)
    print("smoke test ok")


if __name__ == "__main__":
    main()
