"""Smoke test for the `musielak` extension module."""

import math
import os
import tempfile
import json

import musielak as m


def close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    p2 = m.ExponentField.constant(2.0)
    sq = m.NFunction.power(p2)
    assert sq.value(0.5, [0.5], 3.0) == 9.0
    assert close(sq.conjugate_value(0.5, [0.5], 4.0), 4.0, 1e-12)
    assert m.NFunction.exp_power(p2).value(0.0, [0.0], 0.0) == 0.0
    assert close(m.NFunction.power_log(m.ExponentField.constant(1.0)).value(0.0, [0.0], 1.0), math.log(2.0), 1e-15)
    assert sq.check_axioms([(0.5, [0.5])])["passed"]
    assert sq.biconjugate_residual([(0.5, [0.5], a) for a in (0.5, 1.0, 2.0)])["relative"] <= 1e-8

    grid = m.Grid(1.0, "interval", 8, 8)
    c = m.GridField.from_values(grid, [2.5] * len(grid))
    assert close(m.luxembourg_norm(sq, c), 2.5, 1e-10)
    xi = m.GridField.from_expr(grid, "sin(pi*x)*t")
    eta = m.GridField.from_expr(grid, "x - 0.5")
    assert m.hoelder_check(sq, xi, eta)["passed"]
    n = m.luxembourg_norm(sq, xi)
    assert n <= m.orlicz_norm(sq, xi) <= 2 * n * (1 + 1e-9)

    bm = m.BoundaryMap("disk", 1.0, 0.05)
    consts = bm.verify(2000)
    assert consts["maps_into"] and consts["injective"] and consts["k1"] > 0

    quad = m.MonotoneGraph.linear(2.0, sq)
    cert = quad.certificate([(0.5, [0.5])], [[0.1 * k - 4.0] for k in range(81)])
    assert cert["c_star"] == 1.0 and cert["k_integral"] <= 1e-10
    probes = [[0.1 * k - 3.0] for k in range(61)]
    assert close(quad.maximality_residual(0.5, [0.5], [1.0], [0.0], probes), -0.5, 1e-10)
    _, _, lip = quad.lipschitz(0.0, [0.0], 5.0, 64)
    assert close(lip, 1.0 / 3.0, 1e-12)
    jump = m.MonotoneGraph.jump(m.ExponentField.constant(1.0))
    assert jump.jump_radii() == [1.0]
    assert jump.mollified(0.1, 0.0, [0.0], [2.0])[0] > jump.mollified(0.1, 0.0, [0.0], [0.5])[0]

    heat = m.MonotoneGraph.linear(1.0, m.NFunction.power_normalized(p2))
    traj = m.solve(heat, "sin(pi*x)", 0.05, 4, nx=64, t_end=0.1, dt=1e-4)
    assert traj.l2_error_final("exp(-pi^2*0.1)*sin(pi*x)") <= 1e-6
    assert traj.energy()["identity_ok"]

    with tempfile.TemporaryDirectory() as d:
        cfg = os.path.join(d, "c.json")
        with open(cfg, "w") as fh:
            json.dump({"nfunction": {"kind": "power", "p": 2}}, fh)
        out = os.path.join(d, "out")
        assert m.run_cli(["check-nfunction", "--config", cfg, "--out", out]) == 0
        with open(os.path.join(out, "report.json")) as fh:
            assert json.load(fh)["passed"]

    try:
        m.NFunction.tabulated([0.0, 1.0], [0.0, -1.0])
    except m.MusielakError:
        pass
    else:
        raise AssertionError("non-convex table accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
