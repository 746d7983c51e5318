"""Smoke test for the Python bindings. Run after `maturin develop`."""

import json
import math

import syncflow


def main():
    ring = syncflow.Network.ring(5, 1.0)
    states = [s for s in syncflow.find_all_normal_states(ring) if s["flows"] is not None]
    windings = sorted(s["winding"][0] for s in states)
    assert windings == [-1, 0, 1], windings
    for s in states:
        if s["winding"][0] == 1:
            assert all(abs(f - math.sin(2 * math.pi / 5)) < 1e-8 for f in s["flows"])

    net = syncflow.Network.case30()
    assert (net.node_count, net.edge_count) == (30, 41)
    assert abs(sum(net.injections)) < 1e-12
    base = syncflow.solve_base(net)
    assert base["classification"] == "interior_solution"
    approx = syncflow.improved_approximation(net)
    err = max(abs(a - b) / k for a, b, (_, _, k) in zip(approx, base["flows"], net.edges))
    assert err < 1e-8, err
    bounds = syncflow.error_bounds(net)
    assert bounds["projected"] <= bounds["simple"]

    tri = syncflow.Network([(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)], [0.0, 0.0, 0.0])
    assert abs(syncflow.resistance_distance(tri, 0) - 2 / 3) < 1e-14
    back = syncflow.Network.from_json(tri.to_json())
    assert back.edges == tri.edges
    assert syncflow.solve_linear(tri)["flows"] == [0.0, 0.0, 0.0]

    over = syncflow.Network([(0, 1, 1.0)], [2.0, -2.0])
    cert = syncflow.max_flow_feasible(over)
    assert not cert["feasible"] and cert["cut"]["capacity"] == 1.0
    try:
        syncflow.Network([(0, 1, 1.0)], [1.0, 0.0])
    except ValueError:
        pass
    else:
        raise AssertionError("unbalanced network accepted")

    print(json.dumps({"ok": True, "case30_max_approx_error": err}))


if __name__ == "__main__":
    main()
