"""Flow engine: weighted max-min reallocation against hand-worked values and
an independent bisection oracle, steady-phase estimation, fast-forward."""

import random

import pytest

from dcnsim.core import Link, Topology, build_leaf_spine
from dcnsim.flow_engine import (InfeasibleAllocationError, SteadyFlowView,
                                estimate_steady_duration, fast_forward,
                                reallocate_bandwidth)

from oracles import mmf_bisection_oracle


def _line_topology(caps):
    """A chain of standalone directed links with the given capacities."""
    links = [Link(i, f"n{i}", f"n{i}'", c, 0.0) for i, c in enumerate(caps)]
    return Topology(hosts=[], switches=[], links=links, tiers={}, host_leaf={})


def _view(fid, b_inst, b_min=float("inf"), path=(0,), weight=1.0, remaining=1e9):
    return SteadyFlowView(flow_id=fid, remaining=remaining, b_inst=b_inst,
                          path=path, weight=weight, b_min=b_min)


class TestInitialBandwidth:
    def test_floor_is_min_of_inst_and_min(self):
        assert _view("a", 40e9, 50e9).b_init == 40e9
        assert _view("b", 60e9, 50e9).b_init == 50e9
        assert _view("c", 60e9).b_init == 60e9


class TestReallocateHandCases:
    def test_two_flows_shared_link(self):
        # C=100; floors {40, 20}; residual 40 split evenly -> {60, 40}
        topo = _line_topology([100e9])
        views = [_view("a", 40e9, 50e9), _view("b", 20e9, 50e9)]
        reallocate_bandwidth(views, topo)
        assert views[0].b_re == pytest.approx(60e9, rel=1e-12)
        assert views[1].b_re == pytest.approx(40e9, rel=1e-12)

    def test_single_flow_full_residual(self):
        topo = _line_topology([100e9])
        views = [_view("a", 30e9)]
        reallocate_bandwidth(views, topo)
        assert views[0].b_re == pytest.approx(100e9, rel=1e-12)

    def test_weighted_residual_split(self):
        # residual 30 at weights 2:1 -> increments {20, 10}
        topo = _line_topology([30e9])
        views = [_view("a", 0.0, 0.0, weight=2.0), _view("b", 0.0, 0.0, weight=1.0)]
        reallocate_bandwidth(views, topo)
        assert views[0].b_re == pytest.approx(20e9, rel=1e-12)
        assert views[1].b_re == pytest.approx(10e9, rel=1e-12)

    def test_zero_weight_stays_at_floor(self):
        topo = _line_topology([100e9])
        views = [_view("a", 10e9, weight=0.0), _view("b", 0.0, 0.0)]
        reallocate_bandwidth(views, topo)
        assert views[0].b_re == 10e9
        assert views[1].b_re == pytest.approx(90e9, rel=1e-12)

    def test_infeasible_floors(self):
        topo = _line_topology([100e9])
        views = [_view("a", 60e9), _view("b", 60e9)]
        with pytest.raises(InfeasibleAllocationError):
            reallocate_bandwidth(views, topo)

    def test_multi_link_bottleneck(self):
        # flow a crosses both links; link 1 is the tighter bottleneck
        topo = _line_topology([100e9, 50e9])
        views = [_view("a", 0.0, 0.0, path=(0, 1)), _view("b", 0.0, 0.0, path=(0,))]
        reallocate_bandwidth(views, topo)
        assert views[0].b_re == pytest.approx(50e9, rel=1e-9)
        assert views[1].b_re == pytest.approx(50e9, rel=1e-9)


class TestBruteForceEquivalence:
    def test_200_random_instances(self):
        rng = random.Random(20260823)
        for case in range(200):
            n_links = rng.randint(1, 5)
            n_flows = rng.randint(1, 6)
            caps = [rng.uniform(1.0, 100.0) for _ in range(n_links)]
            topo = _line_topology(caps)
            specs = []
            for j in range(n_flows):
                path = tuple(sorted(rng.sample(range(n_links),
                                               rng.randint(1, n_links))))
                specs.append({"id": f"f{j}", "path": path,
                              "weight": rng.choice([0.0, 0.5, 1.0, 2.0, 3.0])})
            # keep the floors jointly feasible on every link
            for j, s in enumerate(specs):
                cap_min = min(caps[l] for l in s["path"])
                s["floor"] = rng.uniform(0.0, cap_min / n_flows)
            views = [SteadyFlowView(flow_id=s["id"], remaining=1.0,
                                    b_inst=s["floor"], path=s["path"],
                                    weight=s["weight"], b_min=float("inf"))
                     for s in specs]
            reallocate_bandwidth(views, topo)
            want = mmf_bisection_oracle(specs, dict(enumerate(caps)))
            for v in views:
                w = want[v.flow_id]
                scale = max(abs(w), 1.0)
                assert abs(v.b_re - w) <= 1e-9 * scale, (
                    f"case {case}: flow {v.flow_id} got {v.b_re}, oracle {w}")

    def test_allocation_invariants_random(self):
        rng = random.Random(7)
        for _ in range(100):
            n_links = rng.randint(1, 4)
            caps = [rng.uniform(10.0, 100.0) for _ in range(n_links)]
            topo = _line_topology(caps)
            views = []
            n_flows = rng.randint(1, 5)
            for j in range(n_flows):
                path = tuple(sorted(rng.sample(range(n_links),
                                               rng.randint(1, n_links))))
                floor = rng.uniform(0.0, min(caps[l] for l in path) / n_flows)
                views.append(SteadyFlowView(flow_id=f"f{j}", remaining=1.0,
                                            b_inst=floor, path=path,
                                            weight=rng.uniform(0.1, 3.0),
                                            b_min=float("inf")))
            reallocate_bandwidth(views, topo)
            for v in views:
                assert v.b_re >= v.b_init - 1e-9
            for lid, cap in enumerate(caps):
                load = sum(v.b_re for v in views if lid in v.path)
                assert load <= cap * (1.0 + 1e-9)


class TestSteadyDuration:
    def test_min_of_taus(self):
        views = [_view("a", 0.0, 0.0, remaining=200e9),
                 _view("b", 0.0, 0.0, remaining=100e9)]
        for v in views:
            v.b_re = 50e9
        plan = estimate_steady_duration(views, t_start=1.0)
        assert plan.per_flow_tau == {"a": 4.0, "b": 2.0}
        assert plan.tau_steady == 2.0
        assert plan.t_end == 3.0
        assert plan.earliest == ["b"]

    def test_single_flow(self):
        v = _view("a", 0.0, 0.0, remaining=100e9)
        v.b_re = 100e9
        plan = estimate_steady_duration([v], 0.0)
        assert plan.tau_steady == 1.0

    def test_tie_flags_both(self):
        views = [_view("a", 0.0, 0.0, remaining=100e9),
                 _view("b", 0.0, 0.0, remaining=100e9)]
        for v in views:
            v.b_re = 50e9
        plan = estimate_steady_duration(views, 0.0)
        assert sorted(plan.earliest) == ["a", "b"]

    def test_rejects_empty_and_nonpositive(self):
        with pytest.raises(ValueError):
            estimate_steady_duration([], 0.0)
        v = _view("a", 0.0, 0.0)
        v.b_re = 0.0
        with pytest.raises(ValueError):
            estimate_steady_duration([v], 0.0)


class TestFastForward:
    def test_finisher_completes_exactly(self):
        v = _view("a", 0.0, 0.0, remaining=100e9)
        v.b_re = 50e9
        plan = estimate_steady_duration([v], 0.0)
        moved, finished = fast_forward([v], plan)
        assert moved == {"a": 100e9}
        assert finished == ["a"]
        assert v.remaining == 0.0

    def test_survivor_keeps_remainder(self):
        views = [_view("a", 0.0, 0.0, remaining=200e9),
                 _view("b", 0.0, 0.0, remaining=100e9)]
        for v in views:
            v.b_re = 50e9
        plan = estimate_steady_duration(views, 0.0)
        moved, finished = fast_forward(views, plan)
        assert finished == ["b"]
        assert views[0].remaining == pytest.approx(100e9)
        assert moved["a"] == pytest.approx(100e9)

    def test_zero_duration_rejected(self):
        v = _view("a", 0.0, 0.0)
        v.b_re = 1.0
        plan = estimate_steady_duration([v], 0.0)
        with pytest.raises(ValueError):
            fast_forward([v], plan, duration=0.0)


class TestOnRealTopology:
    def test_paths_through_leaf_spine(self):
        topo = build_leaf_spine(2, 1, 2, 100e9, 1e-6)
        # both flows cross the same leaf0->spine0 uplink
        up = next(l.id for l in topo.links if (l.src, l.dst) == ("leaf0", "spine0"))
        paths = {}
        for l in topo.links:
            paths[(l.src, l.dst)] = l.id
        pa = (paths[("h0", "leaf0")], up, paths[("spine0", "leaf1")], paths[("leaf1", "h2")])
        pb = (paths[("h1", "leaf0")], up, paths[("spine0", "leaf1")], paths[("leaf1", "h3")])
        views = [_view("a", 0.0, 0.0, path=pa), _view("b", 0.0, 0.0, path=pb)]
        reallocate_bandwidth(views, topo)
        assert views[0].b_re == pytest.approx(50e9, rel=1e-9)
        assert views[1].b_re == pytest.approx(50e9, rel=1e-9)
