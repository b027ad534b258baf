"""Topology construction, deterministic routing, event-queue ordering."""

import pytest
from hypothesis import given, strategies as st

from dcnsim.core import (ConfigurationError, EventQueue, Flow, RoutingError,
                         build_leaf_spine, ecmp_index, route)


class TestBuildLeafSpine:
    def test_counts_2x2x4(self):
        topo = build_leaf_spine(2, 2, 4, 200e9, 10e-6)
        assert len(topo.hosts) == 8
        assert len(topo.switches) == 4
        # 8 host-leaf pairs + 4 leaf-spine pairs, two simplex links each
        assert len(topo.links) == 2 * (8 + 4)

    def test_degenerate_minimum(self):
        topo = build_leaf_spine(1, 1, 1, 200e9, 10e-6)
        assert len(topo.hosts) == 1
        assert len(topo.switches) == 2
        assert len(topo.links) == 2 * (1 + 1)

    def test_single_spine_uplinks(self):
        topo = build_leaf_spine(2, 1, 2, 100e9, 5e-6)
        assert len(topo.hosts) == 4
        for leaf in (s for s, t in topo.tiers.items() if t == "leaf"):
            ups = [l for l in topo.links
                   if l.src == leaf and topo.tiers.get(l.dst) == "spine"]
            assert len(ups) == 1

    def test_links_are_simplex_pairs(self):
        topo = build_leaf_spine(2, 2, 4, 200e9, 10e-6)
        ends = {(l.src, l.dst) for l in topo.links}
        assert all((b, a) in ends for (a, b) in ends)

    def test_switch_egress_links(self):
        topo = build_leaf_spine(2, 2, 2, 200e9, 10e-6)
        for l in topo.switch_egress_links():
            assert l.src in topo.tiers

    @pytest.mark.parametrize("args", [
        (0, 1, 1, 200e9, 1e-6),
        (1, 0, 1, 200e9, 1e-6),
        (1, 1, 0, 200e9, 1e-6),
        (1, 1, 1, 0.0, 1e-6),
        (1, 1, 1, 200e9, -1e-6),
    ])
    def test_invalid_parameters(self, args):
        with pytest.raises(ConfigurationError):
            build_leaf_spine(*args)

    def test_structural_hash_sensitivity(self):
        a = build_leaf_spine(2, 2, 4, 200e9, 10e-6)
        b = build_leaf_spine(2, 2, 4, 200e9, 10e-6)
        c = build_leaf_spine(2, 2, 4, 100e9, 10e-6)
        assert a.structural_hash() == b.structural_hash()
        assert a.structural_hash() != c.structural_hash()


class TestRouting:
    def setup_method(self):
        self.topo = build_leaf_spine(2, 2, 4, 200e9, 10e-6)

    def test_same_leaf_two_links(self):
        path = route(self.topo, "h0", "h1", "f", seed=0)
        assert len(path) == 2
        l0, l1 = (self.topo.link_by_id[i] for i in path)
        assert (l0.src, l0.dst) == ("h0", "leaf0")
        assert (l1.src, l1.dst) == ("leaf0", "h1")

    def test_cross_leaf_via_hashed_spine(self):
        path = route(self.topo, "h0", "h4", "f", seed=0)
        assert len(path) == 4
        spine = self.topo.link_by_id[path[1]].dst
        k = ecmp_index("f", 0, self.topo.n_spines)
        assert spine == self.topo.spine_ids()[k]

    def test_deterministic(self):
        assert route(self.topo, "h0", "h4", "x", 7) == route(self.topo, "h0", "h4", "x", 7)

    def test_errors(self):
        with pytest.raises(RoutingError):
            route(self.topo, "h0", "h0", "f", 0)
        with pytest.raises(RoutingError):
            route(self.topo, "h0", "nope", "f", 0)
        with pytest.raises(RoutingError):
            route(self.topo, "nope", "h0", "f", 0)

    @given(st.text(min_size=1, max_size=20), st.integers(0, 2**31))
    def test_ecmp_index_in_range(self, fid, seed):
        assert 0 <= ecmp_index(fid, seed, 4) < 4


class TestFlowValidation:
    def test_bad_size(self):
        with pytest.raises(ConfigurationError):
            Flow(id="f", src="a", dst="b", size=0.0).validate()

    def test_negative_release(self):
        with pytest.raises(ConfigurationError):
            Flow(id="f", src="a", dst="b", size=1.0, release_time=-1.0).validate()

    def test_negative_weight(self):
        with pytest.raises(ConfigurationError):
            Flow(id="f", src="a", dst="b", size=1.0, weight=-1.0).validate()


class TestEventQueue:
    def test_fifo_tie_break(self):
        q = EventQueue()
        q.push(1.0, "a")
        q.push(1.0, "b")
        q.push(0.5, "c")
        assert [q.pop()[1] for _ in range(3)] == ["c", "a", "b"]

    def test_clock_advances(self):
        q = EventQueue()
        q.push(2.0, "a")
        q.pop()
        assert q.now == 2.0
        with pytest.raises(ValueError):
            q.push(1.0, "late")

    def test_peek_and_len(self):
        q = EventQueue()
        assert q.peek_time() is None and not q
        q.push(3.0, "a")
        assert q.peek_time() == 3.0 and len(q) == 1
