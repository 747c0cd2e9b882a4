import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rsucoal import (
    DuplicatePolicy,
    Scenario,
    ScenarioError,
    best_assignment,
    coalition_cost,
    coalition_revenue,
    evaluate_coalition,
    load_scenario,
    meeting_pairs,
    noncoop_utility,
    pairwise_distance,
)
from rsucoal.model import save_scenario

from . import oracles
from .conftest import CONFIGS
from .conftest import random_scenario, two_rsu


def line(x, y, n=2):
    return Scenario(positions=[[0, 0], [x, y]][:n], traffic=[[0, 1], [1, 0]],
                    chunks_per_vehicle=1, class_weights=(1.0,), beta=1, alpha=0, delta=0.5)


class TestDistanceAndMeetings:
    def test_three_four_five(self):
        assert pairwise_distance(line(3, 4))[0, 1] == 5.0

    def test_identical_positions(self):
        assert pairwise_distance(line(0, 0))[0, 1] == 0.0

    def test_symmetric_zero_diagonal(self):
        s = random_scenario(1, 3)
        d = pairwise_distance(s)
        assert np.allclose(d, d.T) and np.all(np.diag(d) == 0)

    def _pair(self, K_ij, K_ji, dist, delta):
        return Scenario(positions=[[0, 0], [dist, 0]], traffic=[[0, K_ij], [K_ji, 0]],
                        chunks_per_vehicle=1, class_weights=(1.0,), beta=1, alpha=0, delta=delta)

    def test_arithmetic(self):
        assert meeting_pairs(0, 1, self._pair(25, 25, 1, 0.8)) == pytest.approx(20.0, abs=1e-12)
        assert meeting_pairs(0, 1, self._pair(25, 25, 1.5, 0.0)) == 0.0
        assert meeting_pairs(0, 1, self._pair(10, 20, 2, 0.8)) == pytest.approx(6.4, abs=1e-12)

    def test_symmetric(self):
        s = self._pair(10, 20, 2, 0.8)
        assert meeting_pairs(0, 1, s) == meeting_pairs(1, 0, s)

    def test_same_rsu_rejected(self):
        with pytest.raises(ValueError):
            meeting_pairs(1, 1, two_rsu())

    @given(st.integers(0, 10_000), st.floats(0, 1))
    def test_bound(self, seed, delta):
        s = random_scenario(seed, 4, delta=delta, per_rsu=False)
        for i, j in itertools.permutations(range(4), 2):
            assert meeting_pairs(i, j, s) <= min(s.traffic[i, j], s.traffic[j, i])


class TestUtilities:
    def test_worked_example_standalone(self):
        s = two_rsu()
        assert noncoop_utility(0, s) == pytest.approx(1.2, abs=1e-9)
        assert noncoop_utility(1, s) == pytest.approx(1.2, abs=1e-9)

    def test_closed_form(self):
        s = Scenario(positions=np.zeros((3, 2)), traffic=5 * (1 - np.eye(3)), chunks_per_vehicle=10,
                     class_weights=(0.9,), beta=1, alpha=0, delta=0.5)
        assert noncoop_utility(0, s) == pytest.approx(90.0, abs=1e-9)

    def test_zero_traffic(self):
        s = Scenario(positions=np.zeros((2, 2)), traffic=np.zeros((2, 2)), chunks_per_vehicle=10,
                     class_weights=(0.9,), beta=1, alpha=0, delta=0.5)
        assert noncoop_utility(0, s) == 0.0

    def test_revenue_examples(self):
        s = two_rsu()
        assert coalition_revenue({0, 1}, {0: 0, 1: 1}, s) == pytest.approx(4.4, abs=1e-9)
        assert coalition_revenue({0, 1}, {0: 0, 1: 0}, s) == pytest.approx(2.4, abs=1e-9)
        assert coalition_revenue({0, 1}, {0: 0, 1: 0}, two_rsu(policy="literal")) == pytest.approx(4.8)

    def test_revenue_matches_vehicle_enumeration(self):
        for seed in range(20):
            for policy in ("discount", "literal"):
                s = random_scenario(seed, 4, n_classes=3, integer_pairs=True, per_rsu=False,
                                    policy=policy)
                for size in (1, 2, 3):
                    for S in itertools.combinations(range(4), size):
                        for c in itertools.product(range(3), repeat=size):
                            got = coalition_revenue(S, dict(zip(S, c)), s)
                            want = oracles.vehicle_revenue(s, S, c)
                            assert got == pytest.approx(want, rel=1e-12, abs=1e-9)

    def test_singleton_revenue(self):
        s = random_scenario(3, 5)
        for i in range(5):
            for c in range(3):
                # outward links always carry c1
                assert coalition_revenue({i}, {i: c}, s) == pytest.approx(noncoop_utility(i, s))

    def test_assignment_mismatch(self):
        with pytest.raises(ValueError):
            coalition_revenue({0, 1}, {0: 0}, two_rsu())
        with pytest.raises(ValueError):
            coalition_revenue({0, 1}, {0: 0, 1: 5}, two_rsu())

    def test_costs(self):
        s = random_scenario(0, 4, alpha=10)
        assert coalition_cost({2}, s) == 0
        assert coalition_cost({0, 1, 2}, s) == 30
        assert coalition_cost({0, 1}, two_rsu(alpha=0)) == 0
        with pytest.raises(ValueError):
            coalition_cost(set(), s)


class TestBestAssignment:
    def test_worked_example(self):
        assignment, revenue = best_assignment({0, 1}, two_rsu())
        assert assignment == {0: 0, 1: 1}
        assert revenue == pytest.approx(4.4, abs=1e-9)

    def test_singleton(self):
        s = random_scenario(2, 4)
        assignment, revenue = best_assignment({3}, s)
        assert assignment == {3: 0} and revenue == noncoop_utility(3, s)

    @pytest.mark.parametrize("seed", range(25))
    def test_brute_force(self, seed):
        s = random_scenario(seed, 6, n_classes=3, per_rsu=seed % 2 == 0,
                            policy="literal" if seed % 3 == 0 else "discount")
        rng = np.random.default_rng(seed)
        for size in (2, 3, 4):
            S = sorted(rng.choice(6, size, replace=False).tolist())
            got_a, got_r = best_assignment(S, s)
            want_a, want_r = oracles.brute_best_assignment(s, S)
            assert got_r == pytest.approx(want_r, abs=1e-9)
            assert got_a == want_a

    def test_symmetric_tie_goes_lexicographic(self):
        # c1/c2 and c2/c1 are worth the same; member 0 gets c1
        assignment, _ = best_assignment({0, 1}, two_rsu())
        assert assignment[0] == 0

    @given(st.integers(0, 10_000), st.floats(0, 1), st.floats(0, 1))
    @settings(max_examples=40, deadline=None)
    def test_monotone_in_delta(self, seed, d1, d2):
        lo, hi = sorted((d1, d2))
        base = random_scenario(seed, 4, delta=lo)
        for policy in ("discount", "literal"):
            a = base.replace(delta=lo, duplicate_class_policy=policy)
            b = base.replace(delta=hi, duplicate_class_policy=policy)
            S = range(4)
            assert best_assignment(S, b)[1] >= best_assignment(S, a)[1] - 1e-9

    @given(st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_policy_ordering(self, seed):
        s = random_scenario(seed, 4, n_classes=2)
        lit = s.replace(duplicate_class_policy="literal")
        for size in (2, 3, 4):
            for S in itertools.combinations(range(4), size):
                disc_a, disc_r = best_assignment(S, s)
                assert best_assignment(S, lit)[1] >= disc_r - 1e-9
                if len(set(disc_a.values())) == size:
                    assert coalition_revenue(S, disc_a, lit) == pytest.approx(disc_r, abs=1e-9)


class TestEvaluation:
    def test_worked_example(self):
        ev = evaluate_coalition({0, 1}, two_rsu())
        assert ev.value == pytest.approx(4.4, abs=1e-9)
        assert ev.payoffs[0] == pytest.approx(2.2, abs=1e-9)
        assert ev.payoffs[1] == pytest.approx(2.2, abs=1e-9)
        assert ev.value == ev.revenue - ev.cost

    def test_singleton_exact(self):
        s = random_scenario(4, 5)
        for i in range(5):
            ev = evaluate_coalition({i}, s)
            assert ev.value == noncoop_utility(i, s)
            assert ev.payoffs[i] == ev.value

    def test_no_v2v_costs_alpha_each(self):
        s = two_rsu(alpha=10, delta=0.0)
        ev = evaluate_coalition({0, 1}, s)
        for i in (0, 1):
            assert ev.payoffs[i] == pytest.approx(noncoop_utility(i, s) - 10, abs=1e-9)

    @given(st.integers(0, 10_000), st.integers(2, 5))
    @settings(max_examples=30, deadline=None)
    def test_no_v2v_degeneracy(self, seed, n):
        s = random_scenario(seed, n, delta=0.0)
        S = range(n)
        ev = evaluate_coalition(S, s)
        standalone = [noncoop_utility(i, s) for i in S]
        assert ev.revenue == pytest.approx(math.fsum(standalone), abs=1e-9)
        assert ev.value == pytest.approx(math.fsum(standalone) - s.alpha * n, abs=1e-9)

    def test_payoffs_match_brute_force(self):
        s = random_scenario(9, 5)
        for S in [(0, 1), (1, 3, 4), (0, 1, 2, 3, 4)]:
            ev = evaluate_coalition(S, s)
            want = oracles.brute_payoffs(s, S)
            for i in S:
                assert ev.payoffs[i] == pytest.approx(want[i], abs=1e-9)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            evaluate_coalition([], two_rsu())

    def test_to_dict_labels(self):
        d = evaluate_coalition({0, 1}, two_rsu()).to_dict()
        assert d["classes"] == {"0": "c1", "1": "c2"}


class TestScenarioValidation:
    def test_weights_must_decrease(self):
        with pytest.raises(ScenarioError) as err:
            two_rsu().replace(class_weights=(0.5, 0.6))
        assert any("class_weights" in p for p in err.value.problems)

    def test_line_items(self):
        with pytest.raises(ScenarioError) as err:
            Scenario(positions=[[0, 0], [1, 0]], traffic=[[1, -1], [2, 0]], chunks_per_vehicle=0,
                     class_weights=(1.5,), beta=0, alpha=-1, delta=2)
        assert len(err.value.problems) >= 6

    def test_policy_coerced(self):
        assert two_rsu(policy="literal").duplicate_class_policy is DuplicatePolicy.LITERAL

    def test_read_only(self):
        s = two_rsu()
        with pytest.raises(ValueError):
            s.traffic[0, 1] = 5

    def test_round_trip(self, tmp_path):
        s = random_scenario(5, 4, per_rsu=False, policy="literal")
        save_scenario(s, tmp_path / "s.json")
        t = load_scenario(tmp_path / "s.json")
        assert np.array_equal(s.traffic, t.traffic) and np.array_equal(s.positions, t.positions)
        assert t.class_weights == s.class_weights and t.duplicate_class_policy == s.duplicate_class_policy

    def test_per_rsu_file(self, tmp_path):
        doc = {"positions": [[0, 0], [1, 0], [0, 1]], "traffic": {"per_rsu": [3, 4, 5]},
               "class_weights": [0.9, 0.8], "beta": 1, "alpha": 10, "delta": 0.8,
               "chunks_per_vehicle": 10, "duplicate_class_policy": "discount"}
        path = tmp_path / "s.json"
        path.write_text(json.dumps(doc))
        s = load_scenario(path)
        assert s.traffic.tolist() == [[0, 3, 3], [4, 0, 4], [5, 5, 0]]

    def test_unknown_key(self):
        doc = two_rsu().to_dict()
        doc["bogus"] = 1
        with pytest.raises(ScenarioError, match="bogus"):
            Scenario.from_dict(doc)

    def test_fixture_file(self):
        s = load_scenario(CONFIGS / "two_rsu_example.json")
        assert evaluate_coalition({0, 1}, s).value == pytest.approx(4.4, abs=1e-9)
