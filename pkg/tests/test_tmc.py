"""Oracle checks: frozen certified results, backend agreement, and an
independent replay of every controller the search returns."""

from fractions import Fraction

import pytest

from memtask.tasks import build_task
from memtask.tmc import (
    BACKEND,
    BudgetExceeded,
    best_value_with_memory,
    compute_tmc,
    optimal_value,
    tabulate,
)

# (task, m_max) -> (v_by_m, tmc label); values verified by hand for the
# small instances (e.g. put_back_block with 2 pads: guessing the original
# pad without memory wins 1/2) and frozen from certified runs otherwise.
FROZEN = {
    ("observe_and_pick_up_reduced", 2): ([Fraction(1, 2), 1], "1"),
    ("rearrange_blocks_reduced", 2): ([Fraction(1, 2), 1], "1"),
    ("put_back_block_reduced", 2): ([Fraction(1, 2), 1], "1"),
    ("swap_blocks_reduced", 2): ([Fraction(1, 3), 1], "1"),
    ("swap_t_reduced", 2): ([Fraction(3, 4), 1], "1"),
    ("battery_try_reduced", 2): ([Fraction(1, 2), Fraction(3, 4), 1], "2"),
    ("press_button_reduced", 2): ([0, Fraction(1, 4), Fraction(1, 2)], ">2"),
    ("blocks_ranking_try_reduced", 1): ([Fraction(1, 3), Fraction(1, 2)], ">1"),
    ("pick_fixed_block_reduced", 2): ([1], "0"),
}


def replay(table, controller):
    """Success fraction of ``controller`` simulated directly on the table."""
    wins = 0
    for s in table.init:
        s, bank = int(s), ()
        for _ in range(table.horizon):
            if table.success[s]:
                break
            dec = controller.decisions.get((int(table.obs[s]), bank))
            if dec is None:
                break
            a, write = dec
            if write:
                bank = bank + (int(table.obs[s]),)
            s = int(table.trans[s, a])
        wins += bool(table.success[s])
    return Fraction(wins, len(table.init))


@pytest.mark.parametrize("key", sorted(FROZEN))
def test_frozen_certified_results(key):
    task, m_max = key
    expected, label = FROZEN[key]
    res = compute_tmc(build_task(task), m_max=m_max)
    assert res.certified and res.error is None
    assert res.v_star == 1.0
    assert res.v_by_m == [float(v) for v in expected]
    assert res.tmc_label == label
    assert all(a <= b for a, b in zip(res.v_by_m, res.v_by_m[1:]))


def test_cover_blocks_needs_two_slots():
    res = compute_tmc(build_task("cover_blocks_reduced"), m_max=2)
    assert res.certified and res.tmc == 2
    assert res.v_by_m[0] == pytest.approx(1 / 6, abs=1e-12) and res.exact_by_m[0]
    assert res.v_by_m[1] < 1.0  # m=1 provably short of the optimum
    assert res.v_by_m[2] == 1.0


def test_put_back_block_memoryless_cap_is_one_quarter():
    mv = best_value_with_memory(build_task("put_back_block"), 0, target=1.0)
    assert mv.exact and mv.reaches_target is False
    assert mv.value == 0.25


@pytest.mark.parametrize("task,m", [("put_back_block_reduced", 1), ("swap_blocks_reduced", 0),
                                    ("swap_t_reduced", 0), ("battery_try_reduced", 1),
                                    ("battery_try_reduced", 2), ("press_button_reduced", 1)])
def test_controller_replay_matches_reported_value(task, m):
    table = tabulate(build_task(task))
    mv = best_value_with_memory(table, m)
    assert mv.exact
    assert replay(table, mv.controller) == Fraction(mv.value).limit_denominator(1000)
    assert all(len(bank) <= m for _, bank in mv.controller.decisions)


@pytest.mark.skipif(BACKEND != "cython", reason="compiled kernel not built")
@pytest.mark.parametrize("task", ["observe_and_pick_up_reduced", "put_back_block_reduced", "swap_blocks_reduced",
                                  "swap_t_reduced", "battery_try_reduced", "pick_fixed_block_reduced"])
def test_backends_agree(task):
    spec = build_task(task)
    a = compute_tmc(spec, m_max=2, backend="cython")
    b = compute_tmc(spec, m_max=2, backend="python")
    assert (a.v_by_m, a.tmc, a.certified, a.exact_by_m) == (b.v_by_m, b.tmc, b.certified, b.exact_by_m)


def test_budget_exhaustion_is_reported_not_hidden():
    res = compute_tmc(build_task("cover_blocks_reduced"), m_max=2, budget=1000, value_budget=1000)
    assert not res.certified
    assert res.tmc is None and "budget" in res.error
    assert res.tmc_label.startswith(">=")


def test_optimal_value_node_cap():
    with pytest.raises(BudgetExceeded):
        optimal_value(build_task("blocks_ranking_try"), node_cap=10)


def test_result_json_roundtrip_fields():
    res = compute_tmc(build_task("press_button_reduced"), m_max=1)
    d = res.to_json()
    for field in ("v_star", "v_by_m", "tmc", "certified", "nodes_explored", "memory_model"):
        assert field in d
    assert d["tmc"] == ">1"
