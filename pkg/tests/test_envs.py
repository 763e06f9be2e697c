import numpy as np
import pytest
from hypothesis import given, strategies as st

from coop_rm.envs import (ACTIONS, DOWN, LEFT, NOOP, RIGHT, UP, ButtonsState, InvalidAction,
                          MeetState, default_map, load_map, make_tasks, make_team)
from coop_rm.rm_core import EMPTY, ParseError, label


def test_shipped_three_buttons_map():
    g = default_map("three_buttons")
    assert (g.width, g.height) == (7, 7)
    assert sorted(g.starts) == [1, 2, 3]
    assert sorted(g.buttons) == ["green", "red", "yellow"]
    assert sorted(g.doors) == ["green", "red", "yellow"]
    assert len(g.goal_cells) == 1 and g.goals == {1: (6, 6)}
    for cell in list(g.starts.values()) + list(g.buttons.values()):
        assert cell not in g.walls


def test_shipped_rendezvous_map():
    g = default_map("rendezvous")
    assert (g.width, g.height) == (7, 7)
    assert g.rendezvous == (3, 3)
    assert sorted(g.goals) == [1, 2]


def test_tiny_and_bad_maps():
    g = load_map("1\n")
    assert (g.width, g.height) == (1, 1) and g.starts == {1: (0, 0)}
    with pytest.raises(ParseError) as err:
        load_map("1.\n.Z\n")
    assert (err.value.line, err.value.column) == (2, 2)
    with pytest.raises(ParseError):
        load_map("1.\n...\n")
    with pytest.raises(ParseError):
        load_map("1X\n\ngoal 1 5 5\n")
    with pytest.raises(ParseError):
        load_map("1X\n\ngoal 1 0 0\n")


def test_invalid_action():
    g = default_map("three_buttons")
    with pytest.raises(InvalidAction):
        g.move((0, 0), 9)


def _a1(p_sync=0.0):
    return make_tasks("three_buttons", p_sync=p_sync)[0]


def test_a1_presses_yellow():
    a1 = _a1()
    s = ButtonsState((0, 0), False, False, False, False, "u0")
    s2, lab, goal = a1.local_step(s, RIGHT, np.random.default_rng(0))
    assert (s2.cell, lab, goal) == ((0, 1), label("YB"), False)
    assert s2.yellow and s2.u == "u1"


def test_blocked_move_is_noop():
    a1 = _a1()
    s = ButtonsState((0, 1), True, False, False, False, "u1")
    s2, lab, goal = a1.local_step(s, RIGHT, np.random.default_rng(0))  # wall at (0, 2)
    assert (s2.cell, lab, goal) == ((0, 1), EMPTY, False)


def test_a1_reaches_goal():
    a1 = _a1()
    s = ButtonsState((6, 5), True, False, True, False, "u2")
    s2, lab, goal = a1.local_step(s, RIGHT, np.random.default_rng(0))
    assert (s2.cell, lab, goal) == ((6, 6), label("GOAL"), True)


def test_closed_red_door_blocks():
    a1 = _a1()
    s = ButtonsState((6, 2), True, False, False, False, "u1")
    s2, _, _ = a1.local_step(s, RIGHT, np.random.default_rng(0))
    assert s2.cell == (6, 2)


def test_a2_press_release_and_sync():
    a2 = make_tasks("three_buttons", p_sync=1.0)[1]
    rng = np.random.default_rng(0)
    red = a2.grid.buttons["red"]
    s = ButtonsState((red[0] - 1, red[1]), True, True, False, False, "u2")
    s, lab, _ = a2.local_step(s, DOWN, rng)
    assert lab == label("A2_RB") and s.on_red
    s2, lab, goal = a2.local_step(s, NOOP, rng)
    assert lab == label("RB") and goal
    a2 = make_tasks("three_buttons", p_sync=0.0)[1]
    s2, lab, _ = a2.local_step(s, NOOP, rng)
    assert lab == label("A2_RB")
    s3, lab, _ = a2.local_step(s2, UP, rng)
    assert lab == label("A2_NOT_RB") and not s3.on_red


def test_sync_resolve_guards_unshared():
    a1 = _a1(0.3)
    with pytest.raises(ValueError):
        a1.sync_resolve("GOAL", np.random.default_rng(0))


@pytest.mark.parametrize("p, expect", [(1.0, 1.0), (0.0, 0.0)])
def test_sync_degenerate(p, expect):
    a2 = make_tasks("three_buttons", p_sync=p)[1]
    rng = np.random.default_rng(1)
    assert np.mean([a2.sync_resolve("RB", rng) for _ in range(200)]) == expect


def test_sync_empirical_rate():
    # Monte-Carlo check of the configured constant on eligible steps
    a2 = make_tasks("three_buttons", p_sync=0.3)[1]
    rng = np.random.default_rng(123)
    rate = np.mean([a2.sync_resolve("RB", rng) for _ in range(10_000)])
    assert abs(rate - 0.3) <= 0.02


def test_sync_rate_through_local_step():
    # a2 holding the red button: RB shows up on about 30% of steps
    a2 = make_tasks("three_buttons", p_sync=0.3)[1]
    rng = np.random.default_rng(7)
    red = a2.grid.buttons["red"]
    s = ButtonsState(red, True, True, False, True, "u1")
    hits = sum(a2.local_step(s, NOOP, rng)[1] == label("RB") for _ in range(10_000))
    assert abs(hits / 10_000 - 0.3) <= 0.02


def test_p_sync_zero_starves_a2_and_a3():
    for task in make_tasks("three_buttons", p_sync=0.0)[1:]:
        rng = np.random.default_rng(0)
        s = task.reset()
        for _ in range(2000):
            s, lab, goal = task.local_step(s, int(rng.integers(5)), rng)
            assert not goal
            assert lab != label("RB")


def test_team_red_needs_both():
    team = make_team("three_buttons")
    g = team.grid
    red = g.buttons["red"]
    above = (red[0] - 1, red[1])
    s = team.reset()._replace(cells=((0, 1), red, above), yellow=True, green=True,
                              on_press=(False, True, False), us=("u1", "u3", "u1"))
    s2, labels, _ = team.team_step(s, (NOOP, NOOP, NOOP))
    assert labels[1] == label("A2_RB") and labels[2] == EMPTY and not s2.red
    s3, labels, _ = team.team_step(s2, (NOOP, NOOP, DOWN))
    assert labels[2] == label("A3_RB") and not s3.red
    s4, labels, _ = team.team_step(s3, (NOOP, NOOP, NOOP))
    assert labels == [label("RB")] * 3 and s4.red


def test_rendezvous_team_labels():
    team = make_team("rendezvous")
    rdv = team.grid.rendezvous
    s = team.reset()._replace(cells=(rdv, (0, 6)), on_press=(True, False))
    s2, labels, _ = team.team_step(s, (NOOP, NOOP))
    assert labels == [label("R1"), EMPTY]
    s = s._replace(cells=(rdv, rdv), on_press=(True, True))
    _, labels, _ = team.team_step(s, (NOOP, NOOP))
    assert labels == [label("R"), label("R")]


def test_rendezvous_individual():
    a1 = make_tasks("rendezvous", p_sync=1.0)[0]
    rng = np.random.default_rng(0)
    rdv = a1.grid.rendezvous
    s = MeetState((rdv[0], rdv[1] - 1), False, "u0")
    s, lab, _ = a1.local_step(s, RIGHT, rng)
    assert lab == label("R1")
    s, lab, _ = a1.local_step(s, NOOP, rng)
    assert lab == label("R") and s.u == "u2"
    s, lab, _ = a1.local_step(s, LEFT, rng)
    assert lab == label("NOT_R1")


def _random_team_states(task, n, seed):
    team = make_team(task)
    rng = np.random.default_rng(seed)
    s = team.reset()
    out = []
    for _ in range(n):
        acts = tuple(int(a) for a in rng.integers(5, size=team.n_agents))
        s2, labels, goal = team.team_step(s, acts)
        out.append((team, s, acts, s2, labels, goal))
        s = team.reset() if goal or rng.random() < 0.01 else s2
    return out


@pytest.mark.parametrize("task", ["three_buttons", "rendezvous"])
def test_factorization_and_label_locality(task):
    tasks = make_tasks(task, p_sync=0.0)
    for team, s, acts, s2, labels, goal in _random_team_states(task, 1000, 3):
        for k, (t, a) in enumerate(zip(tasks, acts)):
            if task == "three_buttons":
                local = ButtonsState(s.cells[k], s.yellow, s.green, s.red, s.on_press[k], "u0")
            else:
                local = MeetState(s.cells[k], s.on_press[k], "u0")
            ls2, _, _ = t.local_step(local, a, np.random.default_rng(0))
            assert ls2.cell == s2.cells[k]
            assert len(labels[k]) <= 1
            assert labels[k] <= t.props
        # door monotonicity
        for flag0, flag1 in zip((s.yellow, s.green, s.red), (s2.yellow, s2.green, s2.red)):
            assert flag1 or not flag0
        # termination consistency
        if task == "three_buttons":
            assert goal == (s2.us[0] == "uA")
        else:
            assert goal == all(u == "uA" for u in s2.us)


@given(st.integers(0, 2**32 - 1), st.lists(st.sampled_from(ACTIONS), min_size=1, max_size=60))
def test_individual_determinism_given_seed(seed, actions):
    def roll():
        rng = np.random.default_rng(seed)
        out = []
        for t in make_tasks("three_buttons", p_sync=0.3):
            s = t.reset()
            for a in actions:
                s, lab, goal = t.local_step(s, a, rng)
                out.append((s, lab, goal))
        return out
    assert roll() == roll()
