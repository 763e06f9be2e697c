"""Per-agent labeled MDPs and the joint team environments.

Each agent only observes its own cell. The local state additionally carries
door flags, whether the agent was on its press cell, and the state of the
sub-task machine that defines termination (hidden from the learner).

In individual training, events caused by teammates are simulated. The yellow
and green doors open with probability ``p_sync`` per step while the agent waits
next to them. The red button event repeats for as long as it is held down: for
the pressing agents it fires with probability ``p_sync`` per step while they
keep pressing, and agent 1, which in the team receives it wherever it stands,
sees it with probability ``p_sync`` on every step.
"""
from __future__ import annotations

from importlib import resources
from typing import NamedTuple

from ..rm_core import EMPTY, RewardMachine, deserialize
from .grid import ACTIONS, NOOP, GridMap, load_map

TASKS = ("three_buttons", "rendezvous")


def _data(*parts) -> str:
    return resources.files("coop_rm").joinpath("data", *parts).read_text()


def default_map(task: str) -> GridMap:
    return load_map(_data("maps", f"{task}_7x7.map"))


def handcrafted_rms(task: str) -> dict:
    n = 3 if task == "three_buttons" else 2
    return {i: deserialize(_data("rms", f"{task}_a{i}.rm")) for i in range(1, n + 1)}


class _TaskMachine:
    """Dict-backed stepping of a sub-task machine, for termination checks."""

    def __init__(self, rm: RewardMachine):
        self.rm = rm
        self.initial = rm.initial
        self.final = rm.final
        self.delta = dict(rm.transitions)

    def step(self, u, lab):
        for p in lab:
            v = self.delta.get((u, p))
            if v is not None:
                return v
        return u


class ButtonsState(NamedTuple):
    cell: tuple
    yellow: bool
    green: bool
    red: bool
    on_red: bool
    u: str


class MeetState(NamedTuple):
    cell: tuple
    on_rdv: bool
    u: str


class AgentTask:
    """One agent's view of a cooperative task, trained in isolation."""

    actions = ACTIONS
    name = ""

    def __init__(self, agent_id: int, grid: GridMap, props, shared, task_rm: RewardMachine,
                 p_sync: float = 0.3):
        if not 0.0 <= p_sync <= 1.0:
            raise ValueError("p_sync must lie in [0, 1]")
        self.agent_id = agent_id
        self.grid = grid
        self.props = frozenset(props)
        self.shared = frozenset(shared)
        self.p_sync = p_sync
        self.task_rm = task_rm
        self._machine = _TaskMachine(task_rm)
        self._labels = {p: frozenset((p,)) for p in self.props}
        self.n_obs = grid.n_cells

    def observe(self, state) -> int:
        return self.grid.index(state.cell)

    def sync_resolve(self, prop: str, rng) -> bool:
        if prop not in self.shared:
            raise ValueError(f"{prop} is not shared by agent {self.agent_id}")
        return rng.random() < self.p_sync

    def goal_reached(self, state) -> bool:
        return state.u == self._machine.final

    def reset(self):
        raise NotImplementedError

    def local_step(self, s, a, rng):
        raise NotImplementedError


class ThreeButtonsTask(AgentTask):
    name = "three_buttons"
    PROPS = {
        1: ("YB", "RB", "GOAL"),
        2: ("YB", "GB", "A2_RB", "A2_NOT_RB", "RB"),
        3: ("GB", "A3_RB", "A3_NOT_RB", "RB"),
    }

    def __init__(self, agent_id: int, grid: GridMap, task_rm: RewardMachine, p_sync: float = 0.3):
        props = self.PROPS[agent_id]
        others = set().union(*(set(v) for k, v in self.PROPS.items() if k != agent_id))
        super().__init__(agent_id, grid, props, set(props) & others, task_rm, p_sync)
        self.press = f"A{agent_id}_RB"
        self.release = f"A{agent_id}_NOT_RB"
        self.red_button = grid.buttons["red"]
        self.front = {color: grid.door_front(color) for color in grid.doors}

    def reset(self) -> ButtonsState:
        return ButtonsState(self.grid.starts[self.agent_id], False, False, False, False,
                            self._machine.initial)

    def blocked(self, yellow, green, red):
        doors = self.grid.doors
        out = set()
        if not yellow:
            out |= doors.get("yellow", frozenset())
        if not green:
            out |= doors.get("green", frozenset())
        if not red:
            out |= doors.get("red", frozenset())
        return out

    def local_step(self, s: ButtonsState, a: int, rng):
        grid = self.grid
        yellow, green, red = s.yellow, s.green, s.red
        cell = grid.move(s.cell, a, self.blocked(yellow, green, red))
        prop = None
        on_red = False
        if self.agent_id == 1:
            if cell == grid.buttons["yellow"] and not yellow:
                prop, yellow = "YB", True
            elif cell == grid.goals[1] and s.cell != cell:
                prop = "GOAL"
            elif self.sync_resolve("RB", rng):
                prop, red = "RB", True
        else:
            on_red = cell == self.red_button
            if self.agent_id == 2 and not yellow and cell in self.front["yellow"] \
                    and self.sync_resolve("YB", rng):
                prop, yellow = "YB", True
            elif self.agent_id == 3 and not green and cell in self.front["green"] \
                    and self.sync_resolve("GB", rng):
                prop, green = "GB", True
            elif self.agent_id == 2 and cell == grid.buttons["green"] and not green:
                prop, green = "GB", True
            elif on_red:
                prop = "RB" if s.on_red and self.sync_resolve("RB", rng) else self.press
            elif s.on_red:
                prop = self.release
        lab = self._labels[prop] if prop else EMPTY
        u = self._machine.step(s.u, lab)
        s2 = ButtonsState(cell, yellow, green, red, on_red, u)
        return s2, lab, u == self._machine.final


class RendezvousTask(AgentTask):
    name = "rendezvous"

    def __init__(self, agent_id: int, grid: GridMap, task_rm: RewardMachine, p_sync: float = 0.3):
        i = agent_id
        props = (f"R{i}", f"NOT_R{i}", "R", f"G{i}")
        super().__init__(agent_id, grid, props, {"R"}, task_rm, p_sync)
        self.here, self.gone, self.goal_prop = f"R{i}", f"NOT_R{i}", f"G{i}"
        self.rdv = grid.rendezvous
        self.goal = grid.goals[i]

    def reset(self) -> MeetState:
        return MeetState(self.grid.starts[self.agent_id], False, self._machine.initial)

    def local_step(self, s: MeetState, a: int, rng):
        cell = self.grid.move(s.cell, a)
        on = cell == self.rdv
        prop = None
        if on:
            prop = "R" if s.on_rdv and self.sync_resolve("R", rng) else self.here
        elif s.on_rdv:
            prop = self.gone
        elif cell == self.goal and s.cell != cell:
            prop = self.goal_prop
        lab = self._labels[prop] if prop else EMPTY
        u = self._machine.step(s.u, lab)
        return MeetState(cell, on, u), lab, u == self._machine.final


def local_step(task: AgentTask, s, a, rng):
    return task.local_step(s, a, rng)


def sync_resolve(task: AgentTask, prop: str, rng) -> bool:
    return task.sync_resolve(prop, rng)


# --- team mode -------------------------------------------------------------------

class TeamState(NamedTuple):
    cells: tuple
    yellow: bool
    green: bool
    red: bool
    on_press: tuple
    us: tuple


class TeamEnv:
    """All agents stepping together with real synchronisation."""

    name = ""

    def __init__(self, grid: GridMap, task_rms: dict):
        self.grid = grid
        self.agent_ids = tuple(sorted(task_rms))
        self.n_agents = len(self.agent_ids)
        self._machines = [_TaskMachine(task_rms[i]) for i in self.agent_ids]
        self._labels = {}

    def _lab(self, props):
        key = frozenset(props)
        if key not in self._labels:
            self._labels[key] = key
        return self._labels[key]

    def observe(self, state, k: int) -> int:
        return self.grid.index(state.cells[k])

    def agent_done(self, state, k: int) -> bool:
        return state.us[k] == self._machines[k].final

    def collective_goal(self, state) -> bool:
        raise NotImplementedError

    def _advance(self, us, labels):
        return tuple(m.step(u, lab) if u != m.final else u
                     for m, u, lab in zip(self._machines, us, labels))


class ThreeButtonsTeam(TeamEnv):
    name = "three_buttons"

    def reset(self) -> TeamState:
        g = self.grid
        return TeamState(tuple(g.starts[i] for i in self.agent_ids), False, False, False,
                         (False,) * self.n_agents, tuple(m.initial for m in self._machines))

    def team_step(self, state: TeamState, joint_action):
        g = self.grid
        doors = g.doors
        blocked = set()
        if not state.yellow:
            blocked |= doors["yellow"]
        if not state.green:
            blocked |= doors["green"]
        if not state.red:
            blocked |= doors["red"]
        cells = tuple(g.move(c, a, blocked) for c, a in zip(state.cells, joint_action))
        yellow, green, red = state.yellow, state.green, state.red
        props = [[] for _ in cells]
        # indices 0, 1, 2 are agents 1, 2, 3
        if cells[0] == g.buttons["yellow"] and not yellow:
            yellow = True
            props[0].append("YB")
            props[1].append("YB")
        if cells[1] == g.buttons["green"] and not green:
            green = True
            props[1].append("GB")
            props[2].append("GB")
        # an agent's own arrival outranks the repeating red event
        if cells[0] == g.goals[1] and state.cells[0] != cells[0]:
            props[0].append("GOAL")
        rb = g.buttons["red"]
        on = (False, cells[1] == rb, cells[2] == rb)
        # the red event repeats while both keep pressing
        if on[1] and on[2] and state.on_press[1] and state.on_press[2]:
            red = True
            for p in props:
                p.append("RB")
        else:
            for k in (1, 2):
                if on[k]:
                    props[k].append(f"A{k + 1}_RB")
                elif state.on_press[k]:
                    props[k].append(f"A{k + 1}_NOT_RB")
        labels = [self._lab(p[:1]) for p in props]
        us = self._advance(state.us, labels)
        s2 = TeamState(cells, yellow, green, red, on, us)
        return s2, labels, self.collective_goal(s2)

    def collective_goal(self, state) -> bool:
        return state.us[0] == self._machines[0].final


class RendezvousTeam(TeamEnv):
    name = "rendezvous"

    def reset(self) -> TeamState:
        g = self.grid
        return TeamState(tuple(g.starts[i] for i in self.agent_ids), False, False, False,
                         (False,) * self.n_agents, tuple(m.initial for m in self._machines))

    def team_step(self, state: TeamState, joint_action):
        g = self.grid
        cells = tuple(g.move(c, a) for c, a in zip(state.cells, joint_action))
        on = tuple(c == g.rendezvous for c in cells)
        met = all(on) and all(state.on_press)
        labels = []
        for k, i in enumerate(self.agent_ids):
            if met:
                p = "R"
            elif on[k]:
                p = f"R{i}"
            elif state.on_press[k]:
                p = f"NOT_R{i}"
            elif cells[k] == g.goals[i] and state.cells[k] != cells[k]:
                p = f"G{i}"
            else:
                p = None
            labels.append(self._lab((p,) if p else ()))
        us = self._advance(state.us, labels)
        s2 = TeamState(cells, False, False, False, on, us)
        return s2, labels, self.collective_goal(s2)

    def collective_goal(self, state) -> bool:
        return all(u == m.final for u, m in zip(state.us, self._machines))


def make_tasks(task: str, grid: GridMap | None = None, p_sync: float = 0.3) -> list:
    grid = grid or default_map(task)
    rms = handcrafted_rms(task)
    cls = ThreeButtonsTask if task == "three_buttons" else RendezvousTask
    return [cls(i, grid, rms[i], p_sync) for i in sorted(rms)]


def make_team(task: str, grid: GridMap | None = None) -> TeamEnv:
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    grid = grid or default_map(task)
    cls = ThreeButtonsTeam if task == "three_buttons" else RendezvousTeam
    return cls(grid, handcrafted_rms(task))


def global_label(labels) -> frozenset:
    return frozenset().union(*labels)


__all__ = [
    "AgentTask", "ThreeButtonsTask", "RendezvousTask", "TeamEnv", "ThreeButtonsTeam",
    "RendezvousTeam", "ButtonsState", "MeetState", "TeamState", "make_tasks", "make_team",
    "default_map", "handcrafted_rms", "local_step", "sync_resolve", "global_label", "NOOP",
    "TASKS",
]
