"""Interleaved per-agent Q-learning and reward machine induction, with team evaluation."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .envs import NOOP, AgentTask, TeamEnv, make_tasks, make_team
from .envs.grid import GridMap
from .induction import ExampleSets, InductionBudget, learn_minimal
from .qrm import Hyperparams, QPolicy, greedy_action, select_action, update_all
from .rm_core import EMPTY, RewardMachine, Trace, TraceKind, ends_in_final, two_state_rm

MODES = ("provided", "learn", "flat")
DONE = "DONE"
_DONE_LABEL = frozenset((DONE,))


def flat_rm() -> RewardMachine:
    """Two states, final reached only when the task itself is completed."""
    return RewardMachine(("u0", "uA"), frozenset((DONE,)), "u0", "uA", {("u0", DONE): "uA"})


def generate_incomplete_prefixes(goal: Trace) -> set:
    """Proper non-empty prefixes of a goal trace, as incomplete traces."""
    if goal.kind is not TraceKind.GOAL:
        raise ValueError("prefixes are generated from goal traces only")
    labels = goal.labels
    return {Trace(labels[:k], TraceKind.INCOMPLETE) for k in range(1, len(labels))}


@dataclass
class InductionRecord:
    agent: int
    call: int
    examples: ExampleSets
    rm: RewardMachine
    seconds: float


class AgentLearner:
    def __init__(self, task: AgentTask, mode: str, hp: Hyperparams,
                 budget: InductionBudget | None = None, on_induction=None,
                 provided: RewardMachine | None = None):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        self.task = task
        self.mode = mode
        self.hp = hp
        self.budget = budget or InductionBudget()
        self.on_induction = on_induction
        if mode == "provided":
            rm = provided if provided is not None else task.task_rm
        elif mode == "flat":
            rm = flat_rm()
        else:
            rm = two_state_rm(task.props)
        self.examples = ExampleSets()
        self.induction_calls = 0
        self.induction_wall = 0.0
        self.env_steps = 0
        self._install(rm)
        self.reset()

    def _install(self, rm: RewardMachine):
        self.rm = rm
        self.q = QPolicy(rm, self.task.n_obs, len(self.task.actions), self.hp.alpha,
                         self.hp.gamma, self.hp.epsilon)
        self.final = rm.index(rm.final)

    def reset(self):
        self.s = self.task.reset()
        self.obs = self.task.observe(self.s)
        self.u = self.rm.index(self.rm.initial)
        self.trace = []
        self.t = 0
        self.done = False
        self.outcome = None

    # --- example bookkeeping -------------------------------------------------------

    def _relearn(self, new_goals=(), new_incompletes=()):
        """Relearn only if the current machine contradicts a new example."""
        rm = self.rm
        if all(ends_in_final(rm, g) for g in new_goals) and \
                not any(ends_in_final(rm, t) for t in new_incompletes):
            return False
        t0 = time.perf_counter()
        new = learn_minimal(self.task.props, self.examples, rm.n_states, self.budget)
        dt = time.perf_counter() - t0
        self.induction_calls += 1
        self.induction_wall += dt
        if self.on_induction is not None:
            self.on_induction(InductionRecord(self.task.agent_id, self.induction_calls,
                                              self.examples.copy(), new, dt))
        if new != rm:
            self._install(new)
            return True
        return False

    def record_goal(self, trace: Trace) -> bool:
        stored = trace.compressed()
        self.examples.add_goal(stored)
        # prefixes come from the raw trace, then are stored compressed like everything else
        prefixes = {p.compressed() for p in generate_incomplete_prefixes(trace)}
        prefixes.discard(stored)
        for p in prefixes:
            self.examples.add_incomplete(p)
        return self._relearn([stored], prefixes)

    def record_incomplete(self, trace: Trace, relearn: bool) -> bool:
        stored = trace.compressed()
        self.examples.add_incomplete(stored)
        return self._relearn((), [stored]) if relearn else False


def train_agent_step(learner: AgentLearner, rng, epsilon: float | None = None) -> str | None:
    """One environment step; returns how the episode ended, if it did."""
    if learner.done:
        raise RuntimeError("agent is done for this episode")
    task, q = learner.task, learner.q
    a = select_action(q, learner.u, learner.obs, rng, epsilon)
    s2, lab, goal = task.local_step(learner.s, a, rng)
    obs2 = task.observe(s2)
    learner.trace.append(lab)
    if learner.mode == "flat":
        rm_lab = _DONE_LABEL if goal else EMPTY
    else:
        rm_lab = lab
    nxt, _ = learner.rm.step_table(rm_lab)
    u2 = nxt[learner.u]
    update_all(q, learner.obs, a, obs2, rm_lab)
    learner.s, learner.obs, learner.u = s2, obs2, u2
    learner.t += 1
    learner.env_steps += 1

    outcome = None
    if goal:
        outcome = "goal"
    elif u2 == learner.final:
        outcome = "counterexample"
    elif learner.t >= learner.hp.horizon:
        outcome = "horizon"
    if outcome is None:
        return None
    if learner.mode == "learn":
        trace = Trace(learner.trace, TraceKind.GOAL if outcome == "goal" else TraceKind.INCOMPLETE)
        if outcome == "goal":
            learner.record_goal(trace)
        else:
            learner.record_incomplete(trace, relearn=outcome == "counterexample")
    learner.done = True
    learner.outcome = outcome
    return outcome


def evaluate_team(learners, team: TeamEnv, n_episodes: int, horizon: int, rng) -> tuple:
    """Greedy joint rollouts; returns (mean steps, mean collective reward)."""
    steps_total = 0
    reward_total = 0
    n = len(learners)
    flat = [l.mode == "flat" for l in learners]
    for _ in range(n_episodes):
        state = team.reset()
        us = [l.rm.index(l.rm.initial) for l in learners]
        steps = horizon
        for t in range(horizon):
            actions = []
            idle = 0
            for k, l in enumerate(learners):
                if us[k] == l.final or team.agent_done(state, k):
                    actions.append(NOOP)
                    idle += 1
                else:
                    actions.append(greedy_action(l.q, us[k], team.observe(state, k), rng))
            if idle == n:
                break
            state, labels, goal = team.team_step(state, actions)
            for k, l in enumerate(learners):
                if us[k] != l.final:
                    lab = (_DONE_LABEL if team.agent_done(state, k) else EMPTY) if flat[k] \
                        else labels[k]
                    us[k] = l.rm.step_table(lab)[0][us[k]]
            if goal:
                steps = t + 1
                reward_total += 1
                break
        steps_total += steps
    return steps_total / n_episodes, reward_total / n_episodes


@dataclass
class EvalRecord:
    episode: int
    steps: float
    reward: float
    rm_states: tuple
    induction_calls: int
    induction_wall_s: float
    env_steps: int


@dataclass
class RunMetrics:
    seed: int
    records: list = field(default_factory=list)
    learners: list = field(default_factory=list)

    def append(self, rec: EvalRecord):
        self.records.append(rec)


@dataclass
class TrainConfig:
    task: str = "three_buttons"
    mode: str = "learn"
    grid: GridMap | None = None
    hp: Hyperparams = field(default_factory=Hyperparams)
    budget: InductionBudget = field(default_factory=InductionBudget)
    # agent id -> machine used in mode "provided"; defaults to the task's own
    provided: dict | None = None


class RunFailed(RuntimeError):
    def __init__(self, message, metrics: RunMetrics):
        super().__init__(message)
        self.metrics = metrics


def run_training(config: TrainConfig, on_eval=None, on_induction=None) -> RunMetrics:
    hp = config.hp
    seed = hp.seed
    tasks = make_tasks(config.task, config.grid, hp.p_sync)
    team = make_team(config.task, config.grid)
    seqs = np.random.SeedSequence(seed).spawn(len(tasks) + 1)
    rngs = [np.random.default_rng(s) for s in seqs[:-1]]
    eval_rng = np.random.default_rng(seqs[-1])
    provided = config.provided or {}
    learners = [AgentLearner(t, config.mode, hp, config.budget, on_induction,
                             provided.get(t.agent_id)) for t in tasks]
    metrics = RunMetrics(seed=seed, learners=learners)
    try:
        for episode in range(hp.num_episodes):
            eps = hp.epsilon_at(episode)
            for l in learners:
                l.reset()
            active = list(zip(learners, rngs))
            while active:
                for l, rng in active:
                    train_agent_step(l, rng, eps)
                active = [(l, rng) for l, rng in active if not l.done]
            if (episode + 1) % hp.eval_period == 0:
                steps, reward = evaluate_team(learners, team, hp.eval_episodes, hp.horizon,
                                              eval_rng)
                rec = EvalRecord(episode + 1, steps, reward,
                                 tuple(l.rm.n_states for l in learners),
                                 sum(l.induction_calls for l in learners),
                                 sum(l.induction_wall for l in learners),
                                 sum(l.env_steps for l in learners))
                metrics.append(rec)
                if on_eval is not None:
                    on_eval(rec)
    except Exception as exc:
        raise RunFailed(f"{type(exc).__name__}: {exc}", metrics) from exc
    return metrics
