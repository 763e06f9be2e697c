"""Minimal reward machine induction from goal and incomplete traces.

``learn_fixed`` runs a backtracking search over transition functions with a
fixed number of states. Example traces are merged into a prefix tree and
walked in a fixed order; a transition ``(state, proposition)`` is chosen only
when some trace first needs it, and states are introduced in first-use order
so that renamings of one machine are never explored twice. Among the machines
found, fewer transitions are preferred, then fewer states from which the final
state cannot be reached.

``learn_minimal`` deepens the state count until the search succeeds.
"""
from __future__ import annotations

import math
import re
import time
from dataclasses import dataclass, field

from .rm_core import ParseError, RewardMachine, Trace, TraceKind, canonical_names, is_consistent


class InductionError(Exception):
    pass


class InconsistentExamples(InductionError):
    """The same (traversal-equivalent) trace is both a goal and incomplete."""


class BudgetExhausted(InductionError):
    pass


class TimeoutExceeded(BudgetExhausted):
    pass


@dataclass
class InductionBudget:
    max_states: int = 8
    timeout: float = 3600.0
    # search nodes spent looking for a machine with fewer transitions
    # once a first consistent one is known
    refine_nodes: int = 20000

    def __post_init__(self):
        if self.max_states < 2:
            raise ValueError("max_states must be at least 2")


def _key(trace) -> tuple:
    labels = trace.labels if isinstance(trace, Trace) else trace
    return tuple(frozenset(l) for l in labels)


@dataclass
class ExampleSets:
    """Goal traces and incomplete traces, each deduplicated and disjoint."""

    goals: set = field(default_factory=set)
    incompletes: set = field(default_factory=set)

    def __post_init__(self):
        self.goals = {_key(t) for t in self.goals}
        self.incompletes = {_key(t) for t in self.incompletes}
        both = self.goals & self.incompletes
        if both:
            raise InconsistentExamples(f"{len(both)} trace(s) are both goal and incomplete")

    def add_goal(self, trace) -> bool:
        k = _key(trace)
        if k in self.incompletes:
            raise InconsistentExamples("goal trace already recorded as incomplete")
        if k in self.goals:
            return False
        self.goals.add(k)
        return True

    def add_incomplete(self, trace) -> bool:
        k = _key(trace)
        if k in self.goals:
            raise InconsistentExamples("incomplete trace already recorded as goal")
        if k in self.incompletes:
            return False
        self.incompletes.add(k)
        return True

    def props(self) -> frozenset:
        out = set()
        for t in self.goals | self.incompletes:
            for lab in t:
                out |= lab
        return frozenset(out)

    def copy(self) -> "ExampleSets":
        return ExampleSets(set(self.goals), set(self.incompletes))

    def __len__(self):
        return len(self.goals) + len(self.incompletes)


# --- trace-set files ---------------------------------------------------------------

_LABEL_RE = re.compile(r"\{([^{}]*)\}")


def format_label(lab) -> str:
    return "{" + ",".join(sorted(lab)) + "}"


def write_traces(ex: ExampleSets, props=None) -> str:
    lines = []
    if props is not None:
        lines.append("props " + " ".join(sorted(props)))
    for kind, traces in (("GOAL", ex.goals), ("INC", ex.incompletes)):
        for t in sorted(traces, key=lambda t: (len(t), [sorted(l) for l in t])):
            lines.append(f"{kind} : " + " ".join(format_label(l) for l in t))
    return "\n".join(lines) + "\n"


def read_traces(text: str) -> tuple[ExampleSets, frozenset]:
    """Parse ``GOAL|INC : {p} {q} {} ...`` lines; returns examples and propositions."""
    ex = ExampleSets()
    props = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("props"):
            props = frozenset(line.split()[1:])
            continue
        head, sep, body = line.partition(":")
        kind = head.strip()
        if not sep or kind not in ("GOAL", "INC"):
            raise ParseError("expected 'GOAL :' or 'INC :'", lineno)
        rest = _LABEL_RE.sub("", body).strip()
        if rest:
            raise ParseError(f"unexpected text {rest!r}", lineno)
        labels = tuple(frozenset(p.strip() for p in m.split(",") if p.strip())
                       for m in _LABEL_RE.findall(body))
        try:
            (ex.add_goal if kind == "GOAL" else ex.add_incomplete)(labels)
        except InconsistentExamples as exc:
            raise ParseError(str(exc), lineno) from None
    if props is None:
        props = ex.props()
    return ex, props


# --- search --------------------------------------------------------------------------

class _Tree:
    """Prefix tree over traces with empty labels removed."""

    def __init__(self, props, ex: ExampleSets):
        self.props = tuple(sorted(props))
        pidx = {p: i for i, p in enumerate(self.props)}
        self.parent, self.prop, self.goal, self.inc = [], [], [], []
        self.root_goal = self.root_inc = False
        children = {}

        def encode(trace):
            out = []
            for lab in trace:
                if not lab:
                    continue
                if len(lab) > 1:
                    raise ValueError(f"label {sorted(lab)} has more than one proposition")
                (p,) = lab
                if p not in pidx:
                    raise ValueError(f"proposition {p!r} not in the alphabet")
                out.append(pidx[p])
            return tuple(out)

        goals = sorted({encode(t) for t in ex.goals}, key=lambda t: (len(t), t))
        incs = sorted({encode(t) for t in ex.incompletes}, key=lambda t: (len(t), t))
        if set(goals) & set(incs):
            raise InconsistentExamples("a goal and an incomplete trace are traversal-equivalent")
        for seq, is_goal in [(g, True) for g in goals] + [(t, False) for t in incs]:
            node = -1
            for p in seq:
                nxt = children.get((node, p))
                if nxt is None:
                    nxt = len(self.parent)
                    children[(node, p)] = nxt
                    self.parent.append(node)
                    self.prop.append(p)
                    self.goal.append(False)
                    self.inc.append(False)
                node = nxt
            if node < 0:
                if is_goal:
                    self.root_goal = True
                else:
                    self.root_inc = True
            elif is_goal:
                self.goal[node] = True
            else:
                self.inc[node] = True
        n = len(self.parent)
        below = list(self.inc)
        for v in range(n - 1, -1, -1):
            par = self.parent[v]
            if below[v] and par >= 0:
                below[par] = True
        self.inc_below = below

    def __len__(self):
        return len(self.parent)


class _Stop(Exception):
    pass


class _Search:
    def __init__(self, tree: _Tree, n: int, deadline: float | None, refine_nodes: int):
        self.t = tree
        self.n = n
        self.F = n - 1
        self.P = len(tree.props)
        self.table = [-1] * ((n - 1) * self.P)
        self.st = [0] * len(tree)
        self.best = None
        self.best_edges = math.inf
        self.best_dead = math.inf
        self.deadline = deadline
        self.refine_nodes = refine_nodes
        self.expansions = 0
        self.found_at = None

    def run(self):
        if self.t.root_goal:
            return None
        try:
            self._solve(0, 1, 0)
        except _Stop:
            pass
        return self.best

    def _tick(self):
        self.expansions += 1
        if self.found_at is not None and self.expansions - self.found_at > self.refine_nodes:
            raise _Stop
        if self.deadline is not None and (self.expansions & 1023) == 0 \
                and time.monotonic() > self.deadline:
            if self.best is not None:
                raise _Stop
            raise TimeoutExceeded(f"no {self.n}-state machine decided before the deadline")

    def _solve(self, i, used, edges):
        t, st, table, F, P = self.t, self.st, self.table, self.F, self.P
        parent, prop, goal, inc_below = t.parent, t.prop, t.goal, t.inc_below
        N = len(parent)
        while i < N:
            par = parent[i]
            ps = 0 if par < 0 else st[par]
            if ps == F:
                s = F
            else:
                k = ps * P + prop[i]
                s = table[k]
                if s < 0:
                    self._tick()
                    opts = [ps] + [x for x in range(used) if x != ps]
                    if used < F:
                        opts.append(used)
                    opts.append(F)
                    for o in opts:
                        e = edges + (o != ps)
                        if e > self.best_edges or (e == self.best_edges and self.best_dead == 0):
                            continue
                        table[k] = o
                        self._solve(i, used + (o == used and o != F), e)
                    table[k] = -1
                    return
            if s == F and inc_below[i]:
                return
            if goal[i] and s != F:
                return
            st[i] = s
            i += 1
        dead = self._dead(used)
        if (edges, dead) < (self.best_edges, self.best_dead):
            self.best = list(table)
            self.best_edges = edges
            self.best_dead = dead
        if self.found_at is None:
            self.found_at = self.expansions

    def _dead(self, used):
        """States in use that cannot reach the final state."""
        F, P, table = self.F, self.P, self.table
        live = {F}
        grew = True
        while grew:
            grew = False
            for u in range(used):
                if u not in live and any(table[u * P + p] in live for p in range(P)):
                    live.add(u)
                    grew = True
        return used - (len(live) - 1)

    def machine(self, props) -> RewardMachine:
        names = canonical_names(self.n)
        delta = {}
        for k, v in enumerate(self.best):
            u, p = divmod(k, self.P)
            if v >= 0 and v != u:
                delta[(names[u], self.t.props[p])] = names[v]
        return RewardMachine(names, frozenset(props), names[0], names[-1], delta)


def learn_fixed(props, ex: ExampleSets, n_states: int, deadline: float | None = None,
                refine_nodes: int = 20000) -> RewardMachine | None:
    """A consistent machine with exactly ``n_states`` states, or ``None`` if none exists.

    Raises ``TimeoutExceeded`` if ``deadline`` (a ``time.monotonic`` value)
    passes before any answer is known.
    """
    if n_states < 2:
        raise ValueError("a reward machine has at least 2 states")
    props = frozenset(props)
    tree = _Tree(props, ex)
    if deadline is not None and time.monotonic() > deadline:
        raise TimeoutExceeded(f"deadline passed before the {n_states}-state search started")
    search = _Search(tree, n_states, deadline, refine_nodes)
    if search.run() is None:
        return None
    rm = search.machine(props)
    if not is_consistent(rm, ex.goals, ex.incompletes):
        raise AssertionError("search returned an inconsistent machine")
    return rm


def learn_minimal(props, ex: ExampleSets, start_states: int = 2,
                  budget: InductionBudget | None = None) -> RewardMachine:
    """Smallest consistent machine with at least ``start_states`` states."""
    budget = budget or InductionBudget()
    props = frozenset(props)
    _Tree(props, ex)  # surfaces contradictory examples before any search
    deadline = time.monotonic() + budget.timeout
    for n in range(max(2, start_states), budget.max_states + 1):
        rm = learn_fixed(props, ex, n, deadline, budget.refine_nodes)
        if rm is not None:
            return rm
    raise BudgetExhausted(f"no consistent machine with at most {budget.max_states} states")


def as_traces(ex: ExampleSets) -> tuple[list, list]:
    return ([Trace(t, TraceKind.GOAL) for t in sorted(ex.goals, key=len)],
            [Trace(t, TraceKind.INCOMPLETE) for t in sorted(ex.incompletes, key=len)])
