"""Reward machines, labels and traces.

A reward machine here is deterministic, has a single absorbing final state and
pays reward 1 exactly on the transition into that state. A label that matches
no outgoing transition leaves the machine where it is.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

Label = frozenset  # frozenset[str]
EMPTY: frozenset = frozenset()


class AmbiguousLabel(ValueError):
    """More than one proposition of a label matches a transition."""


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)
        self.line = line
        self.column = column


class TraceKind(enum.Enum):
    GOAL = "GOAL"
    INCOMPLETE = "INC"


def label(*props: str) -> frozenset:
    return frozenset(props)


@dataclass(frozen=True)
class Trace:
    labels: tuple
    kind: TraceKind = TraceKind.INCOMPLETE

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(frozenset(l) for l in self.labels))

    def __len__(self):
        return len(self.labels)

    def compressed(self) -> tuple:
        """Labels with empty steps dropped; traversal-equivalent to the full trace."""
        return tuple(l for l in self.labels if l)

    @classmethod
    def goal(cls, labels: Iterable) -> "Trace":
        return cls(tuple(labels), TraceKind.GOAL)

    @classmethod
    def incomplete(cls, labels: Iterable) -> "Trace":
        return cls(tuple(labels), TraceKind.INCOMPLETE)


@dataclass(frozen=True, eq=False)
class RewardMachine:
    """Deterministic reward machine ``<U, P, u0, uA, delta_u>``.

    ``delta_r`` is not stored: entering ``final`` yields 1, anything else 0.
    """

    states: tuple
    props: frozenset
    initial: str
    final: str
    transitions: Mapping = field(default_factory=dict)

    def __post_init__(self):
        states = tuple(self.states)
        props = frozenset(self.props)
        delta = dict(self.transitions)
        if len(set(states)) != len(states):
            raise ValueError("duplicate state names")
        if self.initial not in states or self.final not in states:
            raise ValueError("initial and final must be states of the machine")
        if self.initial == self.final:
            raise ValueError("initial state must differ from final state")
        for (u, p), v in delta.items():
            if u not in states or v not in states:
                raise ValueError(f"transition {u} -{p}-> {v} references unknown state")
            if p not in props:
                raise ValueError(f"transition on unknown proposition {p!r}")
            if u == self.final:
                raise ValueError("final state cannot have outgoing transitions")
        # self-loops carry no information under the implicit self-loop convention
        delta = {k: v for k, v in delta.items() if k[0] != v}
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "props", props)
        object.__setattr__(self, "transitions", delta)
        object.__setattr__(self, "_step_cache", {})

    # equality/hash ignore the cache
    def _key(self):
        return (self.states, self.props, self.initial, self.final,
                frozenset(self.transitions.items()))

    def __eq__(self, other):
        if not isinstance(other, RewardMachine):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        edges = ", ".join(f"{u}-{p}->{v}" for (u, p), v in sorted(self.transitions.items()))
        return f"RewardMachine({len(self.states)} states, [{edges}])"

    @property
    def n_states(self) -> int:
        return len(self.states)

    def index(self, u: str) -> int:
        return self.states.index(u)

    def step(self, u: str, lab) -> tuple[str, int]:
        """Return ``(next_state, reward)`` for label ``lab`` read in state ``u``."""
        if u == self.final:
            raise ValueError("cannot step from the final state")
        if u not in self.transitions_from:
            raise ValueError(f"unknown state {u!r}")
        matches = [p for p in lab if (u, p) in self.transitions]
        if not matches:
            return u, 0
        if len(matches) > 1:
            raise AmbiguousLabel(f"label {sorted(lab)} matches {sorted(matches)} from {u}")
        v = self.transitions[(u, matches[0])]
        return v, int(v == self.final)

    @property
    def transitions_from(self) -> dict:
        cache = self._step_cache
        if "out" not in cache:
            out = {u: {} for u in self.states}
            for (u, p), v in self.transitions.items():
                out[u][p] = v
            cache["out"] = out
        return cache["out"]

    def step_table(self, lab) -> tuple[list, list]:
        """Successor index and reward for every state index under ``lab``.

        The final state maps to itself with reward 0. Cached per label.
        """
        cache = self._step_cache
        hit = cache.get(lab)
        if hit is not None:
            return hit
        nxt, rew = [], []
        fin = self.final
        for u in self.states:
            if u == fin:
                nxt.append(self.index(fin))
                rew.append(0)
                continue
            v, r = self.step(u, lab)
            nxt.append(self.index(v))
            rew.append(r)
        cache[lab] = (nxt, rew)
        return nxt, rew


def step(rm: RewardMachine, u: str, lab) -> tuple[str, int]:
    return rm.step(u, lab)


def traverse(rm: RewardMachine, trace) -> list:
    labels = trace.labels if isinstance(trace, Trace) else trace
    run = [rm.initial]
    u = rm.initial
    for lab in labels:
        if u != rm.final:
            u, _ = rm.step(u, lab)
        run.append(u)
    return run


def ends_in_final(rm: RewardMachine, trace) -> bool:
    labels = trace.labels if isinstance(trace, Trace) else trace
    u = rm.initial
    for lab in labels:
        if u == rm.final:
            return True
        u, _ = rm.step(u, lab)
    return u == rm.final


def is_consistent(rm: RewardMachine, goals: Iterable, incompletes: Iterable) -> bool:
    return (all(ends_in_final(rm, t) for t in goals)
            and not any(ends_in_final(rm, t) for t in incompletes))


def canonical_names(n: int) -> tuple:
    """``u0 .. u{n-2}`` followed by ``uA``."""
    return tuple(f"u{i}" for i in range(n - 1)) + ("uA",)


def two_state_rm(props: Iterable[str]) -> RewardMachine:
    """The initial hypothesis: ``u0`` and ``uA`` with no transitions."""
    return RewardMachine(("u0", "uA"), frozenset(props), "u0", "uA", {})


def chain_rm(props: Iterable[str], sequence: Sequence[str]) -> RewardMachine:
    names = canonical_names(len(sequence) + 1)
    delta = {(names[i], p): names[i + 1] for i, p in enumerate(sequence)}
    return RewardMachine(names, frozenset(props), names[0], names[-1], delta)


# --- text format --------------------------------------------------------------

def serialize(rm: RewardMachine) -> str:
    lines = [
        f"states {rm.n_states} " + " ".join(rm.states),
        "props " + " ".join(sorted(rm.props)),
        f"initial {rm.initial}",
        f"final {rm.final}",
    ]
    order = {u: i for i, u in enumerate(rm.states)}
    for (u, p), v in sorted(rm.transitions.items(), key=lambda kv: (order[kv[0][0]], kv[0][1])):
        lines.append(f"trans {u} {p} {v}")
    return "\n".join(lines) + "\n"


def deserialize(text: str) -> RewardMachine:
    n = None
    names = None
    props = None
    initial = final = None
    delta = {}
    used_props = set()
    refs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *args = line.split()
        if key == "states":
            if not args:
                raise ParseError("'states' needs a count", lineno)
            try:
                n = int(args[0])
            except ValueError:
                raise ParseError(f"bad state count {args[0]!r}", lineno) from None
            if n < 2:
                raise ParseError("a reward machine needs at least 2 states", lineno)
            if len(args) > 1:
                if len(args) - 1 != n:
                    raise ParseError(f"expected {n} state names, got {len(args) - 1}", lineno)
                names = tuple(args[1:])
            else:
                names = canonical_names(n)
        elif key == "props":
            props = set(args)
        elif key in ("initial", "final"):
            if len(args) != 1:
                raise ParseError(f"'{key}' takes one state name", lineno)
            refs.append((lineno, args[0]))
            if key == "initial":
                initial = args[0]
            else:
                final = args[0]
        elif key == "trans":
            if len(args) != 3:
                raise ParseError("'trans' takes <from> <prop> <to>", lineno)
            u, p, v = args
            if (u, p) in delta and delta[(u, p)] != v:
                raise ParseError(f"nondeterministic transition from {u} on {p}", lineno)
            delta[(u, p)] = v
            refs.append((lineno, u))
            refs.append((lineno, v))
            used_props.add(p)
        else:
            raise ParseError(f"unknown directive {key!r}", lineno)
    if names is None:
        raise ParseError("missing 'states' line")
    if initial is None or final is None:
        raise ParseError("missing 'initial' or 'final' line")
    for lineno, ref in refs:
        if ref not in names:
            raise ParseError(f"unknown state {ref!r}", lineno)
    if props is None:
        props = used_props
    elif not used_props <= props:
        raise ParseError(f"transitions use undeclared propositions {sorted(used_props - props)}")
    try:
        return RewardMachine(names, frozenset(props), initial, final, delta)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def to_dot(rm: RewardMachine, name: str = "rm") -> str:
    out = [f"digraph {name} {{", "  rankdir=LR;"]
    for u in rm.states:
        attrs = ["shape=doublecircle" if u == rm.final else "shape=circle"]
        if u == rm.initial:
            attrs.append("style=bold")
        out.append(f'  "{u}" [{", ".join(attrs)}];')
    for (u, p), v in sorted(rm.transitions.items()):
        out.append(f'  "{u}" -> "{v}" [label="{p}"];')
    out.append("}")
    return "\n".join(out) + "\n"


def isomorphic(a: RewardMachine, b: RewardMachine) -> bool:
    if a.n_states != b.n_states or len(a.transitions) != len(b.transitions):
        return False
    if a.props != b.props:
        return False
    out_a, out_b = a.transitions_from, b.transitions_from
    fixed = {a.initial: b.initial, a.final: b.final}
    # grow the forced part of the bijection along transitions
    frontier = [a.initial]
    while frontier:
        u = frontier.pop()
        for p, v in out_a[u].items():
            w = out_b[fixed[u]].get(p)
            if w is None:
                return False
            if v in fixed:
                if fixed[v] != w:
                    return False
            else:
                if w in fixed.values():
                    return False
                fixed[v] = w
                frontier.append(v)
    rest_a = [u for u in a.states if u not in fixed]
    rest_b = [u for u in b.states if u not in fixed.values()]
    for perm in itertools.permutations(rest_b):
        m = dict(fixed)
        m.update(zip(rest_a, perm))
        if all(b.transitions.get((m[u], p)) == m[v] for (u, p), v in a.transitions.items()):
            return True
    return False
