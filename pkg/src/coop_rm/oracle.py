"""SAT-based check of the minimal number of reward machine states.

Independent of the search in ``induction``: the examples are encoded as a
propositional formula and handed to a SAT solver for each candidate size.
Finding the smallest automaton consistent with labelled examples is NP-complete,
so the default bound on the state count is kept small (5).
"""
from __future__ import annotations

from pysat.card import CardEnc, EncType
from pysat.formula import IDPool
from pysat.solvers import Solver

from .rm_core import RewardMachine, canonical_names


def _trie(goals, incompletes):
    """Nodes are (parent, label) pairs; node 0 is the empty prefix."""
    parent, lab = [None], [None]
    kids = [{}]
    ends = {}

    def insert(trace, kind):
        v = 0
        for l in trace:
            l = frozenset(l)
            nxt = kids[v].get(l)
            if nxt is None:
                nxt = len(parent)
                parent.append(v)
                lab.append(l)
                kids.append({})
                kids[v][l] = nxt
            v = nxt
        ends.setdefault(v, set()).add(kind)

    for t in goals:
        insert(t, "goal")
    for t in incompletes:
        insert(t, "inc")
    return parent, lab, ends


def _encode(props, goals, incompletes, n):
    props = sorted(props)
    F = n - 1
    pool = IDPool()
    parent, lab, ends = _trie(goals, incompletes)
    x = lambda v, q: pool.id(("x", v, q))
    t = lambda u, p, q: pool.id(("t", u, p, q))
    cnf = [[x(0, 0)]]

    def exactly_one(lits):
        enc = CardEnc.equals(lits=lits, bound=1, vpool=pool, encoding=EncType.pairwise)
        cnf.extend(enc.clauses)

    for v in range(len(parent)):
        exactly_one([x(v, q) for q in range(n)])
    for u in range(F):
        for p in props:
            exactly_one([t(u, p, q) for q in range(n)])
    for v in range(1, len(parent)):
        w, l = parent[v], lab[v]
        # the final state absorbs everything
        cnf.append([-x(w, F), x(v, F)])
        if not l:
            for u in range(F):
                cnf.append([-x(w, u), x(v, u)])
            continue
        if len(l) > 1:
            raise ValueError(f"label {sorted(l)} has more than one proposition")
        (p,) = l
        if p not in props:
            raise ValueError(f"proposition {p!r} not in the alphabet")
        for u in range(F):
            for q in range(n):
                cnf.append([-x(w, u), -t(u, p, q), x(v, q)])
    for v, kinds in ends.items():
        if "goal" in kinds:
            cnf.append([x(v, F)])
        if "inc" in kinds:
            cnf.append([-x(v, F)])
    return cnf, t, props


def consistent_exists(props, goals, incompletes, n: int, solver: str = "g3") -> RewardMachine | None:
    """A consistent machine with exactly ``n`` states, or ``None``."""
    cnf, t, props = _encode(props, goals, incompletes, n)
    with Solver(name=solver, bootstrap_with=cnf) as s:
        if not s.solve():
            return None
        model = {lit for lit in s.get_model() if lit > 0}
    names = canonical_names(n)
    delta = {}
    for u in range(n - 1):
        for p in props:
            for q in range(n):
                if t(u, p, q) in model and q != u:
                    delta[(names[u], p)] = names[q]
    return RewardMachine(names, frozenset(props), names[0], names[-1], delta)


def oracle_minimal(props, goals, incompletes, n_max: int = 5) -> int | None:
    """Smallest ``n <= n_max`` admitting a consistent machine, else ``None``."""
    goals, incompletes = list(goals), list(incompletes)
    for n in range(2, n_max + 1):
        if consistent_exists(props, goals, incompletes, n) is not None:
            return n
    return None
