"""ASCII grid maps and deterministic grid movement."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..rm_core import ParseError

UP, DOWN, LEFT, RIGHT, NOOP = range(5)
ACTIONS = (UP, DOWN, LEFT, RIGHT, NOOP)
ACTION_NAMES = ("UP", "DOWN", "LEFT", "RIGHT", "NOOP")
_DELTAS = {UP: (-1, 0), DOWN: (1, 0), LEFT: (0, -1), RIGHT: (0, 1), NOOP: (0, 0)}

BUTTON_GLYPHS = {"Y": "yellow", "G": "green", "R": "red"}
DOOR_GLYPHS = {"y": "yellow", "g": "green", "r": "red"}


class InvalidAction(ValueError):
    pass


@dataclass
class GridMap:
    width: int
    height: int
    walls: frozenset = frozenset()
    doors: dict = field(default_factory=dict)      # color -> frozenset of cells
    buttons: dict = field(default_factory=dict)    # color -> cell
    starts: dict = field(default_factory=dict)     # agent id -> cell
    goal_cells: frozenset = frozenset()
    goals: dict = field(default_factory=dict)      # agent id -> cell
    rendezvous: tuple | None = None

    def in_bounds(self, cell) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width

    def index(self, cell) -> int:
        return cell[0] * self.width + cell[1]

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    def move(self, cell, action: int, blocked=frozenset()):
        """Next cell; moves into walls, blocked cells or off the grid are no-ops."""
        try:
            dr, dc = _DELTAS[action]
        except KeyError:
            raise InvalidAction(f"unknown action {action!r}") from None
        nxt = (cell[0] + dr, cell[1] + dc)
        if not self.in_bounds(nxt) or nxt in self.walls or nxt in blocked:
            return cell
        return nxt

    def neighbours(self, cell):
        r, c = cell
        return [(r + dr, c + dc) for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1))
                if self.in_bounds((r + dr, c + dc))]

    def door_front(self, color: str) -> frozenset:
        """Non-door cells orthogonally adjacent to a door of ``color``."""
        cells = self.doors.get(color, frozenset())
        return frozenset(n for d in cells for n in self.neighbours(d)
                         if n not in cells and n not in self.walls)


def load_map(text: str) -> GridMap:
    """Parse a map: grid rows, then an optional blank line and directives.

    Legend: ``#`` wall, ``.`` floor, ``Y/G/R`` buttons, ``y/g/r`` door cells,
    digits agent starts, ``X`` goal cell, ``V`` rendezvous. Lines starting
    with ``;`` are comments. Directives: ``goal <agent> <row> <col>``.
    """
    rows = []
    directives = []
    in_grid = True
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        if line.startswith(";"):
            continue
        if not line:
            if rows:
                in_grid = False
            continue
        if in_grid:
            rows.append((lineno, line))
        else:
            directives.append((lineno, line))
    if not rows:
        raise ParseError("map has no grid rows")
    width = len(rows[0][1])
    walls, starts, goal_cells = set(), {}, set()
    doors: dict = {}
    buttons = {}
    rendezvous = None
    for r, (lineno, line) in enumerate(rows):
        if len(line) != width:
            raise ParseError(f"row has {len(line)} cells, expected {width}", lineno)
        for c, ch in enumerate(line):
            cell = (r, c)
            if ch == "#":
                walls.add(cell)
            elif ch == ".":
                pass
            elif ch in BUTTON_GLYPHS:
                color = BUTTON_GLYPHS[ch]
                if color in buttons:
                    raise ParseError(f"second {color} button", lineno, c + 1)
                buttons[color] = cell
            elif ch in DOOR_GLYPHS:
                doors.setdefault(DOOR_GLYPHS[ch], set()).add(cell)
            elif ch.isdigit():
                agent = int(ch)
                if agent in starts:
                    raise ParseError(f"second start for agent {agent}", lineno, c + 1)
                starts[agent] = cell
            elif ch == "X":
                goal_cells.add(cell)
            elif ch == "V":
                if rendezvous is not None:
                    raise ParseError("second rendezvous cell", lineno, c + 1)
                rendezvous = cell
            else:
                raise ParseError(f"unknown glyph {ch!r}", lineno, c + 1)
    grid = GridMap(width=width, height=len(rows), walls=frozenset(walls),
                   doors={k: frozenset(v) for k, v in doors.items()},
                   buttons=buttons, starts=starts, goal_cells=frozenset(goal_cells),
                   rendezvous=rendezvous)
    for lineno, line in directives:
        key, *args = line.split()
        if key != "goal":
            raise ParseError(f"unknown directive {key!r}", lineno)
        if len(args) != 3:
            raise ParseError("'goal' takes <agent> <row> <col>", lineno)
        try:
            agent, r, c = (int(a) for a in args)
        except ValueError:
            raise ParseError("'goal' arguments must be integers", lineno) from None
        if not grid.in_bounds((r, c)):
            raise ParseError(f"goal cell ({r}, {c}) is out of bounds", lineno)
        if (r, c) not in grid.goal_cells:
            raise ParseError(f"goal cell ({r}, {c}) is not marked X", lineno)
        grid.goals[agent] = (r, c)
    return grid
