from .grid import ACTIONS, ACTION_NAMES, DOWN, LEFT, NOOP, RIGHT, UP, GridMap, InvalidAction, load_map
from .tasks import (
    TASKS, AgentTask, ButtonsState, MeetState, RendezvousTask, RendezvousTeam, TeamEnv, TeamState,
    ThreeButtonsTask, ThreeButtonsTeam, default_map, global_label, handcrafted_rms, local_step,
    make_tasks, make_team, sync_resolve,
)
