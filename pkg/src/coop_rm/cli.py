"""Command line front-end: training runs, machine inspection, offline induction."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .envs import TASKS, load_map
from .induction import BudgetExhausted, InductionBudget, InductionError, learn_minimal, \
    read_traces, write_traces
from .oracle import oracle_minimal
from .orchestrator import MODES, RunFailed, TrainConfig, run_training
from .qrm import Hyperparams
from .rm_core import ParseError, deserialize, serialize, to_dot

log = logging.getLogger("coop_rm")

CSV_FIELDS = ("seed", "episode", "eval_steps_mean", "eval_reward_mean")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    task: str = "three_buttons"
    mode: str = "learn"
    map: str | None = None
    rm_dir: str | None = None
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    episodes: int = 2000
    horizon: int = 500
    alpha: float = 0.1
    gamma: float | None = None  # 0.95, or 0.99 for rendezvous
    epsilon: float = 0.1
    epsilon_min: float = 0.01
    p_sync: float = 0.3
    eval_period: int = 50
    eval_episodes: int = 10
    max_states: int = 8
    timeout_s: float = 3600.0
    out: str = "runs"

    def validate(self):
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {', '.join(TASKS)}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        try:
            self.hyperparams(self.seeds[0])
            self.budget()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.map is not None and not Path(self.map).is_file():
            raise ConfigError(f"map file {self.map} not found")

    def resolved_gamma(self) -> float:
        if self.gamma is not None:
            return self.gamma
        return 0.99 if self.task == "rendezvous" else 0.95

    def hyperparams(self, seed: int) -> Hyperparams:
        return Hyperparams(alpha=self.alpha, gamma=self.resolved_gamma(), epsilon=self.epsilon,
                           epsilon_min=self.epsilon_min, horizon=self.horizon,
                           num_episodes=self.episodes, p_sync=self.p_sync,
                           eval_period=self.eval_period, eval_episodes=self.eval_episodes,
                           seed=seed)

    def budget(self) -> InductionBudget:
        return InductionBudget(max_states=self.max_states, timeout=self.timeout_s)

    def dump(self) -> str:
        out = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.name == "seeds":
                v = ",".join(map(str, v))
            if v is not None:
                out.append(f"{f.name} = {v}")
        return "\n".join(out) + "\n"


def parse_seeds(text) -> list:
    """``5`` means seeds 0..4; ``3,7`` lists seeds explicitly."""
    if isinstance(text, (list, tuple)):
        return [int(s) for s in text]
    text = str(text).strip()
    try:
        if "," in text:
            return [int(s) for s in text.split(",") if s.strip()]
        return list(range(int(text)))
    except ValueError:
        raise ConfigError(f"bad seeds {text!r}") from None


_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _coerce(key: str, value: str):
    kind = _TYPES[key]
    if key == "seeds":
        return parse_seeds(value)
    if value.lower() in ("none", ""):
        return None
    try:
        if kind.startswith("int"):
            return int(value)
        if kind.startswith("float"):
            return float(value)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None
    return value


def read_config(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment; dashes and underscores are equivalent."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise ConfigError(f"line {lineno}: expected key = value")
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value.strip())
    return out


# --- results -------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def csv_header(n_agents: int) -> list:
    return list(CSV_FIELDS) + [f"rm_states_agent_{i}" for i in range(1, n_agents + 1)] + \
        ["induction_calls", "induction_wall_s", "env_steps"]


def csv_row(seed: int, rec) -> list:
    return [seed, rec.episode, _fmt(float(rec.steps)), _fmt(float(rec.reward)), *rec.rm_states,
            rec.induction_calls, f"{rec.induction_wall_s:.3f}", rec.env_steps]


def t_interval(values, confidence: float = 0.95) -> tuple:
    """Mean and two-sided t confidence interval of the mean."""
    a = np.asarray(values, dtype=float)
    mean = float(a.mean())
    if len(a) < 2:
        return mean, math.nan, math.nan
    half = float(stats.t.ppf(0.5 + confidence / 2, len(a) - 1) * a.std(ddof=1) / math.sqrt(len(a)))
    return mean, mean - half, mean + half


def aggregate_rows(per_seed: dict) -> list:
    """One row per evaluation point present in every seed."""
    episodes = sorted(set.intersection(*(set(r) for r in per_seed.values())))
    rows = [["episode", "n_seeds", "eval_steps_mean", "eval_steps_ci_low", "eval_steps_ci_high",
             "eval_reward_mean", "eval_reward_ci_low", "eval_reward_ci_high"]]
    for ep in episodes:
        steps = [per_seed[s][ep][0] for s in per_seed]
        rewards = [per_seed[s][ep][1] for s in per_seed]
        rows.append([ep, len(per_seed), *map(_fmt, t_interval(steps)),
                     *map(_fmt, t_interval(rewards))])
    return rows


def _load_provided(rm_dir: str, task: str, n_agents: int) -> dict:
    out = {}
    for i in range(1, n_agents + 1):
        path = Path(rm_dir) / f"{task}_a{i}.rm"
        if not path.is_file():
            raise ConfigError(f"provided mode needs {path}")
        out[i] = deserialize(path.read_text())
    return out


def cmd_run(cfg: RunConfig) -> int:
    cfg.validate()
    out = Path(cfg.out)
    grid = load_map(Path(cfg.map).read_text()) if cfg.map else None
    n_agents = 3 if cfg.task == "three_buttons" else 2
    provided = None
    if cfg.mode == "provided" and cfg.rm_dir is not None:
        provided = _load_provided(cfg.rm_dir, cfg.task, n_agents)
    (out / "rms").mkdir(parents=True, exist_ok=True)
    (out / "induction").mkdir(exist_ok=True)
    (out / "config.txt").write_text(cfg.dump())
    per_seed = {}
    status = 0
    for seed in cfg.seeds:
        path = out / f"metrics_seed_{seed}.csv"
        rows = {}
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(csv_header(n_agents))

            def on_eval(rec, seed=seed, writer=writer, fh=fh, rows=rows):
                writer.writerow(csv_row(seed, rec))
                fh.flush()
                rows[rec.episode] = (rec.steps, rec.reward)
                log.info("seed %d episode %d: steps %.1f reward %.2f states %s", seed,
                         rec.episode, rec.steps, rec.reward, rec.rm_states)

            def on_induction(r, seed=seed):
                name = f"seed_{seed}_agent_{r.agent}_call_{r.call:03d}.trace"
                header = f"# agent {r.agent} call {r.call} learned_states {r.rm.n_states}\n"
                (out / "induction" / name).write_text(
                    header + write_traces(r.examples, r.rm.props))

            tc = TrainConfig(cfg.task, cfg.mode, grid, cfg.hyperparams(seed), cfg.budget(),
                             provided)
            try:
                metrics = run_training(tc, on_eval, on_induction)
            except RunFailed as exc:
                print(f"error: seed {seed}: {exc}", file=sys.stderr)
                status = 1
                continue
        per_seed[seed] = rows
        for l in metrics.learners:
            (out / "rms" / f"seed_{seed}_agent_{l.task.agent_id}.rm").write_text(serialize(l.rm))
    if per_seed:
        with open(out / "metrics_aggregate.csv", "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(aggregate_rows(per_seed))
    return status


def cmd_inspect(path: str, dot: str | None = None) -> int:
    rm = deserialize(Path(path).read_text())
    print(f"{rm.n_states} states, {len(rm.transitions)} transitions")
    print(f"initial {rm.initial}, final {rm.final}")
    for (u, p), v in sorted(rm.transitions.items()):
        print(f"  {u} -{p}-> {v}")
    if dot:
        Path(dot).write_text(to_dot(rm))
    return 0


def cmd_oracle(path: str, n_max: int = 5) -> int:
    ex, props = read_traces(Path(path).read_text())
    n = oracle_minimal(props, ex.goals, ex.incompletes, n_max)
    print("NONE" if n is None else n)
    return 0


def cmd_learn(path: str, max_states: int, timeout_s: float, start_states: int,
              out: str | None) -> int:
    ex, props = read_traces(Path(path).read_text())
    rm = learn_minimal(props, ex, start_states, InductionBudget(max_states, timeout_s))
    text = serialize(rm)
    if out:
        Path(out).write_text(text)
    print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coop-rm", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train agents and write metrics")
    run.add_argument("--config", help="key = value file; flags override it")
    run.add_argument("--task", choices=TASKS)
    run.add_argument("--mode", choices=MODES)
    run.add_argument("--map")
    run.add_argument("--rm-dir", help="directory with <task>_a<i>.rm files for mode provided")
    run.add_argument("--seeds", help="a count (5 = seeds 0..4) or a comma list (3,7)")
    run.add_argument("--episodes", type=int)
    run.add_argument("--horizon", type=int)
    run.add_argument("--alpha", type=float)
    run.add_argument("--gamma", type=float)
    run.add_argument("--epsilon", type=float)
    run.add_argument("--epsilon-min", type=float)
    run.add_argument("--p-sync", type=float)
    run.add_argument("--eval-period", type=int)
    run.add_argument("--eval-episodes", type=int)
    run.add_argument("--max-states", type=int)
    run.add_argument("--timeout-s", type=float)
    run.add_argument("--out")

    ins = sub.add_parser("inspect", help="summarise a reward machine file")
    ins.add_argument("rm_file")
    ins.add_argument("--dot", help="write Graphviz DOT here")

    orc = sub.add_parser("oracle", help="minimal consistent state count of a trace file")
    orc.add_argument("trace_file")
    orc.add_argument("--n-max", type=int, default=5)

    lrn = sub.add_parser("learn", help="learn a minimal machine from a trace file")
    lrn.add_argument("trace_file")
    lrn.add_argument("--max-states", type=int, default=8)
    lrn.add_argument("--timeout-s", type=float, default=3600.0)
    lrn.add_argument("--start-states", type=int, default=2)
    lrn.add_argument("--out")
    return p


def config_from_args(args) -> RunConfig:
    values = {}
    if args.config:
        values.update(read_config(Path(args.config).read_text()))
    for key in _TYPES:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = parse_seeds(v) if key == "seeds" else v
    return RunConfig(**values)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        if args.command == "run":
            return cmd_run(config_from_args(args))
        if args.command == "inspect":
            return cmd_inspect(args.rm_file, args.dot)
        if args.command == "oracle":
            return cmd_oracle(args.trace_file, args.n_max)
        return cmd_learn(args.trace_file, args.max_states, args.timeout_s, args.start_states,
                         args.out)
    except (ConfigError, ParseError, InductionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
