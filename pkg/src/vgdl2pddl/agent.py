"""Plan, act, monitor, replan.

The episode loop generates a problem from the current simulator state, plans,
and sends the plan's avatar-phase actions to the simulator one at a time.
Before each is sent, the monitor translates the live state into init facts
(same schema as problem generation) and re-checks the pending action's
preconditions against them; any violated literal discards the plan and a
fresh problem is generated from the current state.  Because the new problem's
init is exactly the state that falsified the action, the planner cannot open
the new plan with the same move.

A plan can also run dry while the game is still going (e.g. a stray rock
intercepted a bullet without ever touching an avatar precondition); the
unmet goal literals are then logged as the violation and the loop replans.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

from . import engine
from .compiler import CompiledGame
from .engine import AvatarAction, GameStatus, GameState
from .ground import (
    GroundAction,
    build_universe,
    ground,
    normalize_ground,
    substitute as substitute_formula,
)
from .pddl import Atom
from .planner import PlanResult, SearchConfig, Status, solve
from .problems import ConfigFile, emit_config, generate_problem
from .vgdl import LevelGrid


class Outcome(Enum):
    WIN = "Win"
    LOSE = "Lose"
    PLANNER_FAILED = "PlannerFailed"
    TURN_BUDGET_EXHAUSTED = "TurnBudgetExhausted"


@dataclass(frozen=True)
class Violation:
    turn: int
    action: tuple[str, tuple[str, ...]]
    literals: tuple[str, ...]
    state_fingerprint: tuple


@dataclass
class EpisodeResult:
    outcome: Outcome
    turns: int
    replans: int
    plan_lengths: list[int] = field(default_factory=list)
    wall_times: list[float] = field(default_factory=list)
    violations: list[Violation] = field(default_factory=list)
    issued: list[tuple[tuple, tuple[str, tuple[str, ...]]]] = \
        field(default_factory=list)


AVATAR_PREFIX = "AVATAR_ACTION"

_ENGINE_ACTION = {
    "AVATAR_ACTION_MOVE_UP": AvatarAction.UP,
    "AVATAR_ACTION_MOVE_DOWN": AvatarAction.DOWN,
    "AVATAR_ACTION_MOVE_LEFT": AvatarAction.LEFT,
    "AVATAR_ACTION_MOVE_RIGHT": AvatarAction.RIGHT,
    "AVATAR_ACTION_NIL": AvatarAction.NIL,
}


def engine_action(name: str) -> AvatarAction:
    if name in _ENGINE_ACTION:
        return _ENGINE_ACTION[name]
    if name.startswith("AVATAR_ACTION_USE"):
        return AvatarAction.USE
    raise KeyError(name)


def is_avatar_action(action: GroundAction) -> bool:
    return action.name.startswith(AVATAR_PREFIX)


# -- monitoring ----------------------------------------------------------------------

def violated_literals(facts: frozenset[Atom] | set[Atom],
                      action: GroundAction) -> tuple[str, ...]:
    """Which grounded precondition literals of `action` fail against `facts`."""
    out: list[str] = []
    for atom, positive in action.pre_literals:
        holds = atom in facts
        if holds != positive:
            out.append(str(atom) if positive else f"(not {atom})")
    for clause in action.clause_literals:
        if not any((atom in facts) == positive for atom, positive in clause):
            rendered = " ".join(
                str(a) if pos else f"(not {a})" for a, pos in clause)
            out.append(f"(or {rendered})")
    return tuple(out)


def state_facts(state: GameState, game: CompiledGame, config: ConfigFile,
                binding: dict[int, str], pool=None) -> frozenset[Atom]:
    problem, _ = generate_problem(state, game, config, binding=binding,
                                  pool=pool)
    return frozenset(problem.init)


def monitor(state: GameState, action: GroundAction, game: CompiledGame,
            config: ConfigFile, binding: dict[int, str],
            pool=None) -> tuple[str, ...]:
    """Empty tuple means OK; otherwise the violated literal subset.

    The pending action's precondition is re-expanded from its schema over the
    regenerated problem's object universe: quantified checks must range over
    objects that did not exist when the plan was grounded (the rock that just
    dropped into the target cell), and the running plan's ammunition
    identities are pinned via `pool`.
    """
    problem, _ = generate_problem(state, game, config, binding=binding,
                                  pool=pool)
    facts = frozenset(problem.init)
    universe = build_universe(game.domain, problem)
    schema = next(a for a in game.domain.actions if a.name == action.name)
    substitution = {var: value
                    for (var, _), value in zip(schema.params, action.args)}
    formula = substitute_formula(schema.precondition, substitution)
    cnf = normalize_ground(formula, universe)
    if cnf is None:
        return ("(false)",)
    violated: list[str] = []
    for clause in cnf:
        if any((atom in facts) == positive for atom, positive in clause):
            continue
        if len(clause) == 1:
            atom, positive = clause[0]
            violated.append(str(atom) if positive else f"(not {atom})")
        else:
            rendered = " ".join(str(a) if pos else f"(not {a})"
                                for a, pos in clause)
            violated.append(f"(or {rendered})")
    return tuple(violated)


# -- episode loop --------------------------------------------------------------------

def run_episode(game: CompiledGame, grid: LevelGrid,
                planner_cfg: Optional[SearchConfig] = None, seed: int = 0,
                budget: int = 2000,
                trace: Optional[Path] = None,
                on_step=None) -> EpisodeResult:
    """Play one level to Win/Lose/budget; `on_step(state)` is called after
    every executed turn (rendering hook)."""
    planner_cfg = planner_cfg or SearchConfig()
    config = emit_config(game)
    state = engine.load(game.model, grid, seed=seed)
    result = EpisodeResult(Outcome.TURN_BUDGET_EXHAUSTED, turns=0, replans=0)
    trace_lines: list[str] = []

    def write_trace():
        if trace is not None:
            Path(trace).write_text("".join(trace_lines))

    while True:
        turn_at_plan = state.turn
        problem, binding = generate_problem(state, game, config)
        task = ground(game.domain, problem)
        t0 = time.perf_counter()
        plan_result: PlanResult = solve(task, planner_cfg)
        result.wall_times.append(time.perf_counter() - t0)
        if plan_result.status is not Status.SOLVED:
            result.outcome = Outcome.PLANNER_FAILED
            write_trace()
            return result
        result.plan_lengths.append(len(plan_result.plan))
        # the running plan's ammunition identities; USE consumes them
        ammo = [n for n, t in problem.objects
                if game.projectile is not None and t == game.projectile
                and "_ammo_" in n]
        consumed: set[str] = set()

        replan_needed = False
        for action in plan_result.plan:
            if not is_avatar_action(action):
                continue  # interaction and bookkeeping actions stay internal
            if state.turn >= budget:
                result.outcome = Outcome.TURN_BUDGET_EXHAUSTED
                result.turns = state.turn
                write_trace()
                return result
            violated = monitor(state, action, game, config, binding,
                               pool=(ammo, consumed))
            if violated:
                result.violations.append(Violation(
                    state.turn, action.ident, violated, state.fingerprint()))
                result.replans += 1
                replan_needed = True
                break
            result.issued.append((state.fingerprint(), action.ident))
            if action.name.startswith("AVATAR_ACTION_USE"):
                consumed.add(action.args[1])
            events = engine.step(state, engine_action(action.name))
            for event in events:
                trace_lines.append(
                    f"{state.turn - 1}:{event.marker}:{event.name}"
                    f"({','.join(event.args)})\n")
            if on_step is not None:
                on_step(state)
            if state.status is not GameStatus.ONGOING:
                result.outcome = (Outcome.WIN if state.status is GameStatus.WIN
                                  else Outcome.LOSE)
                result.turns = state.turn
                write_trace()
                return result
        if replan_needed:
            continue
        # plan exhausted with the game still on: log the unmet goal literals
        # as the violation and replan from here
        facts = state_facts(state, game, config, binding,
                            pool=(ammo, consumed))
        unmet = []
        for atom, positive in task.goal_literals:
            if (atom in facts) != positive:
                unmet.append(str(atom) if positive else f"(not {atom})")
        result.violations.append(Violation(
            state.turn, ("(goal)", ()), tuple(unmet), state.fingerprint()))
        result.replans += 1
        if state.turn == turn_at_plan:
            # the plan moved nothing yet the model thinks the goal is done:
            # a modelling gap, not a game loss
            result.outcome = Outcome.PLANNER_FAILED
            result.turns = state.turn
            write_trace()
            return result
        if state.turn >= budget:
            result.outcome = Outcome.TURN_BUDGET_EXHAUSTED
            result.turns = state.turn
            write_trace()
            return result
