"""Configuration-file emission and PDDL problem generation.

The configuration file records, per game element, which predicates an
instance contributes to a problem (gameElementsCorrespondence), the PDDL type
of each schema variable (variablesTypes) and the goal list.  The agent reloads
it independently of the compiler, so it is persisted in a YAML-compatible
indentation format:

    gameElementsCorrespondence:
      avatar:
      - (at ?x ?y ?avatar)
      wall:
      - (is-wall ?x ?y)
    variablesTypes:
      ?avatar: avatar
      ?x: num
      ?y: num
    goals:
    - goalPredicate: (forall (?o - box) (dead ?o))
      priority: 1

Problem generation works from a level grid or from a live simulator state
(replanning path).  Object naming is <sprite>_<x>_<y> from the cell at
generation time; the single avatar instance is always named ``avatar``.
Orientation, resource-counter, turn-counter, order (next), threshold (geq-*)
and edge facts are owned by the generator, not the correspondence table.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Optional, Protocol, Union

import yaml

from .compiler import CompiledGame, blockers_for
from .errors import GdfError, MultipleAvatarsError, NoAvatarError
from .pddl import (
    Atom,
    Formula,
    Problem,
    conj,
    format_formula,
    parse_fragment_formula,
)
from .vgdl import GameModel, InteractionKind, LevelGrid, SpriteType

ORIENTATION_PRED = {"UP": "oriented-up", "DOWN": "oriented-down",
                    "LEFT": "oriented-left", "RIGHT": "oriented-right"}

DEFAULT_AVATAR_ORIENTATION = "DOWN"


@dataclass(frozen=True)
class ConfigGoal:
    goal_predicate: str
    priority: int = 1


@dataclass(frozen=True)
class ConfigFile:
    correspondence: tuple[tuple[str, tuple[str, ...]], ...]
    variables_types: tuple[tuple[str, str], ...]
    goals: tuple[ConfigGoal, ...]

    def schemata_for(self, sprite: str) -> tuple[str, ...]:
        for name, schemata in self.correspondence:
            if name == sprite:
                return schemata
        raise KeyError(sprite)

    def active_goal(self) -> Formula:
        # only priority-1 goals are planned for; the rest are recorded
        for g in self.goals:
            if g.priority == 1:
                return parse_fragment_formula(g.goal_predicate)
        raise GdfError("configuration lists no priority-1 goal")


class InstanceLike(Protocol):
    uid: int
    sprite: str
    x: int
    y: int
    orientation: Optional[str]


class StateLike(Protocol):
    turn: int
    width: int
    height: int
    resources: dict[str, int]

    def live(self) -> Iterable[InstanceLike]: ...


# -- configuration emission ---------------------------------------------------------

def emit_config(game: CompiledGame) -> ConfigFile:
    entries: list[tuple[str, tuple[str, ...]]] = []
    variables: list[tuple[str, str]] = []
    for sprite in game.model.concrete_sprites():
        name = sprite.name
        if name in game.static_sprites:
            entries.append((name, (f"(is-{name} ?x ?y)",)))
        else:
            entries.append((name, (f"(at ?x ?y ?{name})",)))
            variables.append((f"?{name}", name))
    variables.append(("?x", "num"))
    variables.append(("?y", "num"))
    goal = ConfigGoal(format_formula(game.goal), priority=1)
    return ConfigFile(tuple(entries), tuple(variables), (goal,))


def config_to_text(config: ConfigFile) -> str:
    lines = ["gameElementsCorrespondence:"]
    for name, schemata in config.correspondence:
        lines.append(f"  {name}:")
        for schema in schemata:
            lines.append(f"  - {schema}")
    lines.append("variablesTypes:")
    for var, typ in config.variables_types:
        lines.append(f"  {var}: {typ}")
    lines.append("goals:")
    for goal in config.goals:
        lines.append(f"- goalPredicate: {goal.goal_predicate}")
        lines.append(f"  priority: {goal.priority}")
    return "\n".join(lines) + "\n"


def config_from_text(text: str) -> ConfigFile:
    data = yaml.safe_load(text)
    correspondence = tuple(
        (name, tuple(schemata))
        for name, schemata in data["gameElementsCorrespondence"].items())
    variables = tuple(data["variablesTypes"].items())
    goals = tuple(ConfigGoal(g["goalPredicate"], int(g.get("priority", 1)))
                  for g in data["goals"])
    return ConfigFile(correspondence, variables, goals)


# -- instance collection -------------------------------------------------------------

@dataclass
class _Inst:
    sprite: str
    x: int
    y: int
    orientation: Optional[str]
    uid: Optional[int] = None


def _instances_from_grid(grid: LevelGrid, model: GameModel) -> list[_Inst]:
    out: list[_Inst] = []
    for x, y, char in grid.positions():
        if char in (" ", "."):
            continue
        for name in model.level_mapping[char]:
            sprite = model.sprite(name)
            if sprite.is_abstract:
                raise GdfError(
                    f"level instantiates abstract sprite {name!r}")
            orientation = sprite.params.get("orientation")
            if orientation is None and sprite.is_avatar:
                orientation = DEFAULT_AVATAR_ORIENTATION
            out.append(_Inst(name, x, y,
                             orientation.upper() if orientation else None))
    return out


def num_count(game: CompiledGame, width: int, height: int) -> int:
    needed = [width, height]
    needed.extend(limit + 1 for _, limit in game.kiohm_limits)
    if game.timeout_limit is not None:
        needed.append(game.timeout_limit + 1)
    for name in game.resources:
        limit = game.model.sprite(name).params.get("limit")
        if limit is not None:
            needed.append(int(limit) + 1)
    return max(needed)


# -- problem generation ---------------------------------------------------------------

def generate_problem(source: Union[LevelGrid, StateLike], game: CompiledGame,
                     config: Optional[ConfigFile] = None,
                     binding: Optional[dict[int, str]] = None,
                     pool: Optional[tuple[Iterable[str], Iterable[str]]] = None,
                     ) -> tuple[Problem, dict[int, str]]:
    """Translate a level grid or a live game state into a PDDL problem.

    Returns the problem and the instance-uid -> object-name binding used
    (empty for grid input).  Passing a previous binding keeps object names
    stable across replanning problems for the monitor's benefit.

    `pool` pins the projectile reserve to (names, consumed) from an earlier
    problem: the monitor must see the ammunition identities the running plan
    refers to, not a fresh recount.
    """
    config = config or emit_config(game)
    if isinstance(source, LevelGrid):
        instances = _instances_from_grid(source, game.model)
        resources: dict[str, int] = {}
        turn = 0
        width, height = source.width, source.height
    else:
        instances = [_Inst(i.sprite, i.x, i.y, i.orientation, uid=i.uid)
                     for i in source.live()]
        resources = dict(source.resources)
        turn = source.turn
        width, height = source.width, source.height

    count = num_count(game, width, height)
    # A chain longer than a grid dimension lets the avatar plan into cells
    # beyond the grid unless walls fence it (self-movers carry edge guards).
    horizontal_only = game.avatar.vgdl_type is SpriteType.FLAK_AVATAR
    risky = count > width or (not horizontal_only and count > height)
    if risky and not _fenced(game, instances, width, height):
        warnings.warn(
            f"num chain length {count} exceeds a grid dimension "
            f"({width}x{height}); fence the level with walls or the avatar "
            f"may plan into cells outside the grid", stacklevel=2)

    avatars = [i for i in instances if i.sprite == game.avatar.name]
    if not avatars:
        raise NoAvatarError("level contains no avatar instance")
    if len(avatars) > 1:
        raise MultipleAvatarsError(
            f"level contains {len(avatars)} avatar instances")

    binding = dict(binding) if binding else {}
    used = set(binding.values())
    statics = set(game.static_sprites)
    names: list[tuple[str, _Inst]] = []
    for inst in instances:
        if inst.sprite in statics:
            continue  # statics become is-<T> facts, never objects
        if inst.uid is not None and inst.uid in binding:
            names.append((binding[inst.uid], inst))
            continue
        if inst.sprite == game.avatar.name:
            name = "avatar"
        else:
            name = f"{inst.sprite}_{inst.x}_{inst.y}"
            k = 2
            while name in used:
                name = f"{inst.sprite}_{inst.x}_{inst.y}_{k}"
                k += 1
        used.add(name)
        if inst.uid is not None:
            binding[inst.uid] = name
        names.append((name, inst))

    # objects: avatar, instances (alphabetical), ammo pool, nums
    objects: list[tuple[str, str]] = [("avatar", game.avatar.name)]
    non_avatar = sorted((n, i) for n, i in names if i.sprite != game.avatar.name)
    objects.extend((n, i.sprite) for n, i in non_avatar)
    ammo_names: list[str] = []
    consumed_ammo: set[str] = set()
    if game.projectile is not None:
        if pool is not None:
            ammo_names = list(pool[0])
            consumed_ammo = set(pool[1])
        else:
            size = _pool_size(game, instances)
            ammo_names = [f"{game.projectile}_ammo_{k}"
                          for k in range(1, size + 1)]
        objects.extend((n, game.projectile) for n in ammo_names)
    nums = [f"n{i}" for i in range(count)]
    objects.extend((n, "num") for n in nums)

    # init facts -----------------------------------------------------------
    init: list[Atom] = []
    by_sprite: dict[str, list[tuple[str, _Inst]]] = {}
    for n, i in names:
        by_sprite.setdefault(i.sprite, []).append((n, i))
    for inst in instances:
        if inst.sprite in statics:
            by_sprite.setdefault(inst.sprite, []).append(("", inst))
    for sprite_name, schemata in config.correspondence:
        for obj_name, inst in by_sprite.get(sprite_name, []):
            for schema in schemata:
                formula = parse_fragment_formula(schema)
                assert isinstance(formula, Atom)
                args = tuple(
                    f"n{inst.x}" if a == "?x" else
                    f"n{inst.y}" if a == "?y" else
                    obj_name if a.startswith("?") else a
                    for a in formula.args)
                init.append(Atom(formula.predicate, args))
    for obj_name, inst in names:
        if inst.orientation and _wants_orientation(game, inst.sprite):
            init.append(Atom(ORIENTATION_PRED[inst.orientation], (obj_name,)))
    for ammo in ammo_names:
        if ammo in consumed_ammo:
            continue
        init.append(Atom("in-reserve", (ammo,)))
        orientation = game.model.sprite(game.projectile).params.get("orientation")
        if orientation:
            init.append(Atom(ORIENTATION_PRED[orientation.upper()], (ammo,)))
    for resource in game.resources:
        init.append(Atom(f"got-resource-{resource}",
                         (f"n{resources.get(resource, 0)}",)))
    if game.has_timeout:
        init.append(Atom("turn", (f"n{turn}",)))
    init.append(Atom("turn-avatar"))
    for i in range(count - 1):
        init.append(Atom("next", (f"n{i}", f"n{i + 1}")))
    for resource, limit in game.kiohm_limits:
        for i in range(limit, count):
            init.append(Atom(f"geq-{resource}-{limit}", (f"n{i}",)))
    for direction in game.edge_directions:
        if direction == "UP":
            init.append(Atom("edge-up", ("n0",)))
        elif direction == "DOWN":
            init.append(Atom("edge-down", (f"n{height - 1}",)))
        elif direction == "LEFT":
            init.append(Atom("edge-left", ("n0",)))
        elif direction == "RIGHT":
            init.append(Atom("edge-right", (f"n{width - 1}",)))

    # plans must close their final turn (traces end on END-TURN-SPRITES), so
    # the objective only counts once the avatar phase reopens
    goal = conj(config.active_goal(), Atom("turn-avatar"))
    name = game.model.name.capitalize()
    problem = Problem(
        name=f"{name}Problem",
        domain=f"{name}Domain",
        objects=tuple(objects),
        init=tuple(init),
        goal=goal,
    )
    return problem, binding


def _wants_orientation(game: CompiledGame, sprite: str) -> bool:
    s = game.model.sprite(sprite)
    return s.is_avatar or s.vgdl_type is SpriteType.MISSILE


def _fenced(game: CompiledGame, instances: list[_Inst],
            width: int, height: int) -> bool:
    """True when avatar-blocking sprites occupy every border cell."""
    blockers = blockers_for(game.model, game.avatar.name, game.static_sprites)
    blocking_names = set(blockers.statics)
    for type_name in blockers.object_types:
        blocking_names.update(game.model.descendants(type_name))
    occupied = {(i.x, i.y) for i in instances if i.sprite in blocking_names}
    for x in range(width):
        if (x, 0) not in occupied or (x, height - 1) not in occupied:
            return False
    for y in range(height):
        if (0, y) not in occupied or (width - 1, y) not in occupied:
            return False
    return True


def _pool_size(game: CompiledGame, instances: list[_Inst]) -> int:
    """Reserve as many projectiles as there are live targets they can kill."""
    targets = 0
    for inter in game.model.interactions:
        if inter.kind not in (InteractionKind.KILL_SPRITE,
                              InteractionKind.KILL_BOTH):
            continue
        if game.projectile not in game.model.descendants(inter.producer):
            continue
        receivers = set(game.model.descendants(inter.receiver))
        targets += sum(1 for i in instances if i.sprite in receivers)
    return targets
