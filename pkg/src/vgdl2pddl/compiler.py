"""Assemble a full PDDL 1.2 domain from a game model and the template base.

The compiled domain has the fixed turn skeleton: the avatar acts, collisions
resolve until END-TURN-INTERACTIONS certifies none is left, each self-moving
sprite type updates in its own sub-phase closed by STOP_<T>_MOVE, and
END-TURN-SPRITES re-opens the avatar phase (advancing the turn counter in
timeout games).

Compilation decisions that fall outside templates:
  * an Immovable sprite becomes a static (is-<T> ?x ?y) predicate instead of
    an object type when nothing ever affects it: it is never an interaction
    receiver, produces only stepBack, and no termination counts it;
  * stepBack interactions emit no action at all; they become destination-not-
    blocked preconditions on every action that moves the receiver;
  * a blocked self-mover performs <T>_MOVE_STOP (stay in place) so the STOP
    closer's all-moved check stays satisfiable; at the grid edge it exits and
    dies, mirroring the simulator;
  * avatar projectiles are pooled: problems carry reserve objects that a USE
    action places on the grid.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import DuplicateActionNameError, GdfError, UnsupportedGoalError
from .kb import KnowledgeBase
from .pddl import (
    Action,
    And,
    Atom,
    Domain,
    Forall,
    Formula,
    Not,
    Or,
    Predicate,
    conj,
)
from .vgdl import (
    GameModel,
    InteractionKind,
    SpriteDef,
    SpriteType,
    TerminationDef,
    TerminationKind,
)

REQUIREMENTS = (":strips", ":typing", ":negative-preconditions", ":equality",
                ":universal-preconditions", ":conditional-effects")

DIRECTIONS = ("UP", "DOWN", "LEFT", "RIGHT")

_AVATAR_TEMPLATE = {
    SpriteType.MOVING_AVATAR: "MovingAvatar",
    SpriteType.SHOOT_AVATAR: "ShootAvatar",
    SpriteType.FLAK_AVATAR: "FlakAvatar",
}

_COLLISION_KINDS = {
    InteractionKind.KILL_SPRITE,
    InteractionKind.KILL_BOTH,
    InteractionKind.COLLECT_RESOURCE,
    InteractionKind.KILL_IF_OTHER_HAS_MORE,
    InteractionKind.BOUNCE_FORWARD,
}


@dataclass(frozen=True)
class Blockers:
    """Producers of stepBack interactions against one moving sprite."""

    statics: tuple[str, ...]
    object_types: tuple[str, ...]

    def __bool__(self) -> bool:
        return bool(self.statics or self.object_types)


@dataclass(frozen=True)
class CompiledGame:
    model: GameModel
    domain: Domain
    goal: Formula
    avatar: SpriteDef
    static_sprites: tuple[str, ...]
    object_sprites: tuple[str, ...]  # concrete sprites that become objects
    moving_types: tuple[str, ...]
    projectile: Optional[str]
    resources: tuple[str, ...]
    has_timeout: bool
    timeout_limit: Optional[int]
    kiohm_limits: tuple[tuple[str, int], ...]
    base_init: tuple[Atom, ...]
    edge_directions: tuple[str, ...]


# -- sprite classification ---------------------------------------------------------

def static_sprites(model: GameModel) -> tuple[str, ...]:
    """Immovables nothing ever affects; compiled as is-<T> predicates."""
    referenced: set[str] = set()
    for t in model.terminations:
        if t.stype is not None:
            referenced.update(model.descendants(t.stype))
    out = []
    for s in model.concrete_sprites():
        if s.vgdl_type is not SpriteType.IMMOVABLE:
            continue
        if s.name in referenced:
            continue
        affected = False
        for i in model.interactions:
            if s.name in model.descendants(i.receiver):
                affected = True
            if (s.name in model.descendants(i.producer)
                    and i.kind is not InteractionKind.STEP_BACK):
                affected = True
        if not affected:
            out.append(s.name)
    return tuple(out)


def blockers_for(model: GameModel, sprite: str,
                 statics: tuple[str, ...]) -> Blockers:
    static_list: list[str] = []
    object_list: list[str] = []
    for i in model.interactions:
        if i.kind is not InteractionKind.STEP_BACK:
            continue
        if sprite not in model.descendants(i.receiver):
            continue
        producers = [p for p in model.descendants(i.producer)
                     if not model.sprite(p).is_abstract]
        if all(p in statics for p in producers):
            for p in producers:
                if p not in static_list:
                    static_list.append(p)
        else:
            if i.producer not in object_list:
                object_list.append(i.producer)
    return Blockers(tuple(static_list), tuple(object_list))


def projectile_of(model: GameModel) -> Optional[str]:
    avatar = model.avatar()
    if avatar.vgdl_type in (SpriteType.FLAK_AVATAR, SpriteType.SHOOT_AVATAR):
        stype = avatar.params.get("stype")
        if stype is None or not model.has_sprite(stype):
            raise GdfError(
                f"avatar {avatar.name!r} needs a declared projectile stype")
        return stype
    return None


def moving_types(model: GameModel) -> tuple[str, ...]:
    return tuple(s.name for s in model.concrete_sprites()
                 if s.vgdl_type is SpriteType.MISSILE)


# -- goal deduction -----------------------------------------------------------------

def deduce_goal(terminations: tuple[TerminationDef, ...]) -> Formula:
    for t in terminations:
        if not t.win:
            continue
        if t.kind is TerminationKind.SPRITE_COUNTER:
            if t.limit != 0:
                raise UnsupportedGoalError(
                    f"win SpriteCounter with limit={t.limit} has no goal encoding")
            return Forall((("?o", t.stype),), Atom("dead", ("?o",)))
        if t.kind is TerminationKind.TIMEOUT:
            return And((Atom("turn", (f"n{t.limit}",)),
                        Not(Atom("dead", ("avatar",)))))
    raise UnsupportedGoalError("no winning termination")


# -- formula surgery helpers --------------------------------------------------------

def _with_pre(action: Action, extra: list[Formula]) -> Action:
    if not extra:
        return action
    return Action(action.name, action.params,
                  conj(action.precondition, *extra), action.effect)


def _with_eff(action: Action, extra: list[Formula]) -> Action:
    if not extra:
        return action
    return Action(action.name, action.params, action.precondition,
                  conj(action.effect, *extra))


def _dest_cell(action: Action) -> tuple[str, str]:
    names = [v for v, _ in action.params]
    if "?new_x" in names:
        return ("?new_x", "?y")
    return ("?x", "?new_y")


def _blocker_conjuncts(blockers: Blockers, cell: tuple[str, str]) -> list[Formula]:
    dx, dy = cell
    out: list[Formula] = []
    for name in blockers.statics:
        out.append(Not(Atom(f"is-{name}", (dx, dy))))
    for type_name in blockers.object_types:
        out.append(Forall((("?blk", type_name),),
                          Not(Atom("at", (dx, dy, "?blk")))))
    return out


def _add_in_reserve_disjunct(action: Action) -> Action:
    """Extend STOP_<T>_MOVE's all-moved check with pooled projectiles."""
    parts = list(action.precondition.parts
                 if isinstance(action.precondition, And)
                 else [action.precondition])
    for idx, part in enumerate(parts):
        if isinstance(part, Forall) and isinstance(part.body, Or):
            var = part.variables[0][0]
            parts[idx] = Forall(part.variables,
                                Or(part.body.parts
                                   + (Atom("in-reserve", (var,)),)))
    return Action(action.name, action.params, conj(*parts), action.effect)


# -- main assembly ------------------------------------------------------------------

def compile_game(model: GameModel,
                 kb: Optional[KnowledgeBase] = None) -> CompiledGame:
    kb = kb or KnowledgeBase()
    avatar = model.avatar()
    statics = static_sprites(model)
    movers = moving_types(model)
    projectile = projectile_of(model)
    resources = tuple(s.name for s in model.concrete_sprites()
                      if s.vgdl_type is SpriteType.RESOURCE)
    timeout = next((t for t in model.terminations
                    if t.kind is TerminationKind.TIMEOUT), None)

    # --- types -------------------------------------------------------------
    type_decls: list[tuple[str, Optional[str]]] = []
    declared: set[str] = set()
    sprite_types = [s for s in model.sprites if s.name not in statics]

    def class_parent(s: SpriteDef) -> str:
        if s.vgdl_type.value.lower() == s.name.lower():
            return "Object"
        return s.vgdl_type.value

    for s in sprite_types:
        if s.parent is not None and s.parent not in statics:
            continue  # parent handles the class supertype
        parent = class_parent(s)
        if parent != "Object" and parent not in declared:
            type_decls.append((parent, "Object"))
            declared.add(parent)
    for s in sprite_types:
        parent = (s.parent if s.parent is not None and s.parent not in statics
                  else class_parent(s))
        type_decls.append((s.name, parent))
        declared.add(s.name)
    type_decls.append(("num", None))

    # --- template instantiations -------------------------------------------
    predicates: list[Predicate] = []
    pred_seen: set[str] = set()
    base_init: list[Atom] = []

    def add_predicates(preds):
        for p in preds:
            if p.name not in pred_seen:
                predicates.append(p)
                pred_seen.add(p.name)

    core = kb.instantiate(kb.lookup("turn", "core"), {})
    add_predicates(core.predicates)
    base_init.extend(core.init_facts)
    eti_core = next(a for a in core.actions if a.name == "END-TURN-INTERACTIONS")
    ets_core = next(a for a in core.actions if a.name == "END-TURN-SPRITES")

    avatar_blockers = blockers_for(model, avatar.name, statics)

    avatar_binding = {"A": avatar.name}
    if projectile is not None:
        avatar_binding["P"] = projectile
    avatar_inst = kb.instantiate(
        kb.lookup("avatar", _AVATAR_TEMPLATE[avatar.vgdl_type]), avatar_binding)
    add_predicates(avatar_inst.predicates)
    avatar_actions: list[Action] = []
    for action in avatar_inst.actions:
        if action.name.startswith("AVATAR_ACTION_MOVE_"):
            action = _with_pre(action, _blocker_conjuncts(
                avatar_blockers, _dest_cell(action)))
        avatar_actions.append(action)

    # interactions, in declaration order
    interaction_actions: list[Action] = []
    no_collision: list[Formula] = []
    kiohm_limits: list[tuple[str, int]] = []
    for inter in model.interactions:
        if inter.kind is InteractionKind.STEP_BACK:
            continue
        binding = {"S1": inter.receiver, "S2": inter.producer}
        if inter.kind is InteractionKind.KILL_IF_OTHER_HAS_MORE:
            binding["R"] = inter.params["resource"]
            binding["L"] = inter.params["limit"]
            kiohm_limits.append((inter.params["resource"],
                                 int(inter.params["limit"])))
        inst = kb.instantiate(
            kb.lookup("interaction", inter.kind.value), binding)
        add_predicates(inst.predicates)
        for action in inst.actions:
            if "_BOUNCEFORWARD_" in action.name:
                receiver_blockers = blockers_for(model, inter.receiver, statics)
                action = _with_pre(action, _blocker_conjuncts(
                    receiver_blockers, _dest_cell(action)))
            interaction_actions.append(action)
        if inter.kind in _COLLISION_KINDS:
            no_collision.append(Forall(
                (("?o1", inter.receiver), ("?o2", inter.producer),
                 ("?x", "num"), ("?y", "num")),
                Or((Atom("=", ("?o1", "?o2")),
                    Not(Atom("at", ("?x", "?y", "?o1"))),
                    Not(Atom("at", ("?x", "?y", "?o2")))))))
        elif inter.kind is InteractionKind.KILL_IF_FROM_ABOVE:
            no_collision.append(Forall(
                (("?o1", inter.receiver), ("?o2", inter.producer),
                 ("?x", "num"), ("?ya", "num"), ("?y", "num")),
                Or((Atom("=", ("?o1", "?o2")),
                    Not(Atom("at", ("?x", "?y", "?o1"))),
                    Not(Atom("at", ("?x", "?ya", "?o2"))),
                    Not(Atom("next", ("?ya", "?y"))),
                    Not(Atom("oriented-down", ("?o2",)))))))

    # sprite behaviour: resources, statics, self-movers (declaration order)
    mover_actions: dict[str, list[Action]] = {}
    edge_dirs: list[str] = []
    for s in model.concrete_sprites():
        if s.name in statics:
            inst = kb.instantiate(kb.lookup("sprite", "static"), {"T": s.name})
            add_predicates(inst.predicates)
            continue
        if s.vgdl_type is SpriteType.RESOURCE:
            inst = kb.instantiate(kb.lookup("sprite", "Resource"), {"T": s.name})
            add_predicates(inst.predicates)
            base_init.extend(inst.init_facts)
            continue
        if s.vgdl_type is not SpriteType.MISSILE:
            continue
        if (projectile is not None and s.name == projectile
                and avatar.vgdl_type is SpriteType.SHOOT_AVATAR):
            variant = "omni"
        else:
            orientation = s.params.get("orientation")
            if orientation is None or orientation.upper() not in DIRECTIONS:
                raise GdfError(
                    f"missile {s.name!r} needs an orientation parameter")
            variant = orientation.lower()
        inst = kb.instantiate(kb.lookup("sprite", "Missile", variant=variant),
                              {"T": s.name})
        add_predicates(inst.predicates)
        mover_blockers = blockers_for(model, s.name, statics)
        for p in inst.predicates:
            if p.name.startswith("edge-"):
                d = p.name.split("-", 1)[1].upper()
                if d not in edge_dirs:
                    edge_dirs.append(d)
        actions = []
        for action in inst.actions:
            is_move_stop = "_MOVE_STOP" in action.name
            is_move = (not is_move_stop and "_EXIT_" not in action.name
                       and not action.name.startswith("STOP_"))
            if is_move:
                action = _with_pre(action, _blocker_conjuncts(
                    mover_blockers, _dest_cell(action)))
            elif is_move_stop:
                if not mover_blockers:
                    continue  # nothing can block this mover: no stay-in-place
                blocked = _blocked_disjunction(mover_blockers,
                                               _dest_cell(action))
                action = _with_pre(action, [blocked])
            elif action.name.startswith("STOP_") and s.name == projectile:
                action = _add_in_reserve_disjunct(action)
            actions.append(action)
        mover_actions[s.name] = actions

    if timeout is not None:
        counter = kb.instantiate(kb.lookup("turn", "counter"), {})
        add_predicates(counter.predicates)
        base_init.extend(counter.init_facts)

    # --- phase wiring -------------------------------------------------------
    eti_extra_eff: list[Formula] = []
    if movers:
        eti_extra_eff.append(Atom(f"turn-{movers[0]}-move"))
    eti = _with_eff(_with_pre(eti_core, no_collision), eti_extra_eff)

    sprite_phase_actions: list[Action] = []
    for idx, mover in enumerate(movers):
        for action in mover_actions[mover]:
            if action.name.startswith("STOP_") and idx + 1 < len(movers):
                action = _with_eff(action,
                                   [Atom(f"turn-{movers[idx + 1]}-move")])
            sprite_phase_actions.append(action)

    ets_pre = [Atom(f"finished-turn-{m}-move") for m in movers]
    ets_eff: list[Formula] = [Not(Atom(f"finished-turn-{m}-move"))
                              for m in movers]
    ets_eff.append(Forall((("?a", avatar.name),),
                          Not(Atom("avatar-moved", ("?a",)))))
    ets = _with_eff(_with_pre(ets_core, ets_pre), ets_eff)
    if timeout is not None:
        ets = Action(
            ets.name, ets.params + (("?t", "num"), ("?t_next", "num")),
            conj(ets.precondition, Atom("turn", ("?t",)),
                 Atom("next", ("?t", "?t_next"))),
            conj(ets.effect, Not(Atom("turn", ("?t",))),
                 Atom("turn", ("?t_next",))))

    all_actions = (avatar_actions + interaction_actions + [eti]
                   + sprite_phase_actions + [ets])
    names = [a.name for a in all_actions]
    dupes = {n for n in names if names.count(n) > 1}
    if dupes:
        raise DuplicateActionNameError(f"duplicate action names {sorted(dupes)}")

    domain = Domain(
        name=f"{model.name.capitalize()}Domain",
        requirements=REQUIREMENTS,
        types=tuple(type_decls),
        predicates=tuple(predicates),
        actions=tuple(all_actions),
    )
    goal = deduce_goal(model.terminations)
    return CompiledGame(
        model=model,
        domain=domain,
        goal=goal,
        avatar=avatar,
        static_sprites=statics,
        object_sprites=tuple(s.name for s in model.concrete_sprites()
                             if s.name not in statics),
        moving_types=movers,
        projectile=projectile,
        resources=resources,
        has_timeout=timeout is not None,
        timeout_limit=timeout.limit if timeout is not None else None,
        kiohm_limits=tuple(kiohm_limits),
        base_init=tuple(base_init),
        edge_directions=tuple(edge_dirs),
    )


def _blocked_disjunction(blockers: Blockers, cell: tuple[str, str]) -> Formula:
    dx, dy = cell
    options: list[Formula] = []
    for name in blockers.statics:
        options.append(Atom(f"is-{name}", (dx, dy)))
    for type_name in blockers.object_types:
        options.append(Not(Forall((("?blk", type_name),),
                                  Not(Atom("at", (dx, dy, "?blk"))))))
    return options[0] if len(options) == 1 else Or(tuple(options))


def compile_domain(model: GameModel,
                   kb: Optional[KnowledgeBase] = None) -> Domain:
    return compile_game(model, kb).domain


def emit_turn_structure(model: GameModel,
                        kb: Optional[KnowledgeBase] = None
                        ) -> tuple[tuple[Predicate, ...], tuple[Action, ...]]:
    """The phase-control slice of the compiled domain."""
    game = compile_game(model, kb)
    phase_names = {"turn-avatar", "finished-turn-avatar", "avatar-moved",
                   "turn-interactions", "finished-turn-interactions", "turn"}
    for m in game.moving_types:
        phase_names.update({f"turn-{m}-move", f"finished-turn-{m}-move",
                            f"{m}-moved"})
    preds = tuple(p for p in game.domain.predicates if p.name in phase_names)
    action_names = {"END-TURN-INTERACTIONS", "END-TURN-SPRITES"}
    action_names.update(f"STOP_{m.upper()}_MOVE" for m in game.moving_types)
    actions = tuple(a for a in game.domain.actions if a.name in action_names)
    return preds, actions
