"""Domain-assembly tests: element counts, type hierarchy, goal deduction."""
import pytest

from test_vgdl import ALIENS_GDF, SOKOBAN_GDF
from vgdl2pddl.compiler import (
    compile_domain,
    deduce_goal,
    emit_turn_structure,
    static_sprites,
)
from vgdl2pddl.errors import UnsupportedGoalError
from vgdl2pddl.games import load_game
from vgdl2pddl.pddl import format_formula, print_domain, read_domain
from vgdl2pddl.vgdl import (
    SPRITE_TYPE_BY_NAME,
    TerminationDef,
    TerminationKind,
    parse_gdf,
)


def element_counts(domain):
    """(types, supertypes, predicates, actions) with supertypes = the
    declared type names that are VGDL classes."""
    class_names = {n.lower() for n in SPRITE_TYPE_BY_NAME}
    supertypes = [n for n, _ in domain.types if n.lower() in class_names]
    types = [n for n, _ in domain.types if n.lower() not in class_names]
    return (len(types), len(supertypes),
            len(domain.predicates), len(domain.actions))


class TestElementCounts:
    def test_sokoban_counts(self):
        domain = compile_domain(load_game("sokoban"))
        assert element_counts(domain) == (4, 3, 13, 12)

    def test_zenpuzzle_counts(self):
        domain = compile_domain(load_game("zenpuzzle"))
        assert element_counts(domain) == (5, 2, 15, 8)


class TestTypes:
    def test_fig1_hierarchy(self):
        domain = compile_domain(parse_gdf(ALIENS_GDF, name="aliens"))
        types = dict(domain.types)
        assert types["bullet"] == "missile"
        assert types["rock"] == "missile"
        # the sprite named like its class collapses onto the root Object
        assert types["missile"] == "Object"
        assert types["player"] == "FlakAvatar"
        assert types["alien"] == "Bomber"
        assert types["num"] is None

    def test_statics_have_no_type(self):
        model = load_game("sokoban")
        assert static_sprites(model) == ("wall",)
        domain = compile_domain(model)
        assert "wall" not in dict(domain.types)
        assert any(p.name == "is-wall" for p in domain.predicates)

    def test_zen_statics(self):
        model = load_game("zenpuzzle")
        assert set(static_sprites(model)) == {"floor", "body", "wall"}

    def test_termination_reference_blocks_staticness(self):
        # exit is Immovable but a SpriteCounter counts it, so it is an object
        model = load_game("keymaze")
        assert static_sprites(model) == ("wall",)
        assert "exit" in dict(compile_domain(model).types)


class TestActions:
    def test_one_action_per_plain_interaction(self):
        domain = compile_domain(load_game("sokoban"))
        names = [a.name for a in domain.actions]
        assert names.count("BOX_HOLE_KILLSPRITE") == 1
        # bounceForward is directional: four suffixed variants
        bounce = [n for n in names if n.startswith("BOX_AVATAR_BOUNCEFORWARD")]
        assert sorted(bounce) == [
            "BOX_AVATAR_BOUNCEFORWARD_DOWN", "BOX_AVATAR_BOUNCEFORWARD_LEFT",
            "BOX_AVATAR_BOUNCEFORWARD_RIGHT", "BOX_AVATAR_BOUNCEFORWARD_UP"]
        # stepBack compiles to move preconditions, not actions
        assert not any("STEPBACK" in n for n in names)

    def test_stepback_becomes_wall_guard(self):
        domain = compile_domain(load_game("sokoban"))
        move = next(a for a in domain.actions
                    if a.name == "AVATAR_ACTION_MOVE_DOWN")
        assert "(not (is-wall ?x ?new_y))" in format_formula(move.precondition)
        bounce = next(a for a in domain.actions
                      if a.name == "BOX_AVATAR_BOUNCEFORWARD_LEFT")
        assert "(not (is-wall ?new_x ?y))" in format_formula(bounce.precondition)

    def test_object_blocker_is_quantified(self):
        domain = compile_domain(load_game("digger"))
        move = next(a for a in domain.actions if a.name == "BOULDER_MOVE_DOWN")
        pre = format_formula(move.precondition)
        # boulders are stopped by walls (static) and dirt (object type)
        assert "(not (is-wall ?x ?new_y))" in pre
        assert "(forall (?blk - dirt) (not (at ?x ?new_y ?blk)))" in pre

    def test_move_stop_exists_only_with_blockers(self):
        digger = compile_domain(load_game("digger"))
        assert any(a.name == "BOULDER_MOVE_STOP" for a in digger.actions)
        aliens = compile_domain(parse_gdf(ALIENS_GDF, name="aliens"))
        assert not any("MOVE_STOP" in a.name for a in aliens.actions)

    def test_pooled_stop_accepts_reserve(self):
        domain = compile_domain(parse_gdf(ALIENS_GDF, name="aliens"))
        stop = next(a for a in domain.actions if a.name == "STOP_BULLET_MOVE")
        assert "(in-reserve ?o)" in format_formula(stop.precondition)
        rock_stop = next(a for a in domain.actions
                         if a.name == "STOP_ROCK_MOVE")
        assert "(in-reserve ?o)" not in format_formula(rock_stop.precondition)

    def test_flak_avatar_actions(self):
        domain = compile_domain(parse_gdf(ALIENS_GDF, name="aliens"))
        names = {a.name for a in domain.actions}
        assert "AVATAR_ACTION_MOVE_LEFT" in names
        assert "AVATAR_ACTION_MOVE_RIGHT" in names
        assert "AVATAR_ACTION_USE" in names
        assert "AVATAR_ACTION_NIL" in names
        # no vertical movement for a flak avatar
        assert "AVATAR_ACTION_MOVE_UP" not in names
        assert "AVATAR_ACTION_MOVE_DOWN" not in names


class TestTurnStructure:
    def test_degenerate_game_has_no_sprite_phase(self):
        model = load_game("sokoban")  # no self-movers
        preds, actions = emit_turn_structure(model)
        names = {a.name for a in actions}
        assert names == {"END-TURN-INTERACTIONS", "END-TURN-SPRITES"}
        eti = next(a for a in actions if a.name == "END-TURN-INTERACTIONS")
        assert "turn-" not in "".join(
            format_formula(p) for p in eti.effect.parts
            if "move" in format_formula(p))

    def test_two_mover_chain(self):
        model = parse_gdf(ALIENS_GDF, name="aliens")
        _, actions = emit_turn_structure(model)
        eti = next(a for a in actions if a.name == "END-TURN-INTERACTIONS")
        assert "(turn-bullet-move)" in format_formula(eti.effect)
        stop_bullet = next(a for a in actions if a.name == "STOP_BULLET_MOVE")
        assert "(turn-rock-move)" in format_formula(stop_bullet.effect)
        stop_rock = next(a for a in actions if a.name == "STOP_ROCK_MOVE")
        assert "(turn-" not in format_formula(stop_rock.effect).replace(
            "(not (turn-rock-move))", "")
        ets = next(a for a in actions if a.name == "END-TURN-SPRITES")
        pre = format_formula(ets.precondition)
        assert "(finished-turn-bullet-move)" in pre
        assert "(finished-turn-rock-move)" in pre

    def test_timeout_advances_counter(self):
        model = load_game("rain")
        domain = compile_domain(model)
        ets = next(a for a in domain.actions if a.name == "END-TURN-SPRITES")
        assert ("?t", "num") in ets.params
        eff = format_formula(ets.effect)
        assert "(not (turn ?t))" in eff and "(turn ?t_next)" in eff
        # non-timeout games carry no counter at all
        sokoban = compile_domain(load_game("sokoban"))
        assert not any(p.name == "turn" for p in sokoban.predicates)


class TestGoalDeduction:
    def test_sokoban_goal(self):
        goal = deduce_goal(load_game("sokoban").terminations)
        assert format_formula(goal) == "(forall (?o - box) (dead ?o))"

    def test_timeout_goal(self):
        terms = (TerminationDef(TerminationKind.TIMEOUT, 50, True),)
        goal = deduce_goal(terms)
        assert format_formula(goal) == "(and (turn n50) (not (dead avatar)))"

    def test_exit_goal_ignores_lose_conditions(self):
        goal = deduce_goal(load_game("digger").terminations)
        assert format_formula(goal) == "(forall (?o - exit) (dead ?o))"

    def test_positive_limit_unsupported(self):
        terms = (TerminationDef(TerminationKind.SPRITE_COUNTER, 3, True, "box"),)
        with pytest.raises(UnsupportedGoalError):
            deduce_goal(terms)


class TestSelfConsistency:
    @pytest.mark.parametrize("name", ["sokoban", "zenpuzzle", "keymaze",
                                      "digger", "rain", "aliens"])
    def test_emitted_domain_reparses(self, name):
        domain = compile_domain(load_game(name))
        printed = print_domain(domain)
        assert read_domain(printed) == domain
        assert print_domain(read_domain(printed)) == printed

    def test_compilation_deterministic(self):
        model = parse_gdf(SOKOBAN_GDF, name="sokoban")
        first = print_domain(compile_domain(model))
        second = print_domain(compile_domain(parse_gdf(SOKOBAN_GDF,
                                                       name="sokoban")))
        assert first == second
