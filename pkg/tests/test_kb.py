"""Knowledge-base template tests: lookup, instantiation, micro checks."""
import re

import pytest

from vgdl2pddl.errors import UnboundPlaceholderError, UnknownTemplateError
from vgdl2pddl.kb import KnowledgeBase, validate_kb
from vgdl2pddl.pddl import And, Atom, Not, format_formula


@pytest.fixture(scope="module")
def kb():
    return KnowledgeBase()


class TestLookup:
    def test_missile_template_contents(self, kb):
        ts = kb.lookup("sprite", "Missile", variant="DOWN")
        text = "\n".join(ts.actions)
        assert "<T>_MOVE_DOWN" in text
        assert "<T>_MOVE_STOP" in text
        preds = "\n".join(ts.predicates)
        assert "(<T>-moved ?o - <T>)" in preds
        assert "(turn-<T>-move)" in preds
        assert "(finished-turn-<T>-move)" in preds

    def test_collectresource_counter_update(self, kb):
        ts = kb.lookup("interaction", "collectResource")
        text = "\n".join(ts.actions)
        assert "<S1>_<S2>_COLLECTRESOURCE" in text
        assert "got-resource-<S1>" in text

    def test_immovable_has_no_behaviour(self, kb):
        ts = kb.lookup("sprite", "Immovable")
        assert ts.actions == ()
        assert ts.predicates == ()

    def test_unknown_template(self, kb):
        with pytest.raises(UnknownTemplateError):
            kb.lookup("sprite", "Chaser")


class TestInstantiate:
    def test_table_collectresource_instantiation(self, kb):
        ts = kb.lookup("interaction", "collectResource")
        inst = kb.instantiate(ts, {"S1": "shoes", "S2": "user"})
        action = inst.actions[0]
        assert action.name == "SHOES_USER_COLLECTRESOURCE"
        assert action.params == (("?o1", "shoes"), ("?o2", "user"),
                                 ("?x", "num"), ("?y", "num"),
                                 ("?r", "num"), ("?r_next", "num"))
        pre = action.precondition
        assert isinstance(pre, And) and len(pre.parts) == 6
        assert pre.parts[0] == Atom("turn-interactions")
        assert pre.parts[1] == Not(Atom("=", ("?o1", "?o2")))
        assert Atom("got-resource-shoes", ("?r",)) in pre.parts
        assert Atom("next", ("?r", "?r_next")) in pre.parts
        eff = action.effect
        assert len(eff.parts) == 4
        assert Atom("dead", ("?o1",)) in eff.parts
        assert Atom("got-resource-shoes", ("?r_next",)) in eff.parts

    def test_missing_binding_raises(self, kb):
        ts = kb.lookup("interaction", "collectResource")
        with pytest.raises(UnboundPlaceholderError):
            kb.instantiate(ts, {"S1": "shoes"})

    def test_rock_move_down(self, kb):
        ts = kb.lookup("sprite", "Missile", variant="DOWN")
        inst = kb.instantiate(ts, {"T": "rock"})
        move = next(a for a in inst.actions if a.name == "ROCK_MOVE_DOWN")
        pre_text = format_formula(move.precondition)
        assert "(oriented-down ?o)" in pre_text
        assert "(next ?y ?new_y)" in pre_text
        stop = next(a for a in inst.actions if a.name == "STOP_ROCK_MOVE")
        pre_text = format_formula(stop.precondition)
        assert "(forall (?o - rock) (or (dead ?o) (rock-moved ?o)))" in pre_text
        eff_text = format_formula(stop.effect)
        assert "(forall (?o - rock) (not (rock-moved ?o)))" in eff_text
        assert "(finished-turn-rock-move)" in eff_text

    def test_no_placeholder_tokens_survive(self, kb):
        for ts in kb.templates.values():
            binding = {p: f"xx{p.lower()}" for p in ts.placeholders}
            inst = kb.instantiate(ts, binding)
            rendered = " ".join(
                [format_formula(a.precondition) + format_formula(a.effect)
                 + a.name for a in inst.actions]
                + [p.name for p in inst.predicates]
                + [str(f) for f in inst.init_facts])
            assert not re.search(r"<[A-Z][A-Z0-9_]*>", rendered), ts.template_id

    def test_instantiation_injective_on_bindings(self, kb):
        ts = kb.lookup("interaction", "killSprite")
        names = set()
        for s1, s2 in [("a", "b"), ("a", "c"), ("b", "a"), ("c", "a")]:
            inst = kb.instantiate(ts, {"S1": s1, "S2": s2})
            for action in inst.actions:
                assert action.name not in names
                names.add(action.name)


class TestValidateKb:
    def test_all_checks_pass(self, kb):
        results = validate_kb(kb)
        failures = [r for r in results if r.status == "fail"]
        assert not failures, [(r.template_id, r.message) for r in failures]
        # every template with actions was actually checked
        checked = {r.template_id for r in results if r.status == "pass"}
        for template_id, ts in kb.templates.items():
            if ts.actions:
                assert template_id in checked

    def test_vacuous_templates_reported(self, kb):
        results = validate_kb(kb)
        vacuous = {r.template_id for r in results if r.status == "vacuous"}
        assert "sprite_immovable" in vacuous
        assert "sprite_passive" in vacuous

    def test_mutated_template_fails_its_check_only(self, kb, tmp_path):
        src = kb.directory
        broken_dir = tmp_path / "templates"
        broken_dir.mkdir()
        (broken_dir / "checks").mkdir()
        for p in src.glob("*.tmpl"):
            text = p.read_text()
            if p.name == "interaction_killsprite.tmpl":
                # flip the effect sign: the receiver no longer dies
                text = text.replace("(dead ?o1)", "(not (dead ?o1))", 1)
            (broken_dir / p.name).write_text(text)
        for p in (src / "checks").glob("*.yaml"):
            (broken_dir / "checks" / p.name).write_text(p.read_text())
        broken = KnowledgeBase(broken_dir)
        results = validate_kb(broken)
        by_id = {r.template_id: r.status for r in results}
        assert by_id["interaction_killsprite"] == "fail"
        assert by_id["interaction_killboth"] == "pass"

    def test_empty_kb_vacuous_with_warning(self, tmp_path):
        empty = tmp_path / "kb"
        empty.mkdir()
        results = validate_kb(KnowledgeBase(empty))
        assert len(results) == 1
        assert results[0].status == "vacuous"
