"""Knowledge base of game-independent PDDL templates.

Templates live as data files (one per template) so new constructs can be added
without touching the compiler.  A file has three header lines and a body of
PDDL fragments:

    id: interaction_killsprite
    kind: Interaction
    placeholders: S1 S2
    ---
    (:action <S1>_<S2>_KILLSPRITE ...)

Placeholders are written ``<NAME>`` and replaced textually; action-name heads
are uppercased after substitution (SHOES_USER_COLLECTRESOURCE style), all
other identifiers stay lowercase.  Each template with behaviour ships with a
micro domain/problem check (templates/checks/<id>.yaml) executed by
``validate_kb``: the instantiated action is grounded, applied to the check's
initial state, and the state diff compared with the hand-checked expectation.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import yaml

from .errors import (
    TemplateFormatError,
    UnboundPlaceholderError,
    UnknownTemplateError,
)
from . import ground as G
from . import pddl
from .pddl import Action, Atom, Domain, Predicate, Problem

_PLACEHOLDER_RE = re.compile(r"<([A-Z][A-Z0-9_]*)>")

KIND_SPRITE = "SpriteBehaviour"
KIND_AVATAR = "AvatarAction"
KIND_INTERACTION = "Interaction"
KIND_TURN = "TurnControl"

_KINDS = {KIND_SPRITE, KIND_AVATAR, KIND_INTERACTION, KIND_TURN}


@dataclass(frozen=True)
class TemplateSet:
    """One template file: fragments still carrying ``<NAME>`` holes."""

    template_id: str
    kind: str
    placeholders: frozenset[str]
    predicates: tuple[str, ...]
    actions: tuple[str, ...]
    init_facts: tuple[str, ...]

    def used_placeholders(self) -> frozenset[str]:
        text = "\n".join(self.predicates + self.actions + self.init_facts)
        return frozenset(_PLACEHOLDER_RE.findall(text))


@dataclass(frozen=True)
class Instantiated:
    predicates: tuple[Predicate, ...]
    actions: tuple[Action, ...]
    init_facts: tuple[Atom, ...]


def _split_fragments(body: str) -> list[str]:
    """Split a body into top-level parenthesized fragments, dropping comments."""
    text = "\n".join(raw.split(";")[0] for raw in body.split("\n"))
    fragments = []
    depth = 0
    start = None
    for i, ch in enumerate(text):
        if ch == "(":
            if depth == 0:
                start = i
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth == 0 and start is not None:
                fragments.append(text[start:i + 1])
                start = None
    if depth != 0:
        raise TemplateFormatError("unbalanced parentheses in template body")
    return fragments


def _parse_template(text: str, source: str) -> TemplateSet:
    if "---" not in text:
        raise TemplateFormatError(f"{source}: missing '---' separator")
    header, body = text.split("---", 1)
    fields = {}
    for line in header.splitlines():
        if not line.strip():
            continue
        if ":" not in line:
            raise TemplateFormatError(f"{source}: bad header line {line!r}")
        key, value = line.split(":", 1)
        fields[key.strip()] = value.strip()
    for required in ("id", "kind"):
        if required not in fields:
            raise TemplateFormatError(f"{source}: missing header {required!r}")
    if fields["kind"] not in _KINDS:
        raise TemplateFormatError(f"{source}: unknown kind {fields['kind']!r}")
    placeholders = frozenset(fields.get("placeholders", "").split())

    predicates: list[str] = []
    actions: list[str] = []
    init_facts: list[str] = []
    for fragment in _split_fragments(body):
        head = fragment[1:].split(None, 1)[0] if fragment[1:].split() else ""
        if head == ":predicates":
            inner = fragment[len("(:predicates"):-1]
            predicates.extend(_split_fragments(inner))
        elif head == ":action":
            actions.append(fragment)
        elif head == ":init":
            inner = fragment[len("(:init"):-1]
            init_facts.extend(_split_fragments(inner))
        else:
            raise TemplateFormatError(f"{source}: unexpected fragment {head!r}")
    ts = TemplateSet(
        template_id=fields["id"],
        kind=fields["kind"],
        placeholders=placeholders,
        predicates=tuple(predicates),
        actions=tuple(actions),
        init_facts=tuple(init_facts),
    )
    undeclared = ts.used_placeholders() - placeholders
    if undeclared:
        raise TemplateFormatError(
            f"{source}: undeclared placeholders {sorted(undeclared)}")
    return ts


def default_template_dir() -> Path:
    return Path(resources.files("vgdl2pddl")) / "templates"


class KnowledgeBase:
    """All templates from one directory, addressed by (kind, key[, variant])."""

    def __init__(self, directory: Optional[Path] = None):
        self.directory = Path(directory) if directory else default_template_dir()
        self.templates: dict[str, TemplateSet] = {}
        for path in sorted(self.directory.glob("*.tmpl")):
            ts = _parse_template(path.read_text(), str(path))
            if ts.template_id in self.templates:
                raise TemplateFormatError(f"duplicate template id {ts.template_id}")
            self.templates[ts.template_id] = ts

    def lookup(self, section: str, key: str,
               variant: Optional[str] = None) -> TemplateSet:
        """section is one of sprite/avatar/interaction/turn; key names the
        VGDL type or interaction kind; variant selects e.g. an orientation."""
        name = f"{section.lower()}_{key.lower()}"
        if variant:
            name += f"_{variant.lower()}"
        ts = self.templates.get(name)
        if ts is None:
            raise UnknownTemplateError(f"no template {name!r} in {self.directory}")
        return ts

    def instantiate(self, ts: TemplateSet,
                    binding: dict[str, str]) -> Instantiated:
        missing = ts.placeholders - set(binding)
        if missing:
            raise UnboundPlaceholderError(
                f"{ts.template_id}: unbound placeholders {sorted(missing)}")

        def sub(text: str) -> str:
            out = text
            for name, value in binding.items():
                out = out.replace(f"<{name}>", value)
            leftover = _PLACEHOLDER_RE.search(out)
            if leftover:
                raise UnboundPlaceholderError(
                    f"{ts.template_id}: placeholder {leftover.group(0)} survives")
            return out

        predicates = [pddl.parse_fragment_predicate(sub(f)) for f in ts.predicates]
        actions = []
        for frag in ts.actions:
            action = pddl.parse_fragment_action(sub(frag))
            actions.append(Action(action.name.upper(), action.params,
                                  action.precondition, action.effect))
        init_facts = [pddl.parse_fragment_atom(sub(f)) for f in ts.init_facts]
        return Instantiated(tuple(predicates), tuple(actions), tuple(init_facts))


# -- per-template micro checks ---------------------------------------------------

@dataclass
class CheckResult:
    template_id: str
    status: str  # "pass" | "fail" | "vacuous"
    message: str = ""


def _micro_domain(kb: KnowledgeBase, check: dict) -> tuple[Domain, Problem]:
    core = kb.instantiate(kb.lookup("turn", "core"), {})
    predicates = list(core.predicates)
    actions: list[Action] = []
    seen = {p.name for p in predicates}
    inst_list = [(check["template"], check.get("binding", {}))]
    for extra in check.get("extra_templates", []):
        inst_list.append((extra["id"], extra.get("binding", {})))
    for template_id, binding in inst_list:
        ts = kb.templates.get(template_id)
        if ts is None:
            raise UnknownTemplateError(template_id)
        inst = kb.instantiate(ts, {k: str(v) for k, v in binding.items()})
        for p in inst.predicates:
            if p.name not in seen:
                predicates.append(p)
                seen.add(p.name)
        actions.extend(inst.actions)
    types = tuple(check.get("types", {}).items())
    if "num" not in check.get("types", {}):
        types += (("num", None),)
    domain = Domain(
        name=f"check-{check['template']}",
        requirements=(":strips", ":typing"),
        types=types,
        predicates=tuple(predicates),
        actions=tuple(actions),
    )
    objects = tuple((name, typ) for name, typ in check["objects"].items())
    init = tuple(pddl.parse_fragment_atom(f) for f in check.get("init", []))
    problem = Problem(
        name="check", domain=domain.name, objects=objects, init=init,
        goal=pddl.And(()),
    )
    return domain, problem


def run_check(kb: KnowledgeBase, check: dict) -> CheckResult:
    template_id = check["template"]
    domain, problem = _micro_domain(kb, check)
    task = G.ground(domain, problem)
    step = check["action"].strip()[1:-1].split()
    action = task.action(step[0], tuple(step[1:]))
    if action is None:
        return CheckResult(template_id, "fail",
                           f"action {check['action']} was not grounded")
    if not G.applicable(task.init, action):
        return CheckResult(template_id, "fail",
                           f"action {check['action']} not applicable in init")
    after = G.apply(task.init, action)
    added = task.state_atoms(after) - task.state_atoms(task.init)
    deleted = task.state_atoms(task.init) - task.state_atoms(after)
    expect_added = {pddl.parse_fragment_atom(f)
                    for f in check.get("expect_added", [])}
    expect_deleted = {pddl.parse_fragment_atom(f)
                      for f in check.get("expect_deleted", [])}
    if added != expect_added or deleted != expect_deleted:
        return CheckResult(
            template_id, "fail",
            f"state diff mismatch: +{sorted(map(str, added))} "
            f"-{sorted(map(str, deleted))}, expected "
            f"+{sorted(map(str, expect_added))} -{sorted(map(str, expect_deleted))}")
    return CheckResult(template_id, "pass")


def validate_kb(kb: KnowledgeBase,
                checks_dir: Optional[Path] = None) -> list[CheckResult]:
    """Run every template's micro check; templates without behaviour and
    without a check file report vacuous passes."""
    checks_dir = Path(checks_dir) if checks_dir else kb.directory / "checks"
    results: list[CheckResult] = []
    checked: set[str] = set()
    if checks_dir.is_dir():
        for path in sorted(checks_dir.glob("*.yaml")):
            check = yaml.safe_load(path.read_text())
            check_id = check["template"]
            checked.add(check_id)
            try:
                results.append(run_check(kb, check))
            except Exception as exc:  # noqa: BLE001 - reported, not raised
                results.append(CheckResult(check_id, "fail", repr(exc)))
    for template_id, ts in sorted(kb.templates.items()):
        if template_id in checked:
            continue
        if ts.actions:
            results.append(CheckResult(template_id, "fail",
                                       "template has actions but no check file"))
        else:
            results.append(CheckResult(template_id, "vacuous",
                                       "no behaviour to check"))
    if not results:
        results.append(CheckResult("(empty)", "vacuous", "knowledge base is empty"))
    return results
