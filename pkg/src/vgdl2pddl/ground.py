"""Grounding of a typed PDDL pair into a propositional STRIPS task.

States are integer bit masks over an indexed set of dynamic ground atoms.
Grounded preconditions are a set of signed literals plus a (usually empty)
list of CNF clauses; clauses arise from universally quantified formulas such
as the STOP_<T>_MOVE closer, (forall (?o - b) (or (dead ?o) (b-moved ?o))),
and from the no-collision-left checks on END-TURN-INTERACTIONS.

Facts over static predicates (never added or deleted by any action, e.g.
is-wall, next) are evaluated at grounding time: actions with a statically
false precondition are dropped, literals that are statically true disappear.
The generated action set therefore equals the naive cross product filtered by
static preconditions, which is the contract the test-suite oracle checks.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional

from .errors import NotApplicableError, TypeMismatchError, UnsupportedConstructError
from .pddl import And, Atom, Domain, Forall, Formula, Not, Or, Problem, ROOT_TYPE

Literal = tuple[Atom, bool]  # (atom, is_positive)


@dataclass(frozen=True)
class GroundAction:
    name: str
    args: tuple[str, ...]
    pos_pre: int
    neg_pre: int
    clauses: tuple[tuple[int, int], ...]  # (positive mask, negative mask)
    add: int
    delete: int
    pre_literals: tuple[Literal, ...]  # dynamic literals, for monitoring
    clause_literals: tuple[tuple[Literal, ...], ...]

    @property
    def ident(self) -> tuple[str, tuple[str, ...]]:
        return (self.name, self.args)

    def __str__(self) -> str:
        if self.args:
            return f"({self.name} {' '.join(self.args)})"
        return f"({self.name})"


@dataclass
class GroundedTask:
    facts: tuple[Atom, ...]
    fact_id: dict[Atom, int]
    actions: tuple[GroundAction, ...]
    init: int
    goal_literals: tuple[Literal, ...]
    goal_pos: int
    goal_neg: int
    objects: dict[str, str]  # name -> type
    static_facts: frozenset[Atom]
    unsolvable_goal: bool  # a positive goal atom can never become true

    def action(self, name: str, args: tuple[str, ...]) -> Optional[GroundAction]:
        return self._index.get((name.upper(), args))

    def finalize(self) -> "GroundedTask":
        self._index = {(a.name.upper(), a.args): a for a in self.actions}
        return self

    def state_atoms(self, state: int) -> frozenset[Atom]:
        return frozenset(f for i, f in enumerate(self.facts) if state >> i & 1)

    def atoms_state(self, atoms: Iterable[Atom]) -> int:
        state = 0
        for a in atoms:
            i = self.fact_id.get(a)
            if i is not None:
                state |= 1 << i
        return state


# -- type universe --------------------------------------------------------------

def _build_universe(domain: Domain, problem: Problem) -> dict[str, list[str]]:
    parents = dict(domain.types)
    known = set(parents) | {ROOT_TYPE}
    for name, parent in domain.types:
        if parent is not None and parent not in known:
            raise TypeMismatchError(f"type {name!r} has undeclared parent {parent!r}")
    universe: dict[str, list[str]] = {t: [] for t in known}
    for obj, typ in tuple(domain.constants) + tuple(problem.objects):
        if typ not in known:
            raise TypeMismatchError(f"object {obj!r} has undeclared type {typ!r}")
        cur: Optional[str] = typ
        seen: set[str] = set()
        while cur is not None:
            if cur in seen:
                raise TypeMismatchError(f"type cycle at {cur!r}")
            seen.add(cur)
            universe[cur].append(obj)
            if cur == ROOT_TYPE:
                break
            cur = parents.get(cur)
    return universe


def _roots_at_object(parents: dict[str, Optional[str]], typ: str) -> bool:
    cur: Optional[str] = typ
    while cur is not None:
        if cur == ROOT_TYPE:
            return True
        cur = parents.get(cur)
    return False


# -- formula normalization -------------------------------------------------------

_TRUE = object()
_FALSE = object()


def _substitute(f: Formula, binding: dict[str, str]) -> Formula:
    if isinstance(f, Atom):
        return Atom(f.predicate, tuple(binding.get(a, a) for a in f.args))
    if isinstance(f, Not):
        return Not(_substitute(f.body, binding))
    if isinstance(f, And):
        return And(tuple(_substitute(p, binding) for p in f.parts))
    if isinstance(f, Or):
        return Or(tuple(_substitute(p, binding) for p in f.parts))
    if isinstance(f, Forall):
        inner = {k: v for k, v in binding.items()
                 if k not in {v0 for v0, _ in f.variables}}
        return Forall(f.variables, _substitute(f.body, inner))
    raise TypeError(f"not a formula: {f!r}")


def _expand_foralls(f: Formula, universe: dict[str, list[str]]) -> Formula:
    """Replace every forall with the conjunction over the typed universe."""
    if isinstance(f, Atom):
        return f
    if isinstance(f, Not):
        return Not(_expand_foralls(f.body, universe))
    if isinstance(f, And):
        return And(tuple(_expand_foralls(p, universe) for p in f.parts))
    if isinstance(f, Or):
        return Or(tuple(_expand_foralls(p, universe) for p in f.parts))
    if isinstance(f, Forall):
        domains = []
        for var, typ in f.variables:
            objs = universe.get(typ, [])
            domains.append([(var, o) for o in objs])
        parts = []
        for combo in itertools.product(*domains):
            binding = dict(combo)
            parts.append(_expand_foralls(_substitute(f.body, binding), universe))
        return And(tuple(parts))
    raise TypeError(f"not a formula: {f!r}")


def _nnf(f: Formula, negate: bool):
    """Negation normal form; equality atoms must already be evaluated."""
    if isinstance(f, Atom):
        return Not(f) if negate else f
    if isinstance(f, Not):
        return _nnf(f.body, not negate)
    if isinstance(f, And):
        parts = tuple(_nnf(p, negate) for p in f.parts)
        return Or(parts) if negate else And(parts)
    if isinstance(f, Or):
        parts = tuple(_nnf(p, negate) for p in f.parts)
        return And(parts) if negate else Or(parts)
    raise TypeError(f"unexpected formula in NNF: {f!r}")


_CNF_LIMIT = 256


def _cnf(f: Formula) -> list[list[Literal]]:
    """CNF of an NNF formula. Distribution is bounded; the compiler only
    produces tiny disjunctions so the limit is a safety net."""
    if isinstance(f, Atom):
        return [[(f, True)]]
    if isinstance(f, Not):
        assert isinstance(f.body, Atom)
        return [[(f.body, False)]]
    if isinstance(f, And):
        out: list[list[Literal]] = []
        for p in f.parts:
            out.extend(_cnf(p))
        return out
    if isinstance(f, Or):
        if not f.parts:
            return [[]]  # empty disjunction: false
        result = _cnf(f.parts[0])
        for p in f.parts[1:]:
            rhs = _cnf(p)
            if len(result) * len(rhs) > _CNF_LIMIT:
                raise UnsupportedConstructError(
                    "disjunctive precondition too large to normalize")
            result = [a + b for a in result for b in rhs]
        return result
    raise TypeError(f"unexpected formula in CNF: {f!r}")


def _eval_equalities(f: Formula) -> Formula:
    """Fold ground (= a b) atoms into true/false and simplify."""
    if isinstance(f, Atom):
        if f.predicate == "=":
            return _TRUE if f.args[0] == f.args[1] else _FALSE  # type: ignore
        return f
    if isinstance(f, Not):
        body = _eval_equalities(f.body)
        if body is _TRUE:
            return _FALSE  # type: ignore
        if body is _FALSE:
            return _TRUE  # type: ignore
        return Not(body)  # type: ignore[arg-type]
    if isinstance(f, And):
        parts = []
        for p in f.parts:
            q = _eval_equalities(p)
            if q is _FALSE:
                return _FALSE  # type: ignore
            if q is _TRUE:
                continue
            parts.append(q)
        return And(tuple(parts))
    if isinstance(f, Or):
        parts = []
        for p in f.parts:
            q = _eval_equalities(p)
            if q is _TRUE:
                return _TRUE  # type: ignore
            if q is _FALSE:
                continue
            parts.append(q)
        return Or(tuple(parts))
    raise TypeError(f"unexpected formula: {f!r}")


def normalize_ground(f: Formula, universe: dict[str, list[str]]
                     ) -> Optional[list[list[Literal]]]:
    """Ground formula -> CNF clause list, or None if statically false."""
    expanded = _expand_foralls(f, universe)
    folded = _eval_equalities(expanded)
    if folded is _TRUE:
        return []
    if folded is _FALSE:
        return None
    return _cnf(_nnf(folded, False))


# -- effects ---------------------------------------------------------------------

def _collect_effects(f: Formula, universe: dict[str, list[str]],
                     adds: set[Atom], dels: set[Atom]) -> None:
    expanded = _expand_foralls(f, universe)

    def walk(g: Formula):
        if isinstance(g, Atom):
            adds.add(g)
        elif isinstance(g, Not):
            if not isinstance(g.body, Atom):
                raise UnsupportedConstructError("effects must be literals")
            dels.add(g.body)
        elif isinstance(g, And):
            for p in g.parts:
                walk(p)
        else:
            raise UnsupportedConstructError(
                f"unsupported effect construct {type(g).__name__}")

    walk(expanded)


# -- schema grounding --------------------------------------------------------------

def _check_signature(domain: Domain, atom: Atom, types_of: dict[str, str],
                     parents_closure) -> None:
    if atom.predicate == "=":
        return
    try:
        pred = domain.predicate(atom.predicate)
    except KeyError:
        raise TypeMismatchError(f"undeclared predicate {atom.predicate!r}")
    if len(pred.params) != len(atom.args):
        raise TypeMismatchError(
            f"{atom.predicate} expects {len(pred.params)} args, got {len(atom.args)}")
    for arg, (_, declared) in zip(atom.args, pred.params):
        actual = types_of.get(arg)
        if actual is None:
            continue  # unbound variable or unknown constant checked elsewhere
        if declared not in parents_closure(actual):
            raise TypeMismatchError(
                f"{atom.predicate}: {arg} has type {actual}, needs {declared}")


def _static_predicates(domain: Domain) -> frozenset[str]:
    mutable: set[str] = set()

    def walk(g: Formula):
        if isinstance(g, Atom):
            mutable.add(g.predicate)
        elif isinstance(g, Not):
            walk(g.body)
        elif isinstance(g, (And, Or)):
            for p in g.parts:
                walk(p)
        elif isinstance(g, Forall):
            walk(g.body)

    for action in domain.actions:
        walk(action.effect)
    return frozenset(p.name for p in domain.predicates) - frozenset(mutable)


def _split_conjuncts(f: Formula) -> list[Formula]:
    if isinstance(f, And):
        out = []
        for p in f.parts:
            out.extend(_split_conjuncts(p))
        return out
    return [f]


class _SchemaGrounder:
    """Backtracking enumeration of one action schema's bindings.

    Static positive atoms both filter candidates (when one argument is left
    unbound, the static fact table supplies its candidates) and reject
    partial bindings early.
    """

    def __init__(self, task_statics: dict[str, list[tuple[str, ...]]],
                 static_preds: frozenset[str]):
        self.static_table = task_statics
        self.static_preds = static_preds

    def bindings(self, params: tuple[tuple[str, str], ...],
                 universe: dict[str, list[str]],
                 conjuncts: list[Formula]):
        static_atoms: list[Atom] = []
        neq: list[tuple[str, str]] = []
        for c in conjuncts:
            if isinstance(c, Atom) and c.predicate in self.static_preds:
                static_atoms.append(c)
            elif (isinstance(c, Not) and isinstance(c.body, Atom)
                  and c.body.predicate == "="):
                neq.append((c.body.args[0], c.body.args[1]))

        order = [v for v, _ in params]
        types = dict(params)
        binding: dict[str, str] = {}
        out: list[dict[str, str]] = []

        def consistent() -> bool:
            for a, b in neq:
                va, vb = binding.get(a, a), binding.get(b, b)
                if va.startswith("?") or vb.startswith("?"):
                    continue  # not fully bound yet
                if va == vb:
                    return False
            for atom in static_atoms:
                args = [binding.get(a, a) for a in atom.args]
                if any(a.startswith("?") for a in args):
                    continue
                if tuple(args) not in self.static_table.get(atom.predicate, ()):
                    return False
            return True

        def candidates(var: str) -> list[str]:
            base = universe.get(types[var], [])
            best: Optional[list[str]] = None
            for atom in static_atoms:
                if var not in atom.args:
                    continue
                args = [binding.get(a, a) for a in atom.args]
                if sum(a.startswith("?") for a in args) != 1:
                    continue
                pos = args.index(var)
                opts = []
                for row in self.static_table.get(atom.predicate, ()):
                    if all(a.startswith("?") or a == r for a, r in zip(args, row)):
                        opts.append(row[pos])
                if best is None or len(opts) < len(best):
                    best = opts
            if best is None:
                return list(base)
            allowed = set(universe.get(types[var], []))
            return [o for o in dict.fromkeys(best) if o in allowed]

        def search(i: int):
            if i == len(order):
                out.append(dict(binding))
                return
            var = order[i]
            for value in candidates(var):
                binding[var] = value
                if consistent():
                    search(i + 1)
                del binding[var]

        search(0)
        return out


def ground(domain: Domain, problem: Problem) -> GroundedTask:
    universe = _build_universe(domain, problem)
    parents = dict(domain.types)

    def closure(typ: str) -> set[str]:
        out = {typ}
        cur: Optional[str] = typ
        while cur in parents and parents[cur] is not None:
            cur = parents[cur]
            out.add(cur)
        if _roots_at_object(parents, typ):
            out.add(ROOT_TYPE)
        return out

    types_of = {name: typ for name, typ in
                tuple(domain.constants) + tuple(problem.objects)}

    static_preds = _static_predicates(domain)

    # init facts, type-checked and split static/dynamic
    static_table: dict[str, list[tuple[str, ...]]] = {}
    init_dynamic: set[Atom] = set()
    static_facts: set[Atom] = set()
    for atom in problem.init:
        _check_signature(domain, atom, types_of, closure)
        if atom.predicate in static_preds:
            static_table.setdefault(atom.predicate, []).append(atom.args)
            static_facts.add(atom)
        else:
            init_dynamic.add(atom)

    grounder = _SchemaGrounder(static_table, static_preds)

    raw_actions: list[tuple[str, tuple[str, ...], list[list[Literal]],
                            set[Atom], set[Atom]]] = []
    for schema in domain.actions:
        conjuncts = _split_conjuncts(schema.precondition)
        for atom in _atoms_in(schema.precondition):
            _check_signature(domain, atom, dict(schema.params) | types_of, closure)
        for atom in _atoms_in(schema.effect):
            _check_signature(domain, atom, dict(schema.params) | types_of, closure)
        for binding in grounder.bindings(schema.params, universe, conjuncts):
            pre = _substitute(schema.precondition, binding)
            cnf = normalize_ground(pre, universe)
            if cnf is None:
                continue
            # evaluate static literals now
            clauses: list[list[Literal]] = []
            impossible = False
            for clause in cnf:
                kept: list[Literal] = []
                sat = False
                for atom, positive in clause:
                    if atom.predicate in static_preds:
                        holds = atom in static_facts
                        if holds == positive:
                            sat = True
                            break
                    else:
                        kept.append((atom, positive))
                if sat:
                    continue
                if not kept:
                    impossible = True
                    break
                clauses.append(kept)
            if impossible:
                continue
            adds: set[Atom] = set()
            dels: set[Atom] = set()
            eff = _substitute(schema.effect, binding)
            _collect_effects(eff, universe, adds, dels)
            both = adds & dels
            if both:
                raise TypeMismatchError(
                    f"action {schema.name} adds and deletes {sorted(map(str, both))}")
            args = tuple(binding[v] for v, _ in schema.params)
            raw_actions.append((schema.name, args, clauses, adds, dels))

    # fact index over dynamic atoms
    fact_set: set[Atom] = set(init_dynamic)
    for _, _, clauses, adds, dels in raw_actions:
        for clause in clauses:
            fact_set.update(a for a, _ in clause)
        fact_set.update(adds)
        fact_set.update(dels)

    # goal
    goal_cnf = normalize_ground(problem.goal, universe)
    if goal_cnf is None:
        goal_literals: tuple[Literal, ...] = ((Atom("=", ("a", "b")), True),)
        unsolvable = True
    else:
        goal_lits: list[Literal] = []
        unsolvable = False
        for clause in goal_cnf:
            if len(clause) != 1:
                raise UnsupportedConstructError(
                    "goal must be a conjunction of literals")
            goal_lits.append(clause[0])
        goal_literals = tuple(goal_lits)
        for atom, positive in goal_literals:
            if atom.predicate in static_preds:
                if (atom in static_facts) != positive:
                    unsolvable = True
            else:
                fact_set.update({atom})

    facts = tuple(sorted(fact_set, key=str))
    fact_id = {f: i for i, f in enumerate(facts)}

    def mask(atoms: Iterable[Atom]) -> int:
        m = 0
        for a in atoms:
            m |= 1 << fact_id[a]
        return m

    actions = []
    for name, args, clauses, adds, dels in raw_actions:
        pos_atoms: list[Atom] = []
        neg_atoms: list[Atom] = []
        multi: list[list[Literal]] = []
        for clause in clauses:
            if len(clause) == 1:
                atom, positive = clause[0]
                (pos_atoms if positive else neg_atoms).append(atom)
            else:
                multi.append(clause)
        actions.append(GroundAction(
            name=name,
            args=args,
            pos_pre=mask(pos_atoms),
            neg_pre=mask(neg_atoms),
            clauses=tuple((mask(a for a, p in cl if p),
                           mask(a for a, p in cl if not p)) for cl in multi),
            add=mask(adds),
            delete=mask(dels),
            pre_literals=tuple([(a, True) for a in pos_atoms]
                               + [(a, False) for a in neg_atoms]),
            clause_literals=tuple(tuple(cl) for cl in multi),
        ))

    goal_pos = 0
    goal_neg = 0
    for atom, positive in goal_literals:
        i = fact_id.get(atom)
        if i is None:
            continue
        if positive:
            goal_pos |= 1 << i
        else:
            goal_neg |= 1 << i

    task = GroundedTask(
        facts=facts,
        fact_id=fact_id,
        actions=tuple(actions),
        init=mask(init_dynamic),
        goal_literals=goal_literals,
        goal_pos=goal_pos,
        goal_neg=goal_neg,
        objects=types_of,
        static_facts=frozenset(static_facts),
        unsolvable_goal=unsolvable,
    )
    return task.finalize()


def _atoms_in(f: Formula):
    if isinstance(f, Atom):
        yield f
    elif isinstance(f, Not):
        yield from _atoms_in(f.body)
    elif isinstance(f, (And, Or)):
        for p in f.parts:
            yield from _atoms_in(p)
    elif isinstance(f, Forall):
        yield from _atoms_in(f.body)


# public names for the pieces the execution monitor reuses
build_universe = _build_universe
substitute = _substitute


# -- STRIPS semantics -------------------------------------------------------------

def applicable(state: int, action: GroundAction) -> bool:
    if state & action.pos_pre != action.pos_pre:
        return False
    if state & action.neg_pre:
        return False
    for pos_mask, neg_mask in action.clauses:
        if state & pos_mask:
            continue
        if neg_mask & ~state:
            continue
        return False
    return True


def apply(state: int, action: GroundAction) -> int:
    if not applicable(state, action):
        raise NotApplicableError(f"{action} is not applicable")
    return (state & ~action.delete) | action.add


def goal_satisfied(task: GroundedTask, state: int) -> bool:
    if task.unsolvable_goal:
        return False
    return (state & task.goal_pos == task.goal_pos
            and not state & task.goal_neg)


# -- relaxed-reachability simplification (used by the search) ----------------------

def simplify(task: GroundedTask) -> GroundedTask:
    """Drop actions and clause literals that relaxed reachability rules out.

    Sound for search: a pruned action has a positive precondition that can
    never become true, a pruned clause is permanently satisfied by a negative
    literal whose atom can never become true.
    """
    def optimistic(a: GroundAction, reachable: int) -> bool:
        if a.pos_pre & ~reachable:
            return False
        for pos_mask, neg_mask in a.clauses:
            # negative literals are optimistically satisfiable; a clause of
            # only positives needs at least one reachable atom
            if neg_mask == 0 and not pos_mask & reachable:
                return False
        return True

    reachable = task.init
    while True:
        new_reachable = reachable
        for a in task.actions:
            if optimistic(a, reachable):
                new_reachable |= a.add
        if new_reachable == reachable:
            break
        reachable = new_reachable

    ever_true = reachable
    kept = [a for a in task.actions if optimistic(a, ever_true)]
    simplified = []
    for a in kept:
        new_clauses = []
        new_clause_lits = []
        dead = False
        for (pos_mask, neg_mask), lits in zip(a.clauses, a.clause_literals):
            # a negative literal over a never-true fact satisfies the clause
            if neg_mask & ~ever_true:
                continue
            pos_mask &= ever_true
            if pos_mask == 0 and neg_mask == 0:
                dead = True
                break
            new_clauses.append((pos_mask, neg_mask))
            new_clause_lits.append(lits)
        if dead:
            continue
        simplified.append(GroundAction(
            name=a.name, args=a.args, pos_pre=a.pos_pre, neg_pre=a.neg_pre,
            clauses=tuple(new_clauses), add=a.add, delete=a.delete,
            pre_literals=a.pre_literals,
            clause_literals=tuple(new_clause_lits),
        ))
    out = GroundedTask(
        facts=task.facts, fact_id=task.fact_id, actions=tuple(simplified),
        init=task.init, goal_literals=task.goal_literals,
        goal_pos=task.goal_pos, goal_neg=task.goal_neg, objects=task.objects,
        static_facts=task.static_facts,
        unsolvable_goal=task.unsolvable_goal or bool(task.goal_pos & ~ever_true),
    )
    return out.finalize()
