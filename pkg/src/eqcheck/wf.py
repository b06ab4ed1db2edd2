"""Soundness preconditions: exhaustive patterns (totality) and structural or
metric-based termination for every function."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .syntax import (
    App, Con, FreshNames, IntLit, PAtom, PBool, PCon, PInt, PVar, PWild,
    Pattern, Pred, Span, Term, Var, body_terms, pattern_term, pattern_vars,
    substitute,
)
from .types import (
    FunInfo, Sort, SortBool, SortData, SortInt, TypeEnv, pattern_binder_sorts,
)


# ------------------------------------------------------- pattern matrices

@dataclass(frozen=True)
class _PNotIn(Pattern):
    """Internal: an integer position known to avoid a finite literal set."""
    excluded: tuple[int, ...] = ()


Row = tuple[Pattern, ...]


def _is_wild(p: Pattern) -> bool:
    return isinstance(p, (PVar, PWild))


def _field_sorts(ctor_name: str, at: Sort, env: TypeEnv) -> tuple[Sort, ...]:
    from .types import sort_of_typeexpr
    ci = env.ctors[ctor_name]
    di = env.datas[ci.data_name]
    mapping: dict[str, Sort] = {}
    if isinstance(at, SortData) and at.name == di.name:
        mapping = dict(zip(di.params, at.args))

    def subst(s: Sort) -> Sort:
        from .types import SortVar
        if isinstance(s, SortVar):
            return mapping.get(s.name, s)
        if isinstance(s, SortData):
            return SortData(s.name, tuple(subst(a) for a in s.args))
        return s

    return tuple(subst(sort_of_typeexpr(f, env, set(di.params))) for f in ci.fields)


def uncovered(rows: list[Row], sorts: tuple[Sort, ...], env: TypeEnv) -> list[Row]:
    """A disjoint set of pattern rows covering exactly the inputs no row of
    the matrix matches."""
    if not sorts:
        return [] if rows else [()]
    if not rows:
        return [tuple(PWild() for _ in sorts)]
    col = [r[0] for r in rows]
    rest_sorts = sorts[1:]
    if all(_is_wild(p) for p in col):
        return [(PWild(), *u) for u in uncovered([r[1:] for r in rows], rest_sorts, env)]

    s0 = sorts[0]
    out: list[Row] = []
    if isinstance(s0, SortData):
        for ci in env.datas[s0.name].ctors:
            fsorts = _field_sorts(ci.name, s0, env)
            sub_rows: list[Row] = []
            for r in rows:
                p = r[0]
                if _is_wild(p):
                    sub_rows.append((*(PWild() for _ in fsorts), *r[1:]))
                elif isinstance(p, PCon) and p.name == ci.name:
                    sub_rows.append((*p.args, *r[1:]))
            for u in uncovered(sub_rows, (*fsorts, *rest_sorts), env):
                k = len(fsorts)
                out.append((PCon(ci.name, u[:k]), *u[k:]))
        return out
    if isinstance(s0, SortBool):
        for b in (False, True):
            sub_rows = [r[1:] for r in rows
                        if _is_wild(r[0]) or (isinstance(r[0], PBool) and r[0].value == b)]
            for u in uncovered(sub_rows, rest_sorts, env):
                out.append((PBool(b), *u))
        return out
    if isinstance(s0, SortInt):
        lits = sorted({p.value for p in col if isinstance(p, PInt)})
        for k in lits:
            sub_rows = [r[1:] for r in rows
                        if _is_wild(r[0]) or (isinstance(r[0], PInt) and r[0].value == k)]
            for u in uncovered(sub_rows, rest_sorts, env):
                out.append((PInt(k), *u))
        sub_rows = [r[1:] for r in rows if _is_wild(r[0])]
        for u in uncovered(sub_rows, rest_sorts, env):
            out.append((_PNotIn(tuple(lits)), *u))
        return out
    # abstract sorts (type variables, Proof): only wildcards can match
    sub_rows = [r[1:] for r in rows if _is_wild(r[0])]
    return [(PWild(), *u) for u in uncovered(sub_rows, rest_sorts, env)]


def missing_pattern_text(row: Row) -> str:
    """Render a witness row plainly (constructors spelled out, no sugar)."""
    def render(p: Pattern, atom: bool) -> str:
        if isinstance(p, PVar):
            return p.name
        if isinstance(p, PWild):
            return "_"
        if isinstance(p, PInt):
            return str(p.value)
        if isinstance(p, PBool):
            return "true" if p.value else "false"
        if isinstance(p, _PNotIn):
            k = 0
            while k in p.excluded:
                k += 1
            return str(k)
        assert isinstance(p, PCon)
        if not p.args:
            return p.name
        s = p.name + " " + " ".join(render(a, True) for a in p.args)
        return f"({s})" if atom else s

    return " ".join(render(p, len(row) > 1) for p in row)


def check_totality(fi: FunInfo, env: TypeEnv) -> list[Row]:
    """Empty list iff the clause patterns are exhaustive; otherwise a minimal
    set of uncovered witness rows."""
    rows = [c.patterns for c in fi.clauses]
    return uncovered(rows, fi.param_sorts, env)


# ------------------------------------------------------------ clause leaves

@dataclass
class Leaf:
    """One reachable specialisation of a clause under first-match semantics:
    the refined pattern row (every position named), extra bindings for clause
    variables the refinement constrained, and literal exclusions."""
    index: int
    row: Row
    var_bindings: tuple[tuple[str, Term], ...]
    excluded_ints: tuple[tuple[str, tuple[int, ...]], ...]


def _name_wilds(p: Pattern, fresh: FreshNames) -> Pattern:
    if isinstance(p, PWild):
        return PVar(fresh.take("_w"))
    if isinstance(p, _PNotIn):
        return p
    if isinstance(p, PCon):
        return PCon(p.name, tuple(_name_wilds(a, fresh) for a in p.args), span=p.span)
    return p


def _intersect(p: Pattern, q: Pattern, fresh: FreshNames,
               bindings: list[tuple[str, Pattern]],
               excludes: list[tuple[str, tuple[int, ...]]]) -> Optional[Pattern]:
    """Intersection of a clause pattern p with an uncovered-space pattern q.
    Variable names from p survive; refinements of p's variables are recorded."""
    if isinstance(q, (PWild,)):
        return _name_wilds(p, fresh)
    if isinstance(q, _PNotIn):
        if isinstance(p, PInt):
            return p if p.value not in q.excluded else None
        named = _name_wilds(p, fresh)
        assert isinstance(named, PVar)
        if q.excluded:
            excludes.append((named.name, q.excluded))
        return named
    if _is_wild(p):
        merged = _name_wilds(q, fresh)
        if isinstance(p, PVar):
            if isinstance(merged, PVar):
                return PVar(p.name)
            bindings.append((p.name, merged))
        return merged
    if isinstance(p, PCon) and isinstance(q, PCon):
        if p.name != q.name:
            return None
        args = []
        for a, b in zip(p.args, q.args):
            m = _intersect(a, b, fresh, bindings, excludes)
            if m is None:
                return None
            args.append(m)
        return PCon(p.name, tuple(args), span=p.span)
    if isinstance(p, PInt) and isinstance(q, PInt):
        return p if p.value == q.value else None
    if isinstance(p, PBool) and isinstance(q, PBool):
        return p if p.value == q.value else None
    return None


def clause_leaves(fi: FunInfo, clause_index: int, env: TypeEnv) -> list[Leaf]:
    """The reachable specialisations of clause `clause_index`: its own pattern
    row minus everything earlier clauses already match."""
    rows = [c.patterns for c in fi.clauses]
    space = uncovered(rows[:clause_index], fi.param_sorts, env)
    clause_row = rows[clause_index]
    taken = set()
    for pat in clause_row:
        taken.update(pattern_vars(pat))
    leaves: list[Leaf] = []
    for u in space:
        fresh = FreshNames(set(taken))
        bindings: list[tuple[str, Pattern]] = []
        excludes: list[tuple[str, tuple[int, ...]]] = []
        merged: list[Pattern] = []
        ok = True
        for p, q in zip(clause_row, u):
            m = _intersect(p, q, fresh, bindings, excludes)
            if m is None:
                ok = False
                break
            merged.append(m)
        if not ok:
            continue
        fresh2 = FreshNames(set())  # names already fixed; pattern_term sees no wilds
        leaves.append(Leaf(
            index=len(leaves),
            row=tuple(merged),
            var_bindings=tuple((x, pattern_term(b, fresh2)) for x, b in bindings),
            excluded_ints=tuple(excludes),
        ))
    return leaves


def leaf_var_sorts(fi: FunInfo, leaf: Leaf, env: TypeEnv) -> dict[str, Sort]:
    out: dict[str, Sort] = {}
    for pat, sort in zip(leaf.row, fi.param_sorts):
        out.update(pattern_binder_sorts(pat, sort, env))
    return out


def leaf_facts(fi: FunInfo, leaf: Leaf) -> list[Pred]:
    """Pattern equalities binding the argument constants (named after the
    signature binders) to the leaf's pattern terms, plus leaf refinements."""
    facts: list[Pred] = []
    fresh = FreshNames(set())
    for (binder, _), pat in zip(fi.signature.params, leaf.row):
        facts.append(PAtom("==", Var(binder), pattern_term(pat, fresh)))
    for x, t in leaf.var_bindings:
        facts.append(PAtom("==", Var(x), t))
    for x, excluded in leaf.excluded_ints:
        for k in excluded:
            facts.append(PAtom("/=", Var(x), IntLit(k)))
    return facts


# ------------------------------------------------------------- termination

@dataclass(frozen=True)
class TerminationEvidence:
    kind: str  # 'structural' | 'semantic'
    positions: tuple[int, ...] = ()
    metric: tuple[Term, ...] = ()
    guessed: bool = False


@dataclass(frozen=True)
class NonTermination:
    span: Span
    reason: str


# An entailment service: (facts, goal, var_sorts, active_terms) -> bool.
EntailService = Callable[[list[Pred], Pred, dict[str, Sort], list[Term]], bool]


def _self_calls(fi: FunInfo) -> list[tuple[int, App]]:
    """(clause index, application) for every recursive call, hints included."""
    from .syntax import subterms
    out: list[tuple[int, App]] = []
    for ci, clause in enumerate(fi.clauses):
        for t in body_terms(clause.body):
            for sub in subterms(t):
                if isinstance(sub, App) and sub.name == fi.name:
                    out.append((ci, sub))
    return out


def _strict_subvars(pat: Pattern) -> set[str]:
    if isinstance(pat, PCon):
        out: set[str] = set()
        for sub in pat.args:
            out.update(pattern_vars(sub))
        return out
    return set()


def _pattern_equals_term(pat: Pattern, t: Term) -> bool:
    if isinstance(pat, PVar):
        return isinstance(t, Var) and t.name == pat.name
    if isinstance(pat, PInt):
        return isinstance(t, IntLit) and t.value == pat.value
    if isinstance(pat, PCon):
        return (isinstance(t, Con) and t.name == pat.name
                and all(_pattern_equals_term(p, a) for p, a in zip(pat.args, t.args)))
    return False


def _structural(fi: FunInfo, calls: list[tuple[int, App]]) -> Optional[tuple[int, ...]]:
    """Search for a lexicographic argument ordering under the sub-pattern
    order: at each call the chosen argument shrinks strictly while every
    earlier chosen argument is passed through unchanged."""
    STRICT, EQUAL, OTHER = 0, 1, 2

    def status(ci: int, call: App, pos: int) -> int:
        pat = fi.clauses[ci].patterns[pos]
        arg = call.args[pos]
        if isinstance(arg, Var) and arg.name in _strict_subvars(pat):
            return STRICT
        if _pattern_equals_term(pat, arg):
            return EQUAL
        return OTHER

    def search(remaining: list[tuple[int, App]], positions: list[int],
               used: tuple[int, ...]) -> Optional[tuple[int, ...]]:
        if not remaining:
            return used
        for p in positions:
            stats = [status(ci, call, p) for ci, call in remaining]
            if any(s == OTHER for s in stats):
                continue
            if all(s == EQUAL for s in stats):
                continue  # p alone makes no progress; try it later in the order
            still = [rc for rc, s in zip(remaining, stats) if s == EQUAL]
            found = search(still, [q for q in positions if q != p], (*used, p))
            if found is not None:
                return found
        return None

    return search(calls, list(range(fi.arity)), ())


def _guess_metric(fi: FunInfo, env: TypeEnv) -> list[tuple[Term, ...]]:
    """Candidate metrics for the first Int-or-measurable argument."""
    for (binder, _), sort in zip(fi.signature.params, fi.param_sorts):
        if isinstance(sort, SortInt):
            return [(Var(binder),)]
        if isinstance(sort, SortData):
            measures = env.measures_of.get(sort.name, [])
            if measures:
                return [(App(m, (Var(binder),)),) for m in measures]
    return []


def _refinement_facts_for_metric(terms: list[Term], fi: FunInfo, env: TypeEnv) -> list[Pred]:
    from .syntax import subterms, substitute_pred
    facts: list[Pred] = []
    for t in terms:
        for sub in subterms(t):
            if not isinstance(sub, App) or sub.name == fi.name:
                continue
            gi = env.funs[sub.name]
            res = gi.signature.result
            if not res.refined:
                continue
            mapping = {b: a for (b, _), a in zip(gi.signature.params, sub.args)}
            mapping[res.binder] = sub
            facts.append(substitute_pred(res.pred, mapping))
    return facts


def _check_metric(fi: FunInfo, metric: tuple[Term, ...], env: TypeEnv,
                  entail: EntailService) -> Optional[NonTermination]:
    from .syntax import PAnd, POr, substitute_pred
    binders = fi.signature.binders()
    calls = _self_calls(fi)
    for ci, clause in enumerate(fi.clauses):
        clause_calls = [call for cj, call in calls if cj == ci]
        if not clause_calls:
            continue
        for leaf in clause_leaves(fi, ci, env):
            var_sorts = leaf_var_sorts(fi, leaf, env)
            caller_subst = {
                b: t for b, t in zip(binders,
                                     (pattern_term(p, FreshNames(set())) for p in leaf.row))
            }
            caller = [substitute(m, caller_subst) for m in metric]
            base_facts = []
            for x, t in leaf.var_bindings:
                base_facts.append(PAtom("==", Var(x), t))
            for x, excluded in leaf.excluded_ints:
                for k in excluded:
                    base_facts.append(PAtom("/=", Var(x), IntLit(k)))
            # the function's own argument refinements, at this clause's
            # arguments (the paper checks metrics together with the
            # refinement types of the function)
            for (binder, base) in fi.signature.params:
                if base.refined:
                    inst = dict(caller_subst)
                    inst[base.binder] = caller_subst[binder]
                    base_facts.append(substitute_pred(base.pred, inst))
            for call in clause_calls:
                callee_subst = dict(zip(binders, call.args))
                callee = [substitute(m, callee_subst) for m in metric]
                facts = base_facts + _refinement_facts_for_metric(
                    caller + callee, fi, env)
                nonneg = [PAtom("<=", IntLit(0), e) for e in callee]
                decreases: list[Pred] = []
                for k in range(len(metric)):
                    parts: list[Pred] = [
                        PAtom("==", callee[j], caller[j]) for j in range(k)
                    ]
                    parts.append(PAtom("<", callee[k], caller[k]))
                    decreases.append(parts[0] if len(parts) == 1 else PAnd(tuple(parts)))
                goal: Pred = PAnd((*nonneg,
                                   decreases[0] if len(decreases) == 1
                                   else POr(tuple(decreases))))
                active = caller + list(callee)
                if not entail(facts, goal, var_sorts, active):
                    return NonTermination(
                        call.span,
                        f"cannot show metric [{', '.join(str(m) for m in metric)}] "
                        f"decreases at recursive call in clause {ci + 1}",
                    )
    return None


def default_entail_service(env: TypeEnv) -> EntailService:
    from .logic import SolverState, entails

    def entail(facts: list[Pred], goal: Pred, var_sorts: dict[str, Sort],
               active_terms: list[Term]) -> bool:
        st = SolverState(env, var_sorts=var_sorts)
        for t in active_terms:
            st.intern_term(t, active=True)
        return entails(st, facts, goal)

    return entail


def check_termination(fi: FunInfo, env: TypeEnv,
                      entail: EntailService | None = None):
    """Structural check first unless an explicit metric was declared; falls
    back to the guessed first-argument metric before giving up."""
    calls = _self_calls(fi)
    if not calls:
        return TerminationEvidence("structural", ())
    if entail is None:
        entail = default_entail_service(env)
    metric = fi.signature.metric
    if metric is not None:
        failure = _check_metric(fi, tuple(metric), env, entail)
        if failure is None:
            return TerminationEvidence("semantic", metric=tuple(metric))
        return failure
    positions = _structural(fi, calls)
    if positions is not None:
        return TerminationEvidence("structural", positions)
    guesses = _guess_metric(fi, env)
    for guess in guesses:
        if _check_metric(fi, guess, env, entail) is None:
            return TerminationEvidence("semantic", metric=guess, guessed=True)
    return NonTermination(
        fi.span,
        f"no lexicographic argument ordering shrinks at every recursive call of "
        f"{fi.name!r}, and no termination metric applies",
    )


def call_graph_cycles(env: TypeEnv) -> list[list[str]]:
    """Strongly connected components of size > 1 in the call graph (mutual
    recursion is out of scope and reported as non-termination)."""
    from .syntax import subterms
    graph: dict[str, set[str]] = {name: set() for name in env.funs}
    for name, fi in env.funs.items():
        for clause in fi.clauses:
            for t in body_terms(clause.body):
                for sub in subterms(t):
                    if isinstance(sub, App) and sub.name != name:
                        graph[name].add(sub.name)
    # Tarjan SCC
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    onstack: set[str] = set()
    stack: list[str] = []
    counter = [0]
    out: list[list[str]] = []

    def strongconnect(v: str):
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        onstack.add(v)
        for w in sorted(graph[v]):
            if w not in index:
                strongconnect(w)
                low[v] = min(low[v], low[w])
            elif w in onstack:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            comp = []
            while True:
                w = stack.pop()
                onstack.discard(w)
                comp.append(w)
                if w == v:
                    break
            if len(comp) > 1:
                out.append(sorted(comp))

    for v in sorted(graph):
        if v not in index:
            strongconnect(v)
    return out
