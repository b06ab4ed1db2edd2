"""Core AST for .eq modules: terms, patterns, predicates, refinement types,
declarations, plus desugaring and the pretty-printer."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Union


@dataclass(frozen=True)
class Span:
    line: int
    col: int
    end_line: int
    end_col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


NO_SPAN = Span(0, 0, 0, 0)


# ---------------------------------------------------------------- terms

@dataclass(frozen=True)
class Term:
    span: Span = field(default=NO_SPAN, compare=False, repr=False, kw_only=True)


@dataclass(frozen=True)
class Var(Term):
    name: str


@dataclass(frozen=True)
class IntLit(Term):
    value: int


@dataclass(frozen=True)
class BoolLit(Term):
    value: bool


@dataclass(frozen=True)
class UnitLit(Term):
    pass


@dataclass(frozen=True)
class Con(Term):
    """Constructor application, always saturated."""
    name: str
    args: tuple[Term, ...] = ()


@dataclass(frozen=True)
class App(Term):
    """Function application, always saturated (the language is first order)."""
    name: str
    args: tuple[Term, ...] = ()


@dataclass(frozen=True)
class PrimOp(Term):
    """Arithmetic primitive; '*' requires a literal operand (kept linear)."""
    op: str  # '+', '-', '*'
    lhs: Term = field(default=None)  # type: ignore[assignment]
    rhs: Term = field(default=None)  # type: ignore[assignment]


@dataclass(frozen=True)
class ListLit(Term):
    """Surface sugar [e1, ..., ek]; removed by desugar."""
    items: tuple[Term, ...] = ()


@dataclass(frozen=True)
class ConsOp(Term):
    """Surface sugar e : e'; removed by desugar."""
    head: Term = field(default=None)  # type: ignore[assignment]
    tail: Term = field(default=None)  # type: ignore[assignment]


# ------------------------------------------------------------- patterns

@dataclass(frozen=True)
class Pattern:
    span: Span = field(default=NO_SPAN, compare=False, repr=False, kw_only=True)


@dataclass(frozen=True)
class PVar(Pattern):
    name: str


@dataclass(frozen=True)
class PWild(Pattern):
    pass


@dataclass(frozen=True)
class PInt(Pattern):
    value: int


@dataclass(frozen=True)
class PBool(Pattern):
    value: bool


@dataclass(frozen=True)
class PCon(Pattern):
    name: str
    args: tuple[Pattern, ...] = ()


# ----------------------------------------------------------- predicates

@dataclass(frozen=True)
class Pred:
    span: Span = field(default=NO_SPAN, compare=False, repr=False, kw_only=True)


REL_OPS = ("==", "/=", "<=", "<", ">=", ">")


@dataclass(frozen=True)
class PAtom(Pred):
    rel: str  # one of REL_OPS
    lhs: Term = field(default=None)  # type: ignore[assignment]
    rhs: Term = field(default=None)  # type: ignore[assignment]


@dataclass(frozen=True)
class PAnd(Pred):
    items: tuple[Pred, ...] = ()


@dataclass(frozen=True)
class POr(Pred):
    items: tuple[Pred, ...] = ()


@dataclass(frozen=True)
class PNot(Pred):
    item: Pred = field(default=None)  # type: ignore[assignment]


@dataclass(frozen=True)
class PTrue(Pred):
    pass


@dataclass(frozen=True)
class PFalse(Pred):
    pass


# ------------------------------------------------------ refinement types

@dataclass(frozen=True)
class TypeExpr:
    """Surface type: Int, Bool, Proof, a type variable (lowercase name), or a
    declared type applied to arguments."""
    name: str
    args: tuple[TypeExpr, ...] = ()
    span: Span = field(default=NO_SPAN, compare=False, repr=False, kw_only=True)

    @property
    def is_tyvar(self) -> bool:
        return self.name[:1].islower()


@dataclass(frozen=True)
class BaseRef:
    """{binder : ty | pred}; a bare type means a trivially true predicate."""
    ty: TypeExpr
    binder: str
    pred: Pred
    span: Span = field(default=NO_SPAN, compare=False, repr=False, kw_only=True)

    @property
    def refined(self) -> bool:
        return not isinstance(self.pred, PTrue)


@dataclass(frozen=True)
class Signature:
    """Chain of named argument binders ending in the result base type."""
    params: tuple[tuple[str, BaseRef], ...]
    result: BaseRef
    metric: Optional[tuple[Term, ...]] = None
    span: Span = field(default=NO_SPAN, compare=False, repr=False, kw_only=True)

    @property
    def arity(self) -> int:
        return len(self.params)

    def binders(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.params)


# ----------------------------------------------------------------- bodies

@dataclass(frozen=True)
class Step:
    """One `==. rhs ? hint ...` link of a chain."""
    rhs: Term
    hints: tuple[Term, ...] = ()
    span: Span = field(default=NO_SPAN, compare=False, repr=False, kw_only=True)


@dataclass(frozen=True)
class Body:
    span: Span = field(default=NO_SPAN, compare=False, repr=False, kw_only=True)


@dataclass(frozen=True)
class PlainTerm(Body):
    term: Term = field(default=None)  # type: ignore[assignment]


@dataclass(frozen=True)
class Chain(Body):
    """head (? hint)* (==. rhs (? hint)*)+ [*** QED]"""
    head: Term = field(default=None)  # type: ignore[assignment]
    head_hints: tuple[Term, ...] = ()
    steps: tuple[Step, ...] = ()
    qed: bool = False

    def value_term(self) -> Term:
        """The term a chain evaluates to (==. returns its right argument)."""
        return self.steps[-1].rhs if self.steps else self.head

    def all_hints(self) -> tuple[Term, ...]:
        out = list(self.head_hints)
        for s in self.steps:
            out.extend(s.hints)
        return tuple(out)


# ----------------------------------------------------------- declarations

@dataclass(frozen=True)
class Clause:
    name: str
    patterns: tuple[Pattern, ...]
    body: Body
    span: Span = field(default=NO_SPAN, compare=False, repr=False, kw_only=True)


@dataclass(frozen=True)
class CtorDef:
    name: str
    fields: tuple[TypeExpr, ...]
    span: Span = field(default=NO_SPAN, compare=False, repr=False, kw_only=True)


@dataclass(frozen=True)
class DataDecl:
    name: str
    params: tuple[str, ...]
    ctors: tuple[CtorDef, ...]
    span: Span = field(default=NO_SPAN, compare=False, repr=False, kw_only=True)


@dataclass(frozen=True)
class FunDecl:
    name: str
    signature: Signature
    clauses: tuple[Clause, ...]
    span: Span = field(default=NO_SPAN, compare=False, repr=False, kw_only=True)


Decl = Union[DataDecl, FunDecl]

ANNOTATION_KINDS = ("measure", "reflect", "ple")


@dataclass(frozen=True)
class Annotation:
    kind: str  # measure | reflect | ple
    target: str
    span: Span = field(default=NO_SPAN, compare=False, repr=False, kw_only=True)


@dataclass(frozen=True)
class SourceModule:
    decls: tuple[Decl, ...]
    annotations: tuple[Annotation, ...]
    span: Span = field(default=NO_SPAN, compare=False, repr=False, kw_only=True)


# The List type every module gets for free; [] / (:) sugar targets it.
PRELUDE_LIST = DataDecl(
    name="List",
    params=("a",),
    ctors=(
        CtorDef("Nil", ()),
        CtorDef("Cons", (TypeExpr("a"), TypeExpr("List", (TypeExpr("a"),)))),
    ),
)


def nil(span: Span = NO_SPAN) -> Term:
    return Con("Nil", (), span=span)


def cons(h: Term, t: Term, span: Span = NO_SPAN) -> Term:
    return Con("Cons", (h, t), span=span)


# ------------------------------------------------------------- traversal

def subterms(t: Term) -> Iterator[Term]:
    """Yield t and every nested term, preorder."""
    yield t
    if isinstance(t, (Con, App, ListLit)):
        for a in (t.args if not isinstance(t, ListLit) else t.items):
            yield from subterms(a)
    elif isinstance(t, PrimOp):
        yield from subterms(t.lhs)
        yield from subterms(t.rhs)
    elif isinstance(t, ConsOp):
        yield from subterms(t.head)
        yield from subterms(t.tail)


def pred_terms(p: Pred) -> Iterator[Term]:
    if isinstance(p, PAtom):
        yield p.lhs
        yield p.rhs
    elif isinstance(p, (PAnd, POr)):
        for q in p.items:
            yield from pred_terms(q)
    elif isinstance(p, PNot):
        yield from pred_terms(p.item)


def body_terms(b: Body) -> tuple[Term, ...]:
    """Every term of a clause body: plain term, or head + step rhss + hints."""
    if isinstance(b, PlainTerm):
        return (b.term,)
    assert isinstance(b, Chain)
    out = [b.head, *b.head_hints]
    for s in b.steps:
        out.append(s.rhs)
        out.extend(s.hints)
    return tuple(out)


def substitute(t: Term, subst: dict[str, Term]) -> Term:
    if isinstance(t, Var):
        return subst.get(t.name, t)
    if isinstance(t, Con):
        return Con(t.name, tuple(substitute(a, subst) for a in t.args), span=t.span)
    if isinstance(t, App):
        return App(t.name, tuple(substitute(a, subst) for a in t.args), span=t.span)
    if isinstance(t, PrimOp):
        return PrimOp(t.op, substitute(t.lhs, subst), substitute(t.rhs, subst), span=t.span)
    if isinstance(t, ListLit):
        return ListLit(tuple(substitute(a, subst) for a in t.items), span=t.span)
    if isinstance(t, ConsOp):
        return ConsOp(substitute(t.head, subst), substitute(t.tail, subst), span=t.span)
    return t


def substitute_pred(p: Pred, subst: dict[str, Term]) -> Pred:
    if isinstance(p, PAtom):
        return PAtom(p.rel, substitute(p.lhs, subst), substitute(p.rhs, subst), span=p.span)
    if isinstance(p, PAnd):
        return PAnd(tuple(substitute_pred(q, subst) for q in p.items), span=p.span)
    if isinstance(p, POr):
        return POr(tuple(substitute_pred(q, subst) for q in p.items), span=p.span)
    if isinstance(p, PNot):
        return PNot(substitute_pred(p.item, subst), span=p.span)
    return p


def pattern_vars(p: Pattern) -> Iterator[str]:
    if isinstance(p, PVar):
        yield p.name
    elif isinstance(p, PCon):
        for q in p.args:
            yield from pattern_vars(q)


def pattern_term(p: Pattern, fresh: "FreshNames") -> Term:
    """Turn a pattern into a term, inventing names for wildcards."""
    if isinstance(p, PVar):
        return Var(p.name, span=p.span)
    if isinstance(p, PWild):
        return Var(fresh.take("_w"), span=p.span)
    if isinstance(p, PInt):
        return IntLit(p.value, span=p.span)
    if isinstance(p, PBool):
        return BoolLit(p.value, span=p.span)
    assert isinstance(p, PCon)
    return Con(p.name, tuple(pattern_term(q, fresh) for q in p.args), span=p.span)


class FreshNames:
    """Name supply that avoids a fixed set of taken names."""

    def __init__(self, taken: set[str] | None = None):
        self.taken = set(taken or ())
        self.counter = 0

    def take(self, base: str) -> str:
        name = base
        while name in self.taken:
            self.counter += 1
            name = f"{base}{self.counter}"
        self.taken.add(name)
        return name


# -------------------------------------------------------------- desugar

def desugar_term(t: Term) -> Term:
    """Rewrite [e1,...,ek] and e:e' into Cons/Nil applications."""
    if isinstance(t, ListLit):
        out: Term = nil(t.span)
        for item in reversed(t.items):
            out = cons(desugar_term(item), out, t.span)
        return out
    if isinstance(t, ConsOp):
        return cons(desugar_term(t.head), desugar_term(t.tail), t.span)
    if isinstance(t, Con):
        return Con(t.name, tuple(desugar_term(a) for a in t.args), span=t.span)
    if isinstance(t, App):
        return App(t.name, tuple(desugar_term(a) for a in t.args), span=t.span)
    if isinstance(t, PrimOp):
        return PrimOp(t.op, desugar_term(t.lhs), desugar_term(t.rhs), span=t.span)
    return t


def desugar_pred(p: Pred) -> Pred:
    if isinstance(p, PAtom):
        return PAtom(p.rel, desugar_term(p.lhs), desugar_term(p.rhs), span=p.span)
    if isinstance(p, PAnd):
        return PAnd(tuple(desugar_pred(q) for q in p.items), span=p.span)
    if isinstance(p, POr):
        return POr(tuple(desugar_pred(q) for q in p.items), span=p.span)
    if isinstance(p, PNot):
        return PNot(desugar_pred(p.item), span=p.span)
    return p


def desugar_base(b: BaseRef) -> BaseRef:
    return BaseRef(b.ty, b.binder, desugar_pred(b.pred), span=b.span)


def desugar_body(b: Body) -> Body:
    if isinstance(b, PlainTerm):
        return PlainTerm(desugar_term(b.term), span=b.span)
    assert isinstance(b, Chain)
    return Chain(
        head=desugar_term(b.head),
        head_hints=tuple(desugar_term(h) for h in b.head_hints),
        steps=tuple(
            Step(desugar_term(s.rhs), tuple(desugar_term(h) for h in s.hints), span=s.span)
            for s in b.steps
        ),
        qed=b.qed,
        span=b.span,
    )


def desugar(m: SourceModule) -> SourceModule:
    """Remove list sugar everywhere (terms, predicates, metrics). Idempotent."""
    decls: list[Decl] = []
    for d in m.decls:
        if isinstance(d, DataDecl):
            decls.append(d)
            continue
        sig = d.signature
        new_sig = Signature(
            params=tuple((n, desugar_base(b)) for n, b in sig.params),
            result=desugar_base(sig.result),
            metric=None if sig.metric is None else tuple(desugar_term(t) for t in sig.metric),
            span=sig.span,
        )
        clauses = tuple(
            Clause(c.name, c.patterns, desugar_body(c.body), span=c.span) for c in d.clauses
        )
        decls.append(FunDecl(d.name, new_sig, clauses, span=d.span))
    return SourceModule(tuple(decls), m.annotations, span=m.span)


# --------------------------------------------------------------- pretty

# precedence levels: 0 cons, 1 additive, 2 multiplicative, 3 application, 4 atom
def _term_doc(t: Term, level: int) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, IntLit):
        s = str(t.value)
        return s if t.value >= 0 or level <= 1 else f"({s})"
    if isinstance(t, BoolLit):
        return "true" if t.value else "false"
    if isinstance(t, UnitLit):
        return "()"
    if isinstance(t, ListLit):
        return "[" + ", ".join(_term_doc(x, 0) for x in t.items) + "]"
    if isinstance(t, ConsOp):
        s = f"{_term_doc(t.head, 1)} : {_term_doc(t.tail, 0)}"
        return f"({s})" if level > 0 else s
    if isinstance(t, Con):
        if t.name == "Nil" and not t.args:
            return "[]"
        if t.name == "Cons" and len(t.args) == 2:
            s = f"{_term_doc(t.args[0], 1)} : {_term_doc(t.args[1], 0)}"
            return f"({s})" if level > 0 else s
        if not t.args:
            return t.name
        s = t.name + " " + " ".join(_term_doc(a, 4) for a in t.args)
        return f"({s})" if level > 3 else s
    if isinstance(t, App):
        if not t.args:
            return t.name
        s = t.name + " " + " ".join(_term_doc(a, 4) for a in t.args)
        return f"({s})" if level > 3 else s
    if isinstance(t, PrimOp):
        if t.op == "*":
            s = f"{_term_doc(t.lhs, 2)} * {_term_doc(t.rhs, 3)}"
            return f"({s})" if level > 2 else s
        s = f"{_term_doc(t.lhs, 1)} {t.op} {_term_doc(t.rhs, 2)}"
        return f"({s})" if level > 1 else s
    raise AssertionError(f"unknown term {t!r}")


def pretty(t: Term) -> str:
    """Render a term so that parsing it back yields the same structure."""
    return _term_doc(t, 0)


def pretty_pred(p: Pred, level: int = 0) -> str:
    # levels: 0 or, 1 and, 2 atom
    if isinstance(p, PTrue):
        return "true"
    if isinstance(p, PFalse):
        return "false"
    if isinstance(p, PAtom):
        return f"{_term_doc(p.lhs, 0)} {p.rel} {_term_doc(p.rhs, 0)}"
    if isinstance(p, PNot):
        return f"not ({pretty_pred(p.item, 0)})"
    if isinstance(p, PAnd):
        s = " && ".join(pretty_pred(q, 2) for q in p.items)
        return f"({s})" if level > 1 else s
    if isinstance(p, POr):
        s = " || ".join(pretty_pred(q, 1) for q in p.items)
        return f"({s})" if level > 0 else s
    raise AssertionError(f"unknown pred {p!r}")


def pretty_pattern(p: Pattern, atom: bool = False) -> str:
    if isinstance(p, PVar):
        return p.name
    if isinstance(p, PWild):
        return "_"
    if isinstance(p, PInt):
        return str(p.value) if p.value >= 0 else f"({p.value})"
    if isinstance(p, PBool):
        return "true" if p.value else "false"
    assert isinstance(p, PCon)
    if p.name == "Nil" and not p.args:
        return "[]"
    if p.name == "Cons" and len(p.args) == 2:
        return f"({pretty_pattern(p.args[0], True)} : {pretty_pattern(p.args[1])})"
    if not p.args:
        return p.name
    s = p.name + " " + " ".join(pretty_pattern(a, True) for a in p.args)
    return f"({s})" if atom else s


def pretty_type(te: TypeExpr, atom: bool = False) -> str:
    if not te.args:
        return te.name
    s = te.name + " " + " ".join(pretty_type(a, True) for a in te.args)
    return f"({s})" if atom else s


def pretty_base(b: BaseRef) -> str:
    if b.refined:
        return "{" + f"{b.binder}:{pretty_type(b.ty, True)} | {pretty_pred(b.pred)}" + "}"
    return pretty_type(b.ty, True) if b.ty.args else pretty_type(b.ty)


def pretty_signature(name: str, sig: Signature) -> str:
    parts = [f"{n}:{pretty_base(b)}" for n, b in sig.params]
    parts.append(pretty_base(sig.result))
    text = f"{name} : " + " -> ".join(parts)
    if sig.metric is not None:
        text += " / [" + ", ".join(pretty(t) for t in sig.metric) + "]"
    return text


def pretty_module(m: SourceModule) -> str:
    """Render a whole module in parseable concrete syntax."""
    lines: list[str] = []
    anns_by_target: dict[str, list[str]] = {}
    for a in m.annotations:
        anns_by_target.setdefault(a.target, []).append(a.kind)
    for d in m.decls:
        if lines:
            lines.append("")
        if isinstance(d, DataDecl):
            ctors = " | ".join(
                c.name + ("" if not c.fields else " " + " ".join(pretty_type(f, True) for f in c.fields))
                for c in d.ctors
            )
            params = ("" if not d.params else " " + " ".join(d.params))
            lines.append(f"data {d.name}{params} = {ctors}")
            continue
        for kind in anns_by_target.get(d.name, ()):
            lines.append(f"{kind} {d.name}")
        lines.append(pretty_signature(d.name, d.signature))
        for c in d.clauses:
            pats = "".join(" " + pretty_pattern(p, True) for p in c.patterns)
            if isinstance(c.body, PlainTerm):
                lines.append(f"{c.name}{pats} = {pretty(c.body.term)}")
            else:
                ch = c.body
                assert isinstance(ch, Chain)
                lines.append(f"{c.name}{pats}")
                lines.append(f"  =   {pretty(ch.head)}")
                for h in ch.head_hints:
                    lines.append(f"      ? {pretty(h)}")
                for s in ch.steps:
                    lines.append(f"  ==. {pretty(s.rhs)}")
                    for h in s.hints:
                        lines.append(f"      ? {pretty(h)}")
                if ch.qed:
                    lines.append("  *** QED")
    return "\n".join(lines) + "\n"
