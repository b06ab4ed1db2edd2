"""The SMT replacement: ground congruence closure with constructor theory,
linear integer arithmetic over a rational relaxation, occurrence-driven
instantiation of measure and reflection equations, and PLE saturation.

One SolverState serves one obligation.  Equalities are decided by union-find
with congruence repair; integer atoms by Fourier-Motzkin elimination with
integer sharpening of strict bounds (sound, incomplete).  The two theories
exchange equalities: congruence merges of integer classes feed the arithmetic
store, and arithmetic-pinched variable pairs (x <= y and y <= x) are merged
back into the term graph.
"""

from __future__ import annotations

from math import gcd
from typing import Optional

from .syntax import (
    App, BoolLit, Con, IntLit, PAnd, PAtom, PFalse, PNot, POr, PTrue, Pred,
    PrimOp, Term, UnitLit, Var, pred_terms,
)
from .types import INT, Sort, SortData, SortInt, SortVar, TypeEnv

DEFAULT_PLE_FUEL = 100

_OPAQUE = SortVar("_opaque")

_DUAL = {"==": "/=", "/=": "==", "<=": ">", ">": "<=", "<": ">=", ">=": "<"}


def negate_pred(p: Pred) -> Pred:
    if isinstance(p, PAtom):
        return PAtom(_DUAL[p.rel], p.lhs, p.rhs, span=p.span)
    if isinstance(p, PAnd):
        return POr(tuple(negate_pred(q) for q in p.items), span=p.span)
    if isinstance(p, POr):
        return PAnd(tuple(negate_pred(q) for q in p.items), span=p.span)
    if isinstance(p, PNot):
        return p.item
    if isinstance(p, PTrue):
        return PFalse(span=p.span)
    return PTrue(span=p.span)


# --------------------------------------------------------------- LIA store

Lin = tuple[dict[int, int], int]  # sum(coeffs[v] * v) + const, all integers


def _gcd_norm(coeffs: dict[int, int], const: int, rel: str) -> tuple[dict[int, int], int, str]:
    """Divide by the coefficient gcd; floor-tighten <= bounds (sound on
    integer-valued variables), flag impossible equalities."""
    g = 0
    for c in coeffs.values():
        g = gcd(g, abs(c))
    if g > 1:
        if rel == "<=":
            coeffs = {v: c // g for v, c in coeffs.items()}
            const = -((-const) // g)  # ceil(const / g)
        else:
            if const % g != 0:
                return ({}, 1, "==")  # no integer solutions
            coeffs = {v: c // g for v, c in coeffs.items()}
            const //= g
    return (coeffs, const, rel)


class _Lia:
    """Conjunction of normalised integer linear atoms `expr REL 0` with REL
    in {'==', '<='}; strict bounds are sharpened to <= at creation.  Decided
    by Gaussian elimination of the equalities followed by Fourier-Motzkin,
    with gcd/floor tightening on every derived row (sound, incomplete)."""

    ATOM_CAP = 600
    DISEQ_CAP = 5  # disequality branches explored; extras soundly dropped

    def __init__(self) -> None:
        self.atoms: list[tuple[dict[int, int], int, str]] = []
        self.diseqs: list[Lin] = []  # each meaning expr != 0
        self._feasible_cache: Optional[bool] = None

    def clone(self) -> "_Lia":
        other = _Lia()
        other.atoms = [(dict(c), k, r) for c, k, r in self.atoms]
        other.diseqs = [(dict(c), k) for c, k in self.diseqs]
        other._feasible_cache = self._feasible_cache
        return other

    def add_diseq(self, coeffs: dict[int, int], const: int) -> None:
        coeffs = {v: c for v, c in coeffs.items() if c != 0}
        if not coeffs:
            if const == 0:
                # x != x: impossible; poison the store
                self.atoms.append(({}, 1, "<="))
                self._feasible_cache = None
            return
        self.diseqs.append((coeffs, const))
        self._feasible_cache = None

    @staticmethod
    def normalise(coeffs: dict[int, int], const: int, rel: str
                  ) -> tuple[dict[int, int], int, str]:
        coeffs = {v: c for v, c in coeffs.items() if c != 0}
        if rel == "<":
            const += 1
            rel = "<="
        if not coeffs:
            return ({}, const, rel)
        return _gcd_norm(coeffs, const, rel)

    def add(self, coeffs: dict[int, int], const: int, rel: str) -> None:
        atom = self.normalise(coeffs, const, rel)
        if not atom[0] and self._ground_holds(atom[1], atom[2]):
            return
        self.atoms.append(atom)
        self._feasible_cache = None

    @staticmethod
    def _ground_holds(const: int, rel: str) -> bool:
        return const == 0 if rel == "==" else const <= 0

    def feasible(self, extra: tuple = ()) -> bool:
        if not extra and not self.diseqs:
            if self._feasible_cache is None:
                self._feasible_cache = self._solve(list(self.atoms))
            return self._feasible_cache
        atoms = list(self.atoms)
        for coeffs, const, rel in extra:
            atoms.append(self.normalise(dict(coeffs), const, rel))
        if not self.diseqs:
            return self._solve(atoms)
        # integer disequalities: expr != 0 splits into expr <= -1 or expr >= 1;
        # the store is feasible if some branch assignment is
        result = self._feasible_branches(atoms, self.diseqs[:self.DISEQ_CAP])
        if not extra:
            self._feasible_cache = result
        return result

    def _feasible_branches(self, atoms, diseqs) -> bool:
        if not diseqs:
            return self._solve(atoms)
        (coeffs, const), rest = diseqs[0], diseqs[1:]
        low = self.normalise(dict(coeffs), const, "<")
        if self._feasible_branches(atoms + [low], rest):
            return True
        high = self.normalise({v: -c for v, c in coeffs.items()}, -const, "<")
        return self._feasible_branches(atoms + [high], rest)

    def entails(self, coeffs: dict[int, int], const: int, rel: str) -> bool:
        """Store |= expr REL 0, by refuting the negation."""
        neg_coeffs = {v: -c for v, c in coeffs.items()}
        if rel == "<=":
            return not self.feasible(((neg_coeffs, -const, "<"),))
        if rel == "<":
            return not self.feasible(((neg_coeffs, -const, "<="),))
        if rel == "==":
            return (not self.feasible(((coeffs, const, "<"),))
                    and not self.feasible(((neg_coeffs, -const, "<"),)))
        raise AssertionError(rel)

    # Gaussian elimination of equalities (integer-scaled), then FM.
    def _solve(self, atoms: list[tuple[dict[int, int], int, str]]) -> bool:
        eqs: list[Lin] = []
        ineqs: list[Lin] = []
        for coeffs, const, rel in atoms:
            coeffs = {v: c for v, c in coeffs.items() if c != 0}
            if not coeffs:
                if not self._ground_holds(const, rel):
                    return False
                continue
            (eqs if rel == "==" else ineqs).append((dict(coeffs), const))

        while eqs:
            ecoeffs, econst = eqs.pop()
            ecoeffs = {v: c for v, c in ecoeffs.items() if c != 0}
            if not ecoeffs:
                if econst != 0:
                    return False
                continue
            var = min(ecoeffs, key=lambda v: abs(ecoeffs[v]))
            a = ecoeffs[var]

            def eliminate(row: Lin, is_eq: bool) -> Optional[Lin]:
                coeffs, const = row
                b = coeffs.get(var, 0)
                if b == 0:
                    return row
                # |a|*row - sign(a)*b*eq keeps inequality direction
                scale_r = abs(a)
                scale_e = -b if a > 0 else b
                out: dict[int, int] = {}
                for v, c in coeffs.items():
                    out[v] = c * scale_r
                for v, c in ecoeffs.items():
                    out[v] = out.get(v, 0) + c * scale_e
                out = {v: c for v, c in out.items() if c != 0}
                c2, k2, _ = _gcd_norm(out, const * scale_r + econst * scale_e,
                                      "==" if is_eq else "<=")
                return (c2, k2)

            new_eqs = []
            for row in eqs:
                r = eliminate(row, True)
                coeffs, const = r
                if not coeffs and const != 0:
                    return False
                if coeffs:
                    new_eqs.append(r)
            eqs = new_eqs
            new_ineqs = []
            for row in ineqs:
                coeffs, const = eliminate(row, False)
                if not coeffs:
                    if const > 0:
                        return False
                    continue
                new_ineqs.append((coeffs, const))
            ineqs = new_ineqs

        while True:
            varset: set[int] = set()
            for coeffs, _ in ineqs:
                varset.update(coeffs)
            if not varset:
                return True
            # eliminate the variable with the fewest lower*upper combinations
            best, best_cost = None, None
            for v in varset:
                lo = sum(1 for c, _ in ineqs if c.get(v, 0) < 0)
                hi = sum(1 for c, _ in ineqs if c.get(v, 0) > 0)
                cost = lo * hi - lo - hi
                if best_cost is None or cost < best_cost:
                    best, best_cost = v, cost
            v = best
            lowers, uppers, others = [], [], []
            for coeffs, const in ineqs:
                c = coeffs.get(v, 0)
                if c < 0:
                    lowers.append((coeffs, const, c))
                elif c > 0:
                    uppers.append((coeffs, const, c))
                else:
                    others.append((coeffs, const))
            for lc, lk, lcv in lowers:
                for uc, uk, ucv in uppers:
                    # ucv*L + (-lcv)*U, both multipliers positive
                    out: dict[int, int] = {}
                    for var2, c in lc.items():
                        if var2 != v:
                            out[var2] = c * ucv
                    for var2, c in uc.items():
                        if var2 != v:
                            out[var2] = out.get(var2, 0) + c * -lcv
                    out = {k2: c for k2, c in out.items() if c != 0}
                    c2, k2, _ = _gcd_norm(out, lk * ucv + uk * -lcv, "<=")
                    if not c2:
                        if k2 > 0:
                            return False
                        continue
                    others.append((c2, k2))
            ineqs = others
            if len(ineqs) > self.ATOM_CAP:
                return True  # refuse to blow up; "feasible" is the safe answer


# ------------------------------------------------------------- term graph

class _Node:
    __slots__ = ("nid", "kind", "head", "args", "sort")

    def __init__(self, nid: int, kind: str, head, args: tuple[int, ...], sort: Sort):
        self.nid = nid
        self.kind = kind  # var | int | bool | unit | con | app | prim
        self.head = head
        self.args = args
        self.sort = sort


_TAGGED = ("con", "int", "bool", "unit")


class SolverState:
    """Term graph + union-find + constructor tags + LIA store + instantiation
    ledger for a single obligation."""

    def __init__(self, env: TypeEnv, var_sorts: Optional[dict[str, Sort]] = None,
                 ple: bool = False, ple_fuel: int = DEFAULT_PLE_FUEL):
        self.env = env
        self.var_sorts = var_sorts or {}
        self.ple = ple
        self.ple_fuel = ple_fuel
        self.nodes: list[_Node] = []
        self.intern_table: dict[tuple, int] = {}
        self.parent: list[int] = []
        self.rank: list[int] = []
        self.use: dict[int, list[int]] = {}
        self.sig_table: dict[tuple, int] = {}
        self.tag: dict[int, int] = {}
        self.diseqs: list[tuple[int, int]] = []
        self.lia = _Lia()
        self.active: set[int] = set()
        self.reflect_done_nodes: set[int] = set()
        self.reflect_done_keys: set[tuple] = set()
        self.measure_done_nodes: set[tuple] = set()
        self.measure_done_keys: set[tuple] = set()
        self.contradiction = False
        self.reason = ""
        self.fuel_exhausted = False
        self.stats = {"reflect": 0, "measure": 0, "merges": 0, "dropped_or": 0}

    # -- union-find -----------------------------------------------------
    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def _contradict(self, reason: str) -> None:
        if not self.contradiction:
            self.contradiction = True
            self.reason = reason

    # -- node creation -----------------------------------------------------
    def _mk(self, kind: str, head, args: tuple[int, ...], sort: Sort) -> int:
        key = (kind, head, args)
        nid = self.intern_table.get(key)
        if nid is not None:
            return nid
        nid = len(self.nodes)
        node = _Node(nid, kind, head, args, sort)
        self.nodes.append(node)
        self.intern_table[key] = nid
        self.parent.append(nid)
        self.rank.append(0)
        if kind in _TAGGED:
            self.tag[nid] = nid
        if args:
            for a in args:
                self.use.setdefault(self.find(a), []).append(nid)
            sig = (kind, head, tuple(self.find(a) for a in args))
            other = self.sig_table.get(sig)
            if other is None:
                self.sig_table[sig] = nid
            else:
                self._merge(nid, other)
        return nid

    def _sort_of_term(self, t: Term) -> Sort:
        if isinstance(t, Var):
            return self.var_sorts.get(t.name, _OPAQUE)
        if isinstance(t, IntLit) or isinstance(t, PrimOp):
            return INT
        if isinstance(t, BoolLit):
            from .types import BOOL
            return BOOL
        if isinstance(t, UnitLit):
            from .types import PROOF
            return PROOF
        if isinstance(t, Con):
            return SortData(self.env.ctors[t.name].data_name, ())
        if isinstance(t, App):
            return self.env.funs[t.name].result_sort
        raise AssertionError(f"cannot intern {t!r}")

    def intern_term(self, t: Term, active: bool = False,
                    subst: Optional[dict[str, int]] = None) -> int:
        if isinstance(t, Var):
            if subst is not None and t.name in subst:
                return subst[t.name]
            return self._mk("var", t.name, (), self._sort_of_term(t))
        if isinstance(t, IntLit):
            return self._mk("int", t.value, (), INT)
        if isinstance(t, BoolLit):
            return self._mk("bool", t.value, (), self._sort_of_term(t))
        if isinstance(t, UnitLit):
            return self._mk("unit", "()", (), self._sort_of_term(t))
        if isinstance(t, Con):
            args = tuple(self.intern_term(a, active, subst) for a in t.args)
            return self._mk("con", t.name, args, self._sort_of_term(t))
        if isinstance(t, App):
            args = tuple(self.intern_term(a, active, subst) for a in t.args)
            nid = self._mk("app", t.name, args, self._sort_of_term(t))
            if active:
                self.active.add(nid)
            return nid
        if isinstance(t, PrimOp):
            args = (self.intern_term(t.lhs, active, subst),
                    self.intern_term(t.rhs, active, subst))
            return self._mk("prim", t.op, args, INT)
        raise AssertionError(f"cannot intern {t!r}")

    # -- linear view -----------------------------------------------------------
    def lin(self, nid: int) -> Lin:
        node = self.nodes[nid]
        if node.kind == "int":
            return ({}, node.head)
        if node.kind == "prim":
            lc, lk = self.lin(node.args[0])
            rc, rk = self.lin(node.args[1])
            if node.head == "+":
                coeffs = dict(lc)
                for v, c in rc.items():
                    coeffs[v] = coeffs.get(v, 0) + c
                return (coeffs, lk + rk)
            if node.head == "-":
                coeffs = dict(lc)
                for v, c in rc.items():
                    coeffs[v] = coeffs.get(v, 0) - c
                return (coeffs, lk - rk)
            # multiplication: one side is a constant (enforced by sorts)
            if not lc:
                return ({v: c * lk for v, c in rc.items()}, rk * lk)
            if not rc:
                return ({v: c * rk for v, c in lc.items()}, lk * rk)
            return ({nid: 1}, 0)
        return ({nid: 1}, 0)

    def _lin_diff(self, a: int, b: int) -> Lin:
        ac, ak = self.lin(a)
        bc, bk = self.lin(b)
        coeffs = dict(ac)
        for v, c in bc.items():
            coeffs[v] = coeffs.get(v, 0) - c
        return (coeffs, ak - bk)

    def _is_int(self, nid: int) -> bool:
        return isinstance(self.nodes[nid].sort, SortInt)

    # -- merging ---------------------------------------------------------------
    def _merge(self, a: int, b: int) -> None:
        pending = [(a, b)]
        while pending and not self.contradiction:
            x, y = pending.pop()
            rx, ry = self.find(x), self.find(y)
            if rx == ry:
                continue
            if self._is_int(x) or self._is_int(y):
                coeffs, const = self._lin_diff(x, y)
                self.lia.add(coeffs, const, "==")
            tx, ty = self.tag.get(rx), self.tag.get(ry)
            if tx is not None and ty is not None:
                nx, ny = self.nodes[tx], self.nodes[ty]
                if nx.kind != ny.kind or nx.head != ny.head:
                    self._contradict(
                        f"distinct values forced equal: "
                        f"{self.describe(tx)} == {self.describe(ty)}")
                    return
                if nx.kind == "con":
                    pending.extend(zip(nx.args, ny.args))
            if self.rank[rx] < self.rank[ry]:
                rx, ry = ry, rx
            elif self.rank[rx] == self.rank[ry]:
                self.rank[rx] += 1
            # ry is absorbed into rx
            absorbed_tag = self.tag.get(ry)
            self.parent[ry] = rx
            self.stats["merges"] += 1
            if absorbed_tag is not None and rx not in self.tag:
                self.tag[rx] = absorbed_tag
            moved = self.use.pop(ry, [])
            if moved:
                self.use.setdefault(rx, []).extend(moved)
            for p in moved:
                node = self.nodes[p]
                sig = (node.kind, node.head, tuple(self.find(q) for q in node.args))
                other = self.sig_table.get(sig)
                if other is None:
                    self.sig_table[sig] = p
                elif self.find(other) != self.find(p):
                    pending.append((p, other))

    def merge(self, a: int, b: int) -> None:
        self._merge(a, b)

    # -- contradiction checkpoints ------------------------------------------------
    def checkpoint(self) -> None:
        if self.contradiction:
            return
        for a, b in self.diseqs:
            if self.find(a) == self.find(b):
                self._contradict(
                    f"both sides of a disequality merged: {self.describe(a)}")
                return
        if (self.lia.atoms or self.lia.diseqs) and not self.lia.feasible():
            self._contradict("arithmetic store infeasible")
            return

    def _pinch(self) -> bool:
        """Merge integer classes the LIA store forces equal (bound pinching),
        so congruence can see arithmetic consequences."""
        if self.contradiction:
            return False
        if not any(rel == "<=" for _, _, rel in self.lia.atoms):
            # equality-only stores were already merged through the term graph
            return False
        atom_vars: set[int] = set()
        for coeffs, _, _ in self.lia.atoms:
            atom_vars.update(coeffs)
        atom_reps = {self.find(v) for v in atom_vars}
        reps: list[int] = []
        seen: set[int] = set()
        for node in self.nodes:
            if node.kind in ("int", "prim") or not isinstance(node.sort, SortInt):
                continue
            r = self.find(node.nid)
            if r in seen:
                continue
            seen.add(r)
            if r in atom_reps and self.use.get(r):
                reps.append(r)
        if len(reps) > 12:
            return False
        changed = False
        for i in range(len(reps)):
            for j in range(i + 1, len(reps)):
                a, b = reps[i], reps[j]
                if self.find(a) == self.find(b):
                    continue
                coeffs, const = self._lin_diff(a, b)
                if self.lia.entails(coeffs, const, "=="):
                    self._merge(a, b)
                    changed = True
        return changed

    # -- rendering ------------------------------------------------------------
    def describe(self, nid: int) -> str:
        node = self.nodes[nid]
        if node.kind == "var":
            return str(node.head)
        if node.kind == "int":
            return str(node.head)
        if node.kind == "bool":
            return "true" if node.head else "false"
        if node.kind == "unit":
            return "()"
        if node.kind == "prim":
            return f"({self.describe(node.args[0])} {node.head} {self.describe(node.args[1])})"
        if not node.args:
            return str(node.head)
        return "(" + str(node.head) + " " + " ".join(self.describe(a) for a in node.args) + ")"


# ------------------------------------------------------------ public API

def assert_fact(st: SolverState, p: Pred) -> SolverState:
    """Add a hypothesis.  Contradiction is a state, not an error."""
    if st.contradiction:
        return st
    if isinstance(p, PTrue):
        return st
    if isinstance(p, PFalse):
        st._contradict("false hypothesis")
        return st
    if isinstance(p, PAnd):
        for q in p.items:
            assert_fact(st, q)
        return st
    if isinstance(p, PNot):
        return assert_fact(st, negate_pred(p))
    if isinstance(p, POr):
        st.stats["dropped_or"] += 1  # disjunctive facts are soundly ignored
        return st
    assert isinstance(p, PAtom)
    a = st.intern_term(p.lhs)
    b = st.intern_term(p.rhs)
    rel = p.rel
    if rel == "==":
        st.merge(a, b)
    elif rel == "/=":
        st.diseqs.append((a, b))
        if st._is_int(a) and st._is_int(b):
            coeffs, const = st._lin_diff(a, b)
            st.lia.add_diseq(coeffs, const)
    else:
        if rel == ">=":
            a, b, rel = b, a, "<="
        elif rel == ">":
            a, b, rel = b, a, "<"
        coeffs, const = st._lin_diff(a, b)
        st.lia.add(coeffs, const, rel)
    st.checkpoint()
    return st


def _select_clause(st: SolverState, fi, arg_nids: tuple[int, ...]):
    """Walk clauses in order; select the first whose match is decided.  A
    clause is skipped only when provably non-matching; an undecided match
    blocks unfolding entirely."""
    from .syntax import PBool, PCon, PInt, PVar, PWild

    def match(pat, nid, binding) -> str:
        if isinstance(pat, PVar):
            binding[pat.name] = nid
            return "yes"
        if isinstance(pat, PWild):
            return "yes"
        rep = st.find(nid)
        t = st.tag.get(rep)
        if t is None:
            return "unknown"
        node = st.nodes[t]
        if isinstance(pat, PInt):
            if node.kind != "int":
                return "unknown"
            return "yes" if node.head == pat.value else "no"
        if isinstance(pat, PBool):
            if node.kind != "bool":
                return "unknown"
            return "yes" if node.head == pat.value else "no"
        assert isinstance(pat, PCon)
        if node.kind != "con":
            return "unknown"
        if node.head != pat.name:
            return "no"
        verdict = "yes"
        for sub, arg in zip(pat.args, node.args):
            r = match(sub, arg, binding)
            if r == "no":
                return "no"
            if r == "unknown":
                verdict = "unknown"
        return verdict

    for clause in fi.clauses:
        binding: dict[str, int] = {}
        verdict = "yes"
        for pat, nid in zip(clause.patterns, arg_nids):
            r = match(pat, nid, binding)
            if r == "no":
                verdict = "no"
                break
            if r == "unknown":
                verdict = "unknown"
        if verdict == "yes":
            return clause, binding
        if verdict == "unknown":
            return None
    return None


def _fire_measures(st: SolverState, nid: int) -> bool:
    node = st.nodes[nid]
    data_name = st.env.ctors[node.head].data_name
    fired = False
    for m in st.env.measures_of.get(data_name, []):
        if (m, nid) in st.measure_done_nodes:
            continue
        st.measure_done_nodes.add((m, nid))
        key = (m, st.find(nid))
        if key in st.measure_done_keys:
            continue
        st.measure_done_keys.add(key)
        clause = st.env.measure_clause(m, node.head)
        pat = clause.patterns[0]
        binding: dict[str, int] = {}
        from .syntax import PVar as _PVar
        for sub, arg in zip(pat.args, node.args):  # type: ignore[union-attr]
            if isinstance(sub, _PVar):
                binding[sub.name] = arg
        lhs = st._mk("app", m, (nid,), st.env.funs[m].result_sort)
        body = st.env.funs[m].value_term(clause)
        rhs = st.intern_term(body, active=False, subst=binding)
        if st.find(lhs) == st.find(rhs):
            continue
        st.merge(lhs, rhs)
        st.stats["measure"] += 1
        fired = True
    return fired


def _fire_reflect(st: SolverState, nid: int, allow_derived: bool) -> bool:
    node = st.nodes[nid]
    if nid in st.reflect_done_nodes:
        return False
    fi = st.env.funs.get(node.head)
    if fi is None or not fi.is_reflected:
        return False
    if not allow_derived and nid not in st.active:
        return False
    sel = _select_clause(st, fi, node.args)
    if sel is None:
        return False
    st.reflect_done_nodes.add(nid)
    key = (node.head, tuple(st.find(a) for a in node.args))
    if key in st.reflect_done_keys:
        return False
    st.reflect_done_keys.add(key)
    clause, binding = sel
    value = fi.value_term(clause)
    rhs = st.intern_term(value, active=st.ple and allow_derived, subst=binding)
    if st.find(nid) == st.find(rhs):
        return False
    st.merge(nid, rhs)
    st.stats["reflect"] += 1
    return True


def _saturate(st: SolverState, allow_derived: bool, max_rounds: Optional[int]) -> SolverState:
    rounds = 0
    while not st.contradiction:
        if max_rounds is not None and rounds >= max_rounds:
            st.fuel_exhausted = True
            break
        rounds += 1
        changed = False
        snapshot = len(st.nodes)
        for nid in range(snapshot):
            if st.contradiction:
                break
            node = st.nodes[nid]
            if node.kind == "con":
                changed |= _fire_measures(st, nid)
            elif node.kind == "app":
                changed |= _fire_reflect(st, nid, allow_derived)
        changed |= st._pinch()
        st.checkpoint()
        if not changed and len(st.nodes) == snapshot:
            break
    return st


def instantiate_axioms(st: SolverState, env: Optional[TypeEnv] = None) -> SolverState:
    """Fixpoint of the MEASURE rule plus one REFLECT unfolding for each
    syntactically present application whose clause selection is decided."""
    return _saturate(st, allow_derived=False, max_rounds=None)


def ple_saturate(st: SolverState, env: Optional[TypeEnv] = None,
                 fuel: Optional[int] = None) -> SolverState:
    """Iterate instantiation, letting REFLECT fire on applications created by
    previous unfoldings, for at most `fuel` rounds."""
    if fuel is None:
        fuel = st.ple_fuel
    if fuel <= 0:
        return st
    return _saturate(st, allow_derived=True, max_rounds=fuel)


def _intern_goal(st: SolverState, goal: Pred) -> None:
    for t in pred_terms(goal):
        st.intern_term(t, active=st.ple)


def _holds(st: SolverState, p: Pred) -> bool:
    if st.contradiction:
        return True
    if isinstance(p, PTrue):
        return True
    if isinstance(p, PFalse):
        return False
    if isinstance(p, PAnd):
        return all(_holds(st, q) for q in p.items)
    if isinstance(p, POr):
        return any(_holds(st, q) for q in p.items)
    if isinstance(p, PNot):
        return _holds(st, negate_pred(p))
    assert isinstance(p, PAtom)
    a = st.intern_term(p.lhs)
    b = st.intern_term(p.rhs)
    rel = p.rel
    if rel == "==":
        if st.find(a) == st.find(b):
            return True
        if st._is_int(a) and st._is_int(b):
            coeffs, const = st._lin_diff(a, b)
            return st.lia.entails(coeffs, const, "==")
        return False
    if rel == "/=":
        ta, tb = st.tag.get(st.find(a)), st.tag.get(st.find(b))
        if ta is not None and tb is not None:
            na, nb = st.nodes[ta], st.nodes[tb]
            if na.kind != nb.kind or na.head != nb.head:
                return True
        if st._is_int(a) and st._is_int(b):
            coeffs, const = st._lin_diff(a, b)
            return not st.lia.feasible(((coeffs, const, "=="),))
        return False
    if rel == ">=":
        a, b, rel = b, a, "<="
    elif rel == ">":
        a, b, rel = b, a, "<"
    coeffs, const = st._lin_diff(a, b)
    return st.lia.entails(coeffs, const, rel)


def entails(st: SolverState, facts: list[Pred], goal: Pred) -> bool:
    """True only if the goal holds in every model of the facts (sound; the
    arithmetic fragment is incomplete for integers)."""
    _intern_goal(st, goal)
    for f in facts:
        assert_fact(st, f)
    if st.ple:
        ple_saturate(st)
    else:
        instantiate_axioms(st)
    return _holds(st, goal)
