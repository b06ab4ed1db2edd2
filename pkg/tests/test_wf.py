import itertools

from eqcheck.semantics import Fuel, MatchFailure, enumerate_values, evaluate, value_to_term
from eqcheck.syntax import App, PCon
from eqcheck.wf import (
    NonTermination, TerminationEvidence, call_graph_cycles, check_termination,
    check_totality, clause_leaves, missing_pattern_text,
)
from eqcheck.types import INT, SortData

from conftest import LIST_BASICS, corpus_text, env_of


INVOLUTION_BASE_ONLY = LIST_BASICS + """\

involutionP : xs:(List a) -> {v:Proof | reverse (reverse xs) == xs}
involutionP []
  =   reverse (reverse [])
  ==. reverse []
  ==. []
  *** QED
"""


def test_single_clause_involution_missing_cons():
    env = env_of(INVOLUTION_BASE_ONLY)
    missing = check_totality(env.fun("involutionP"), env)
    assert [missing_pattern_text(r) for r in missing] == ["Cons _ _"]


def test_total_exec_accepted():
    env = env_of(corpus_text("section5.eq"))
    assert check_totality(env.fun("exec"), env) == []


def test_exec_without_catchall_missing():
    src = corpus_text("section5.eq").replace("exec _ _ = Nothing\n", "")
    env = env_of(src)
    missing = {missing_pattern_text(r) for r in check_totality(env.fun("exec"), env)}
    assert missing == {"(Cons ADD _) Nil", "(Cons ADD _) (Cons _ Nil)"}


def test_bool_clauses_total():
    env = env_of("neg : b:Bool -> Bool\nneg true = false\nneg false = true\n")
    assert check_totality(env.fun("neg"), env) == []


def test_int_literals_never_exhaustive():
    env = env_of("iszero : n:Int -> Bool\niszero 0 = true\n")
    missing = check_totality(env.fun("iszero"), env)
    assert missing and missing_pattern_text(missing[0]) == "1"


def test_totality_agrees_with_evaluator():
    # brute force: an input raises MatchFailure iff it matches a missing row
    src = """\
data Shape = Dot | Box Shape Shape

weird : s:Shape -> t:Shape -> Int
weird Dot _ = 0
weird (Box Dot x) Dot = 1
"""
    env = env_of(src)
    fi = env.fun("weird")
    missing = check_totality(fi, env)
    shape = SortData("Shape", ())
    values = enumerate_values(env, shape, 5)

    def matches_row(row, args):
        def m(pat, v):
            if isinstance(pat, PCon):
                return v[0] == pat.name and all(m(p, a) for p, a in zip(pat.args, v[1:]))
            return True
        return all(m(p, v) for p, v in zip(row, args))

    for a, b in itertools.product(values, values):
        try:
            evaluate(env, App("weird", (value_to_term(a), value_to_term(b))))
            failed = False
        except MatchFailure:
            failed = True
        assert failed == any(matches_row(row, (a, b)) for row in missing)


def test_leaves_of_overlapping_clause():
    env = env_of(corpus_text("section5.eq"))
    fi = env.fun("sequenceP")
    leaves = clause_leaves(fi, 3, env)  # the (ADD:c) d s clause
    rows = {missing_pattern_text(l.row) for l in leaves}
    assert rows == {"(Cons ADD c) d Nil", "(Cons ADD c) d (Cons _w Nil)"}


def test_disjoint_clause_has_single_leaf(list_env):
    fi = list_env.fun("append")
    assert len(clause_leaves(fi, 0, list_env)) == 1
    assert len(clause_leaves(fi, 1, list_env)) == 1


# ---------------------------------------------------------------- termination

def test_length_structural(list_env):
    ev = check_termination(list_env.fun("length"), list_env)
    assert ev == TerminationEvidence("structural", (0,))


def test_exec_structural():
    env = env_of(corpus_text("section5.eq"))
    ev = check_termination(env.fun("exec"), env)
    assert isinstance(ev, TerminationEvidence) and ev.kind == "structural"
    assert ev.positions == (0,)


def test_involution_semantic_metric():
    env = env_of(corpus_text("section2.eq"))
    ev = check_termination(env.fun("involutionP"), env)
    assert isinstance(ev, TerminationEvidence)
    assert ev.kind == "semantic" and not ev.guessed
    assert len(ev.metric) == 1


def test_loop_rejected():
    env = env_of("loop : xs:(List a) -> List a\nloop xs = loop xs\n")
    assert isinstance(check_termination(env.fun("loop"), env), NonTermination)


def test_metric_guess_used_when_structure_fails():
    # recursion on a reversed tail is not structural, but length shrinks
    src = LIST_BASICS + """\

churn : xs:(List a) -> Int
churn [] = 0
churn (_:xs) = churn (reverse xs)
"""
    env = env_of(src)
    ev = check_termination(env.fun("churn"), env)
    assert isinstance(ev, NonTermination) or (ev.kind == "semantic" and ev.guessed)


def test_guess_on_int_argument():
    src = """\
count : n:{k:Int | 0 <= k} -> m:Int -> Int
count 0 m = m
count n m = count (n - 1) (m + 1)
"""
    env = env_of(src)
    ev = check_termination(env.fun("count"), env)
    assert isinstance(ev, TerminationEvidence) and ev.kind == "semantic" and ev.guessed


def test_nonrecursive_trivially_terminates(list_env):
    ev = check_termination(list_env.fun("length"), list_env)
    assert isinstance(ev, TerminationEvidence)


def test_lexicographic_second_position():
    src = """\
data Nat = Z | S Nat

ack : m:Nat -> n:Nat -> Nat
ack Z n = S n
ack (S m) Z = ack m (S Z)
ack (S m) (S n) = ack m (ack (S m) n)
"""
    env = env_of(src)
    ev = check_termination(env.fun("ack"), env)
    assert isinstance(ev, TerminationEvidence) and ev.kind == "structural"
    assert ev.positions == (0, 1)


def test_structural_terminates_under_fuel():
    # structural evidence implies bounded unfolding on small inputs
    env = env_of(corpus_text("section2.eq"))
    for fname in ["length", "append", "reverse"]:
        ev = check_termination(env.fun(fname), env)
        assert isinstance(ev, TerminationEvidence)
    lists = enumerate_values(env, SortData("List", (INT,)), 6, ints=(0, 1))
    for v in lists:
        evaluate(env, App("reverse", (value_to_term(v),)), Fuel(10_000))
        evaluate(env, App("length", (value_to_term(v),)), Fuel(10_000))


def test_mutual_recursion_reported():
    src = """\
f : n:Int -> Int
f n = g n

g : n:Int -> Int
g n = f n
"""
    env = env_of(src)
    assert call_graph_cycles(env) == [["f", "g"]]
