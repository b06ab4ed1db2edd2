from eqcheck.checker import (
    CheckConfig, build_decl_obligations, check_function, check_module,
    check_proof, clause_context, lemma_facts,
)
from eqcheck.semantics import evaluate
from eqcheck.syntax import pretty_pred
from eqcheck.parser import parse_term
from eqcheck.syntax import desugar_term

from conftest import LIST_BASICS, corpus_text, env_of, term
from oracles import check_chain_coherence


def facts_text(facts):
    return {pretty_pred(f) for f in facts}


# ------------------------------------------------------------ clause_context

def test_append_cons_clause_context(list_env):
    facts = facts_text(clause_context(list_env.fun("append"), 1, list_env))
    assert "xs == x : xs'" in facts  # pattern information
    # the recursive call's refinement: the inductive hypothesis
    assert "length (append xs' ys) == length xs' + length ys" in facts


def test_involution_context_contains_ih():
    env = env_of(corpus_text("section2.eq"))
    facts = facts_text(clause_context(env.fun("involutionP"), 1, env))
    assert "reverse (reverse xs') == xs'" in facts


def test_wildcard_clause_context_has_only_pattern_facts(list_env):
    env = env_of("konst : x:Int -> ys:(List a) -> Int\nkonst _ ys = 7\n")
    facts = facts_text(clause_context(env.fun("konst"), 0, env))
    assert facts == {"x == _w"}


def test_lemma_facts_instantiation():
    env = env_of(corpus_text("section2.eq"))
    fact = lemma_facts(env.fun("singletonP"), (desugar_term(parse_term("1")),))
    assert pretty_pred(fact) == "reverse (1 : []) == 1 : []"


def test_lemma_facts_assoc_instance():
    env = env_of(corpus_text("section2.eq"))
    args = tuple(term(s) for s in ["reverse ys", "reverse xs", "[x]"])
    fact = lemma_facts(env.fun("assocP"), args)
    assert pretty_pred(fact) == (
        "append (reverse ys) (append (reverse xs) (x : [])) == "
        "append (append (reverse ys) (reverse xs)) (x : [])")


def test_lemma_facts_sequence_instance():
    env = env_of(corpus_text("section5.eq"))
    args = tuple(term(s) for s in ["c", "d", "n : s"])
    fact = lemma_facts(env.fun("sequenceP"), args)
    assert pretty_pred(fact) == (
        "exec (append c d) (n : s) == bindExec (exec c (n : s)) d")


# --------------------------------------------------------------- check_function

def test_length_both_clauses_proved(list_env):
    verdicts = check_function(list_env.fun("length"), list_env)
    assert [v.status for v in verdicts] == ["proved", "proved"]


def test_append_refinement_proved(list_env):
    verdicts = check_function(list_env.fun("append"), list_env)
    assert all(v.proved for v in verdicts)


def test_append_wrong_refinement_fails():
    src = LIST_BASICS.replace("length zs == length xs + length ys",
                              "length zs == length xs")
    env = env_of(src)
    verdicts = check_function(env.fun("append"), env)
    failing = [v for v in verdicts if not v.proved]
    # countermodel xs=[], ys=[0] falsifies the statement, landing in the
    # clause that handles xs=[] (the 'cons' step is inductively consistent)
    assert [v.oid for v in failing] == ["append/c0/vc"]
    cm = {"xs": ("Nil",), "ys": ("Cons", 0, ("Nil",))}
    lhs = evaluate(env, term("length (append xs ys)"), binding=dict(cm))
    rhs = evaluate(env, term("length xs"), binding=dict(cm))
    assert lhs != rhs


# ----------------------------------------------------------------- check_proof

def test_singletonp_obligations():
    env = env_of(corpus_text("section2.eq"))
    verdicts = check_proof(env.fun("singletonP"), env)
    kinds = [(v.kind, v.status) for v in verdicts]
    assert kinds == [("chain-step", "proved")] * 3 + [("clause-vc", "proved")]


def test_mutated_singletonp_step_fails():
    src = corpus_text("section2.eq").replace(
        "  ==. [x]\n  *** QED", "  ==. x : (x : [])\n  *** QED", 1)
    env = env_of(src)
    verdicts = check_proof(env.fun("singletonP"), env)
    failing = [v for v in verdicts if not v.proved]
    assert [v.oid for v in failing] == ["singletonP/c0/step3"]
    # evaluator countermodel x = 0
    lhs = evaluate(env, term("append [] [x]"), binding={"x": 0})
    rhs = evaluate(env, term("x : (x : [])"), binding={"x": 0})
    assert lhs != rhs


def test_involution_proof_accepted():
    env = env_of(corpus_text("section2.eq"))
    assert all(v.proved for v in check_proof(env.fun("involutionP"), env))


def test_derivation_goal_uses_last_rhs():
    env = env_of(corpus_text("section4.eq"))
    obs, _ = build_decl_obligations(env.fun("reverseApp"), env, CheckConfig())
    vc = next(ob for ob in obs if ob.oid == "reverseApp/c1/vc")
    assert pretty_pred(vc.goal) == "reverseApp xs' (x : ys) == append (reverse xs) ys"


def test_aligned_variables_keep_their_names(list_env):
    facts = facts_text(clause_context(list_env.fun("append"), 1, list_env))
    assert "xs == x : xs'" in facts
    assert "length (append xs' ys) == length xs' + length ys" in facts


# ------------------------------------------------------------------ hint modes

HINT_AFTER_NEEDING_STEP = LIST_BASICS + """\

rightIdP : xs:(List a) -> {v:Proof | append xs [] == xs}
rightIdP []
  =   append [] []
  ==. []
  *** QED
rightIdP (x:xs)
  =   append (x:xs) []
  ==. x : xs
  ==. x : xs
      ? rightIdP xs
  *** QED
"""


def test_hint_placement_immaterial_by_default():
    report = check_module(HINT_AFTER_NEEDING_STEP)
    assert report.ok


def test_strict_hints_reject_late_hint():
    # step 1 needs the inductive hypothesis, which is attached to step 2
    strict = check_module(HINT_AFTER_NEEDING_STEP, CheckConfig(strict_hints=True))
    assert not strict.ok
    assert {v.oid for v in strict.failed()} == {"rightIdP/c1/step1"}


def test_hint_permutations_keep_verdicts():
    base = corpus_text("section2.eq")
    moved = base.replace(
        "  ==. x : append xs []\n      ? rightIdP xs\n  ==. x : xs",
        "  ==. x : append xs []\n  ==. x : xs\n      ? rightIdP xs")
    assert moved != base
    r1, r2 = check_module(base), check_module(moved)
    assert r1.ok and r2.ok
    assert [(v.oid, v.status) for v in r1.verdicts] == [(v.oid, v.status) for v in r2.verdicts]


def test_unused_hint_warning():
    src = LIST_BASICS + """\

trivP : x:a -> {v:Proof | [x] == [x]}
trivP x
  =   [x]
  ==. [x]
      ? singleLemma x
  *** QED

singleLemma : x:a -> {v:Proof | reverse [x] == [x]}
singleLemma x
  =   reverse [x]
  ==. append (reverse []) [x]
  ==. append [] [x]
  ==. [x]
  *** QED
"""
    report = check_module(src)
    assert report.ok
    assert any("trivP" in w and "unused" in w for w in report.warnings)


# -------------------------------------------------------------- module driver

def test_empty_module_report():
    report = check_module("")
    assert report.ok and report.verdicts == []


def test_loop_isolation():
    src = LIST_BASICS + "\nloop : xs:(List a) -> List a\nloop xs = loop xs\n"
    report = check_module(src)
    assert not report.ok
    bad = {v.decl for v in report.failed()}
    assert bad == {"loop"}
    assert any(v.decl == "append" and v.proved for v in report.verdicts)


def test_users_of_failed_decl_blocked():
    src = LIST_BASICS + """\

loop : xs:(List a) -> List a
loop xs = loop xs

usesLoop : xs:(List a) -> List a
usesLoop xs = loop xs
"""
    report = check_module(src)
    kinds = {v.decl: v.kind for v in report.failed()}
    assert kinds == {"loop": "termination", "usesLoop": "blocked"}


def test_deterministic_across_jobs():
    src = corpus_text("section5.eq")
    r1 = check_module(src, CheckConfig(jobs=1))
    r4 = check_module(src, CheckConfig(jobs=4))
    assert [(v.oid, v.status) for v in r1.verdicts] == [(v.oid, v.status) for v in r4.verdicts]


def test_fuel_exhausted_verdict():
    src = LIST_BASICS + """\

ple invP
invP : x:a -> {v:Proof | reverse (reverse [x]) == [x]}
invP x = ()
"""
    assert check_module(src).ok
    starved = check_module(src, CheckConfig(ple_fuel=1))
    assert [v.status for v in starved.failed()] == ["fuel-exhausted"]


# ------------------------------------------------------------------- coherence

def test_chain_coherence_smoke():
    env = env_of(corpus_text("section2.eq"))
    n = check_chain_coherence(env, env.fun("rightIdP"), size=4)
    assert n > 0
    check_chain_coherence(env, env.fun("singletonP"), size=4)
