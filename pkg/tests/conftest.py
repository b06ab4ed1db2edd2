from __future__ import annotations

import pathlib

import pytest

from eqcheck.checker import check_module
from eqcheck.parser import parse_module, parse_pred, parse_term
from eqcheck.syntax import desugar, desugar_pred, desugar_term
from eqcheck.types import check_types

ROOT = pathlib.Path(__file__).resolve().parents[1]
CORPUS = ROOT / "corpus"

LIST_BASICS = """\
measure length
length : xs:(List a) -> {v:Int | 0 <= v}
length [] = 0
length (_:xs) = 1 + length xs

reflect append
append : xs:(List a) -> ys:(List a) -> {zs:(List a) | length zs == length xs + length ys}
append [] ys = ys
append (x:xs) ys = x : append xs ys

reflect reverse
reverse : xs:(List a) -> List a
reverse [] = []
reverse (x:xs) = append (reverse xs) [x]
"""


def corpus_text(name: str) -> str:
    return (CORPUS / name).read_text()


def env_of(source: str):
    return check_types(desugar(parse_module(source)))


def term(src: str):
    return desugar_term(parse_term(src))


def pred(src: str):
    return desugar_pred(parse_pred(src))


@pytest.fixture(scope="session")
def list_env():
    return env_of(LIST_BASICS)


@pytest.fixture(scope="session")
def section2_report():
    return check_module(corpus_text("section2.eq"), file="section2.eq")


@pytest.fixture(scope="session")
def section4_report():
    return check_module(corpus_text("section4.eq"), file="section4.eq")


@pytest.fixture(scope="session")
def section5_report():
    return check_module(corpus_text("section5.eq"), file="section5.eq")


@pytest.fixture(scope="session")
def section2_ple_report():
    return check_module(corpus_text("section2_ple.eq"), file="section2_ple.eq")
