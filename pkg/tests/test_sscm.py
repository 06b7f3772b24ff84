from __future__ import annotations

import random

import pytest

from focmod.difftest import fixture_path
from focmod.logic import BINARY, Alphabet, render_formula, syntax as S
from focmod.logic.evaluator import evaluate
from focmod.logic.parser import parse_sentence_file
from focmod.lower import compile_sentence
from focmod.sscm import (Sscm, SscmError, format_sscm, parse_sscm, permutation_invariant, random_sscm, sscm_run,
                         sscm_to_sentence)
from focmod.transformer.executor import classify


def equal_counts(mask=(0,)):
    return Sscm(BINARY, 1, {"0": (1,), "1": (-1,)}, mask)


def test_run_examples():
    m = equal_counts()
    assert sscm_run(m, "0011").accept and sscm_run(m, "0011").counters == (0,)
    accept, counters = sscm_run(m, "001")
    assert not accept and counters == (1,)
    assert sscm_run(m, "").accept
    assert sscm_run(equal_counts((1,)), "001").accept
    assert not sscm_run(equal_counts((1,)), "").accept


def test_fixture_file_parses():
    m = parse_sscm(fixture_path("equal_counts.sscm").read_text())
    assert m == equal_counts()
    assert parse_sscm(format_sscm(m)) == m
    assert parse_sscm("alphabet: 0 1\nk: 2\nu 0 1 0\nu 1 0 1\nF: 01\n").mask == (0, 1)


def test_parse_errors():
    with pytest.raises(SscmError):
        parse_sscm("alphabet: 0 1\nk: 1\nu 0 1\nF: 0\n")  # missing update for 1
    with pytest.raises(SscmError):
        parse_sscm("alphabet: 0 1\nk: 1\nu 0 1\nu 1 1 2\nF: 0\n")
    with pytest.raises(SscmError):
        parse_sscm("alphabet: 0 1\nk: 1\nu 0 1\nu 1 1\n")
    with pytest.raises(SscmError):
        sscm_run(equal_counts(), "012")


def test_sentence_for_equal_counts():
    f = sscm_to_sentence(equal_counts())
    assert render_formula(f) == "E x1. E x2. (#[x1] p. Q_0(p) & #[x2] p. Q_1(p) & x1 - x2 = 0)"
    item3 = parse_sentence_file(fixture_path("item3_equal_counts.foc").read_text()).formula
    for w in BINARY.strings(6):
        assert evaluate(f, w) == evaluate(item3, w)


def test_mask_one_is_negated_equation():
    f = sscm_to_sentence(equal_counts((1,)))
    assert any(n.kind == S.NOT for n in S.iter_nodes(f))
    assert evaluate(f, "001") and not evaluate(f, "01")


def test_zero_counters_accept_everything():
    m = Sscm(BINARY, 0, {"0": (), "1": ()}, ())
    f = sscm_to_sentence(m)
    for w in BINARY.strings(4):
        assert evaluate(f, w) and sscm_run(m, w).accept


def test_translation_fidelity_random():
    rng = random.Random(0)
    for _ in range(25):
        m = random_sscm(rng)
        f = sscm_to_sentence(m)
        for w in m.alphabet.strings(5):
            assert evaluate(f, w) == sscm_run(m, w).accept, (format_sscm(m), w)


def test_chain_through_lower_compiler():
    rng = random.Random(1)
    for _ in range(5):
        m = random_sscm(rng, max_symbols=2)
        model = compile_sentence(sscm_to_sentence(m), m.alphabet)
        for w in m.alphabet.strings(4):
            assert classify(model, w).accept == sscm_run(m, w).accept


def test_permutation_invariance():
    rng = random.Random(2)
    for _ in range(300):
        m = random_sscm(rng)
        w = [rng.choice(list(m.alphabet)) for _ in range(rng.randint(0, 10))]
        assert permutation_invariant(m, w, rng)


def test_separation_spot_check():
    # an SSCM accepting 0101 also accepts 0011, unlike the (01)* sentence
    rng = random.Random(3)
    tested = 0
    for _ in range(300):
        m = random_sscm(rng, alphabet=BINARY)
        if sscm_run(m, "0101").accept:
            tested += 1
            assert sscm_run(m, "0011").accept
    assert tested > 0
    alt = parse_sentence_file(fixture_path("alt01.foc").read_text()).formula
    assert evaluate(alt, "0101") and not evaluate(alt, "0011")


def test_three_letter_alphabet():
    ab = Alphabet(["0", "1", "2"])
    m = Sscm(ab, 2, {"0": (1, 0), "1": (-1, 1), "2": (0, -1)}, (0, 0))
    f = sscm_to_sentence(m)
    for w in ab.strings(4):
        assert evaluate(f, w) == sscm_run(m, w).accept
