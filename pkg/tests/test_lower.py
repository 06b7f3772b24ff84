from __future__ import annotations

import itertools
import random
from fractions import Fraction

import numpy as np
import pytest

from focmod.logic import BINARY, desugar, parse_formula, syntax as S
from focmod.logic.evaluator import evaluate
from focmod.logic.generate import FormulaGenerator, GenConfig
from focmod.logic.linear import eval_qf
from focmod.logic.parser import parse_sentence_file
from focmod.lower import (CompileError, build_count_layer, cancel_residual, compile_chi, compile_psi,
                          compile_sentence, concat, integer_atom, mask_cls)
from focmod.lower.compiler import CONSTRUCTION, atom_layer, empty_fragment
from focmod.lower.probe import count_inputs, run_ffn, run_fragment, run_layers
from focmod.normal_form import normalize
from focmod.transformer.executor import classify, encode, feed_forward
from focmod.transformer.model import FFN
from focmod.transformer.weights import W
from focmod.difftest import fixture_path

TOL = 1e-9
ALPHAS = (1, Fraction(1, 2), Fraction(1, 7), Fraction(1, 1000))


def P(text):
    return parse_formula(text, BINARY)


def fixture(name):
    return parse_sentence_file(fixture_path(name).read_text()).formula


def truth(frag, w):
    return run_fragment(frag, w)[frag.truth]


def test_letter_and_conjunction_fragments():
    assert np.allclose(truth(compile_psi(P("Q_1(p)"), BINARY), "01")[1:], [0, 1], atol=TOL)
    f = mask_cls(compile_psi(P("Q_1(p)"), BINARY))
    assert np.allclose(truth(f, "01"), [0, 0, 1], atol=TOL)
    g = compile_psi(P("Q_0(p) & MOD(0,2,p)"), BINARY)
    assert np.allclose(truth(g, "00")[1:], [0, 1], atol=TOL)


def test_mod_gadget_examples():
    f = compile_psi(P("MOD(1,5,p)"), BINARY)
    t = truth(f, "0" * 11)
    for p in (1, 6, 11):
        assert abs(t[p] - 1) < TOL
    for p in (2, 3, 4, 5, 7):
        assert abs(t[p]) < TOL
    assert compile_psi(P("MOD(0,1,p)"), BINARY).layers == []


def test_mod_gadget_small_range():
    w = "0" * 300
    for m in range(1, 13):
        for r in range(m):
            t = truth(compile_psi(S.mod(r, m, "p"), BINARY), w)
            expect = np.array([1.0 if p % m == r else 0.0 for p in range(len(w) + 1)])
            assert np.max(np.abs(t[1:] - expect[1:])) < TOL, (r, m)


def test_mask_cls_examples():
    t = truth(mask_cls(compile_psi(S.true(), BINARY)), "011")
    assert np.allclose(t, [0, 1, 1, 1], atol=TOL)
    unmasked = compile_psi(P("MOD(0,5,p)"), BINARY)
    assert abs(truth(unmasked, "0")[0] - 1) < TOL
    assert abs(truth(mask_cls(unmasked), "0")[0]) < TOL
    assert np.allclose(truth(mask_cls(unmasked), ""), [0], atol=TOL)


def test_concat_stacks_outputs():
    f0, f1 = compile_psi(P("Q_0(p)"), BINARY), compile_psi(P("Q_1(p)"), BINARY)
    both = concat(f0, f1)
    A = run_fragment(both, "01")
    assert np.allclose(A[f0.truth, 1:], [1, 0], atol=TOL)
    assert np.allclose(A[both.truth, 1:], [0, 1], atol=TOL)
    for w in BINARY.strings(4):
        a, b, c = run_fragment(f0, w), run_fragment(f1, w), run_fragment(both, w)
        assert np.allclose(c, np.vstack([a, b]), atol=TOL)
    assert concat(f0, empty_fragment(BINARY, 0)).d == f0.d


def test_cancel_residual_dense_identity():
    rng = np.random.default_rng(0)
    for d in range(1, 5):
        dff = 3
        ffn = FFN([[W(Fraction(int(x), 3)) for x in row] for row in rng.integers(-3, 4, (dff, d))],
                  [W(int(x)) for x in rng.integers(-2, 3, dff)],
                  [[W(Fraction(int(x), 2)) for x in row] for row in rng.integers(-3, 4, (d, dff))],
                  [W(int(x)) for x in rng.integers(-2, 3, d)])
        minus = cancel_residual(ffn)
        assert len(minus.w1) == dff + 2 * d
        A = rng.normal(size=(d, 50)) * 5
        assert np.max(np.abs(feed_forward(minus, A) + A - feed_forward(ffn, A))) < 1e-12


def test_cancel_residual_relu_example():
    ffn = FFN([[W(1)]], [W(0)], [[W(1)]], [W(0)])
    A = np.array([[-1.0, 0.0, 1.0]])
    assert (feed_forward(cancel_residual(ffn), A) + A).tolist() == [[0.0, 0.0, 1.0]]


def test_count_layer_tail():
    psis = [mask_cls(compile_psi(P(t), BINARY)) for t in ("Q_0(p)", "Q_1(p)")]
    frag, meta = build_count_layer(psis, BINARY)
    A = run_fragment(frag, "0011")
    assert np.allclose(A[meta.count_slots], np.array([[2 / 5], [2 / 5], [1 / 5]]) * np.ones((1, 5)), atol=TOL)
    A = run_fragment(frag, "")
    assert np.allclose(A[meta.count_slots, 0], [0, 0, 1], atol=TOL)
    frag0, meta0 = build_count_layer([], BINARY)
    assert np.allclose(run_fragment(frag0, "01")[meta0.count_slots], [[1 / 3] * 3], atol=TOL)


def gadget_out(op, coeffs, c0, xs, alpha):
    k = len(coeffs)
    A = count_inputs(xs, float(alpha), k + 1)
    return run_ffn(atom_layer(op, coeffs, c0), k + 1, A)[k, 0]


@pytest.mark.parametrize("alpha", ALPHAS)
def test_atom_gadgets_all_alphas(alpha):
    a = float(alpha)
    for u in range(-10, 11):
        assert abs(gadget_out(">", [1], 0, [u], alpha) - (a if u > 0 else -a)) <= TOL * a
        assert abs(gadget_out("=", [1], 0, [u], alpha) - (a if u == 0 else -a)) <= TOL * a


def test_integer_atom_normalization():
    op, coeffs, c0 = integer_atom(P("1/2*x < y + 1/3"), ("x", "y"))
    assert (op, coeffs, c0) == (">", [-3, 6], 2)
    assert integer_atom(P("x = 2*y"), ("x", "y")) == ("=", [1, -2], 0)


def test_chi_example_and_alpha_independence():
    chi = P("x1 = x2")
    frag = compile_chi(chi, ("x1", "x2"), BINARY)
    out = run_layers(frag, count_inputs([2, 2], 0.2, frag.d))
    assert abs(out[-1, 0] - 0.2) < TOL
    rng = random.Random(0)
    gen = FormulaGenerator(5, config=GenConfig(depth=3, sugar=False))
    xs = ("x1", "x2")
    for _ in range(15):
        chi = normalize(S.exists("x1", S.exists("x2", S.and_(
            S.count_eq("x1", "p", S.letter("0", "p")), S.count_eq("x2", "p", S.letter("1", "p")))))).chi
        body = desugar(gen.formula(2, (), xs))
        chi = S.conj([chi, body]) if S.is_quantifier_free(body) else chi
        frag = compile_chi(chi, xs, BINARY)
        for _ in range(5):
            vals = [rng.randint(0, 6), rng.randint(0, 6)]
            want = eval_qf(chi, {x: Fraction(v) for x, v in zip(xs, vals)})
            for alpha in ALPHAS:
                a = float(alpha)
                got = run_layers(frag, count_inputs(vals, a, frag.d))[-1, 0]
                assert abs(got - (a if want else -a)) <= TOL * a


def test_compile_sentence_examples():
    item3 = compile_sentence(fixture("item3_equal_counts.foc"), BINARY)
    c = classify(item3, "0011")
    assert c.accept and abs(c.margin - 1 / 5) < TOL
    c = classify(item3, "001")
    assert not c.accept and abs(c.margin + 1 / 4) < TOL
    maj = compile_sentence(fixture("majority.foc"), BINARY)
    c = classify(maj, "110")
    assert c.accept and abs(c.margin - 1 / 4) < TOL
    alt = compile_sentence(fixture("alt01.foc"), BINARY)
    assert classify(alt, "0101").accept and not classify(alt, "0011").accept


def test_model_meta_and_no_layer_norm():
    m = compile_sentence(fixture("item3_equal_counts.foc"), BINARY)
    assert m.meta["truth_channel"] == m.d - 1
    assert m.meta["construction"] == CONSTRUCTION
    assert m.meta["k"] == 2 and len(m.meta["psi"]) == 2
    assert all(layer.ln1 is None and layer.ln2 is None for layer in m.layers)
    assert [float(x) for x in m.out_w] == [0.0] * (m.d - 1) + [1.0] and float(m.out_b) == 0


def test_boolean_channels_after_psi_layers():
    m = compile_sentence(fixture("item2_alternating.foc"), BINARY)
    ch = m.meta["channels"]
    for w in BINARY.strings(5):
        trace = []
        encode(m, w, trace)
        A = trace[ch["psi_depth"]]
        vals = A[ch["psi_channels"]]
        assert np.all(np.minimum(np.abs(vals), np.abs(vals - 1)) < TOL)
        assert np.all(np.abs(vals[:, 0]) < TOL)  # masked at CLS


def test_constant_sentences_compile():
    for text, want in (("E x. x < 0", True), ("A x. x < 0", False)):
        m = compile_sentence(P(text), BINARY)
        for w in BINARY.strings(3):
            c = classify(m, w)
            assert c.accept == want and abs(abs(c.margin) - 1 / (len(w) + 1)) < TOL


def test_random_sentences_match_evaluator():
    gen = FormulaGenerator(21, config=GenConfig(depth=3))
    for _ in range(15):
        f = gen.sentence()
        m = compile_sentence(f, BINARY)
        for w in BINARY.strings(5):
            c = classify(m, w)
            assert c.accept == evaluate(f, w)
            assert abs(abs(c.margin) - 1 / (len(w) + 1)) < TOL


def test_psi_preconditions():
    with pytest.raises(CompileError):
        compile_psi(P("x < 1"), BINARY)
    with pytest.raises(CompileError):
        compile_chi(P("Q_0(p)"), (), BINARY)


def test_margin_sign_independent_of_string_order():
    m = compile_sentence(fixture("item3_equal_counts.foc"), BINARY)
    for w in itertools.permutations("0011"):
        assert classify(m, w).accept
