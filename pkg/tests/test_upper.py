from __future__ import annotations

import itertools
import random
from fractions import Fraction

import pytest

from focmod.logic import BINARY, CLS, syntax as S
from focmod.logic.evaluator import Evaluator, evaluate
from focmod.transformer.model import FFN, Head, Layer, PEChannel, TransformerModel
from focmod.transformer.weights import ONE, ZERO, W
from focmod.upper import (ExtraPrecision, ModelShape, Precision, UpperCompiler, bit_of, compile_model,
                          compile_model_with_stats, fixed_exec, lift_function, random_model, round_to_fixed)
from focmod.upper.compiler import decode_extra
from focmod.upper.lift import const_scalar


def tiny_model(we_cls, we0, we1, wv=ONE, out_w=ONE, out_b=ZERO):
    layer = Layer([Head([[ZERO]], [[ZERO]], [[wv]])], FFN([[ZERO]], [ZERO], [[ZERO]], [ZERO]))
    return TransformerModel(BINARY, 1, {CLS: [we_cls], "0": [we0], "1": [we1]}, [PEChannel("zero")], [layer],
                            [out_w], out_b)


def bits_value(sc, w, prec):
    ev = Evaluator(tuple(w))
    return prec.from_bits([1 if ev.holds(f) else 0 for f in sc])


def key_scalar(vals, prec, var="k"):
    # bit j at position q (q < 4) follows the q-th value
    return tuple(S.disj([S.mod(q, 4, var) for q, v in enumerate(vals, 1) if prec.to_bits(v)[j]])
                 for j in range(prec.bits))


# --- numbers ------------------------------------------------------------------------------

def test_bit_of_examples():
    assert [bit_of(k, Fraction(3)) for k in range(3)] == [1, 1, 0]
    assert [bit_of(k, Fraction(-3, 2)) for k in (-1, 0, 1)] == [1, 0, 1]
    with pytest.raises(ValueError):
        bit_of(2, Fraction(1), Precision(1, 1))


def test_bit_reconstruction_and_sign():
    for r, s in ((1, 1), (2, 2), (0, 3)):
        prec = Precision(r, s)
        for i in prec.values():
            x = Fraction(i, prec.scale)
            bits = [bit_of(k, x) for k in range(-s, r + 1)]
            assert x == -bits[-1] * 2 ** r + sum(b * Fraction(2) ** k for b, k in zip(bits, range(-s, r)))
            assert (bits[-1] == 1) == (x < 0)
            assert tuple(bits) == prec.to_bits(i) and prec.from_bits(bits) == i


def test_round_to_fixed_examples():
    assert float(round_to_fixed(Fraction(13, 10), 2, 2)) == 1.25
    assert float(round_to_fixed(10, 2, 2)) == 3.75
    assert float(round_to_fixed(Fraction(1, 8), 2, 2)) == 0.0
    assert float(round_to_fixed(Fraction(3, 8), 2, 2)) == 0.5
    assert float(round_to_fixed(-10, 2, 2)) == -4.0


def test_extra_precision_digits():
    x = ExtraPrecision.from_fraction(Fraction(17, 12), 1, 2, 3)
    assert x.digits() == "01.012"
    assert x.extra == 2 and float(x.fixed) == 1.25
    assert ExtraPrecision.from_fraction(Fraction(-17, 12), 1, 2, 3).digits() == "10.101"


# --- fixed-precision execution ---------------------------------------------------------------

def test_fixed_exec_zero_model_accepts():
    m = tiny_model(ZERO, ZERO, ZERO, wv=ZERO, out_w=ZERO)
    for w in BINARY.strings(3):
        run = fixed_exec(m, w, 1, 2)
        assert run.accept and run.output.value == 0
        assert all(x.value == 0 for stage in run.trace for row in stage for x in row)


def test_fixed_exec_truncated_average():
    m = tiny_model(ONE, ZERO, ONE)
    run = fixed_exec(m, "01", 1, 2)
    # context floor(4 * 2/3) / 4 = 1/2, plus the residual
    assert [float(x) for x in run.trace[1][0]] == [1.5, 0.5, 1.5]
    accept, trace = run
    assert accept and len(trace) == 2


def test_fixed_exec_constant_values_average_exactly():
    m = tiny_model(W(Fraction(3, 4)), W(Fraction(3, 4)), W(Fraction(3, 4)))
    for w in BINARY.strings(3):
        assert all(float(x) == 1.5 for x in fixed_exec(m, w, 1, 2).trace[1][0])


# --- lifting ---------------------------------------------------------------------------------

def test_lift_relu_examples():
    prec = Precision(1, 1)
    relu = lambda i: max(i, 0)
    assert all(f is S.false() for f in lift_function(relu, [const_scalar(-2, prec)], prec))
    assert lift_function(relu, [const_scalar(3, prec)], prec) == (S.true(), S.true(), S.false())


def test_lift_identity_and_binary():
    prec = Precision(1, 1)
    xs = (S.letter("1", "p"), S.mod(0, 2, "p"), S.letter("0", "p"))
    ident = lift_function(lambda i: i, [xs], prec)
    ys = (S.mod(1, 3, "p"), S.false(), S.letter("1", "p"))
    add = lift_function(lambda a, b: prec.clamp(a + b), [xs, ys], prec)
    for w in BINARY.strings(4):
        for p in range(1, len(w) + 1):
            val = lambda sc: prec.from_bits([int(evaluate(f, w, penv={"p": p})) for f in sc])
            assert val(ident) == val(xs)
            assert val(add) == prec.clamp(val(xs) + val(ys))


def test_input_layer_without_pe_has_no_mod_atoms():
    m = tiny_model(ONE, ZERO, W(Fraction(1, 2)))
    uc = UpperCompiler(Precision(1, 1))
    from focmod.upper.pipeline import round_model
    fam = uc.define_input_layer(round_model(m, uc.prec))[0]
    assert all(n.kind != S.MOD for f in fam.pos for n in S.iter_nodes(f))
    assert fam.pos[0] == S.letter("1", "p") and fam.pos[1] is S.false()


# --- extra precision families ------------------------------------------------------------------

def test_extra_examples():
    prec = Precision(1, 2)
    uc = UpperCompiler(prec, "chain")
    a = uc.constant_extra(ExtraPrecision.from_fraction(Fraction(17, 12), 1, 2, 3))
    b = uc.constant_extra(ExtraPrecision.from_fraction(Fraction(1, 12), 1, 2, 3))
    assert decode_extra(uc.extra_add(a, b), "00", prec).as_fraction() == Fraction(3, 2)
    assert decode_extra(uc.extra_negate(a), "00", prec).digits() == "10.101"
    c = uc.constant_extra(ExtraPrecision.from_fraction(Fraction(3, 4), 1, 2, 3))
    neg = decode_extra(uc.extra_negate(c), "00", prec)
    assert neg.extra == 0 and neg.as_fraction() == Fraction(-3, 4)


def test_extra_add_and_negate_exhaustive_small():
    # (r, s, n') = (1, 1, 2): every in-range pair
    prec = Precision(1, 1)
    bound = 4 * 2
    for a, b in itertools.product(range(-bound, bound), repeat=2):
        uc = UpperCompiler(prec, "chain")
        fa, fb = (uc.constant_extra(ExtraPrecision(1, 1, 2, v)) for v in (a, b))
        if -bound <= a + b < bound:
            assert decode_extra(uc.extra_add(fa, fb), "0", prec).value == a + b
    for a in range(-bound + 1, bound):
        uc = UpperCompiler(prec, "chain")
        assert decode_extra(uc.extra_negate(uc.constant_extra(ExtraPrecision(1, 1, 2, a))), "0", prec).value == -a


def test_extra_add_commutative_associative():
    prec = Precision(1, 1)
    rng = random.Random(0)
    ok = lambda *vs: all(-8 <= v < 8 for v in vs)
    for _ in range(30):
        a, b, c = (rng.randint(-8, 7) for _ in range(3))
        if not ok(a + b, b + c, a + c, a + b + c):
            continue
        uc = UpperCompiler(prec, "chain")
        fa, fb, fc = (uc.constant_extra(ExtraPrecision(1, 1, 2, v)) for v in (a, b, c))
        left = decode_extra(uc.extra_add(uc.extra_add(fa, fb), fc), "0", prec)
        right = decode_extra(uc.extra_add(fa, uc.extra_add(fc, fb)), "0", prec)
        assert left == right and left.value == a + b + c


def average_of(tup, mode, prec):
    uc = UpperCompiler(prec, mode)
    n = len(tup) - 1
    w = "0" * n
    if mode == "chain":
        fam = uc.define_average(key_scalar(tup[1:], prec), const_scalar(tup[0], prec), "k")
        return 0 if fam is None else decode_extra(fam, w, prec).value
    return bits_value(uc.define_average_direct(key_scalar(tup[1:], prec), const_scalar(tup[0], prec), "k"), w, prec)


def test_define_average_examples():
    prec = Precision(1, 2)
    assert average_of((4, 4, 4), "chain", prec) == 12  # 1 exactly
    assert average_of((4, 0, 4), "chain", prec) == 8  # 2/3 = 8/12
    assert average_of((5,), "chain", prec) == 5
    assert average_of((4, 0, 4), "direct", prec) == 2  # floor(4 * 2/3)


def test_define_average_exact_over_f11():
    prec = Precision(1, 1)
    rng = random.Random(1)
    for n in range(4):
        tuples = list(itertools.product(prec.values(), repeat=n + 1))
        if n == 3:
            tuples = rng.sample(tuples, 200)
        for tup in tuples:
            assert average_of(tup, "chain", prec) == sum(tup), tup


def test_define_average_direct_over_f11():
    prec = Precision(1, 1)
    for n in range(4):
        for tup in itertools.product(prec.values(), repeat=n + 1):
            assert average_of(tup, "direct", prec) == sum(tup) // (n + 1), tup


# --- whole models ------------------------------------------------------------------------------

def test_zero_model_compiles_to_true():
    m = tiny_model(ZERO, ZERO, ZERO, wv=ZERO, out_w=ZERO)
    for mode in ("direct", "chain"):
        assert compile_model(m, 1, 2, mode) is S.true()


def test_tiny_model_agrees_both_modes():
    m = tiny_model(ONE, ZERO, ONE, out_b=W(-1))
    for mode in ("direct", "chain"):
        f = compile_model(m, 1, 2, mode)
        for w in BINARY.strings(5):
            assert evaluate(f, w) == fixed_exec(m, w, 1, 2).accept, (mode, w)


@pytest.mark.parametrize("seed", range(4))
def test_random_models_agree(seed):
    m = random_model(seed, ModelShape(d=2, layers=1, d_k=1, d_ff=2))
    f, stats = compile_model_with_stats(m, 2, 2)
    assert stats.nodes == S.dag_size(f) and stats.nodes < 500_000
    for w in BINARY.strings(5):
        assert evaluate(f, w) == fixed_exec(m, w, 2, 2).accept, w


def test_chain_mode_random_model():
    m = random_model(1, ModelShape(d=2, layers=1, d_k=1, d_ff=2))
    f = compile_model(m, 1, 1, "chain")
    for w in BINARY.strings(4):
        assert evaluate(f, w) == fixed_exec(m, w, 1, 1).accept, w


def test_unknown_average_mode():
    with pytest.raises(ValueError):
        UpperCompiler(Precision(1, 1), "fast")
