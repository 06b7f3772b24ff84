from __future__ import annotations

import json

from focmod.cli import main
from focmod.difftest import fixture_path
from focmod.logic import BINARY
from focmod.logic.evaluator import evaluate
from focmod.logic.parser import parse_sentence_file
from focmod.transformer.model import TransformerModel
from focmod.upper import ModelShape, fixed_exec, random_model

F = fixture_path()


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_eval_examples(capsys):
    assert run(capsys, "eval", F / "item3_equal_counts.foc", "0011")[:2] == (0, "true\n")
    assert run(capsys, "eval", F / "item2_alternating.foc", "01")[:2] == (0, "false\n")
    assert run(capsys, "eval", F / "item3_equal_counts.foc", "--string", "")[1] == "true\n"
    out = run(capsys, "eval", F / "item3_equal_counts.foc", "--all-up-to", "2")[1].splitlines()
    assert len(out) == 7 and out[0] == "ε\ttrue" and "01\ttrue" in out


def test_parse_error_exits_nonzero(capsys, tmp_path):
    bad = tmp_path / "bad.foc"
    bad.write_text("alphabet: 0 1\nE x. (\n")
    code, _, err = run(capsys, "eval", bad, "0")
    assert code == 2 and err.startswith("parse error:")


def test_normalize_writes_sentence_and_sidecar(capsys, tmp_path):
    out = tmp_path / "nf.foc"
    assert run(capsys, "normalize", F / "item4_twice.foc", "-o", out)[0] == 0
    sidecar = json.loads((tmp_path / "nf.foc.json").read_text())
    assert sidecar["k"] == len(sidecar["psi"])
    original = parse_sentence_file((F / "item4_twice.foc").read_text()).formula
    nf = parse_sentence_file(out.read_text()).formula
    for w in BINARY.strings(5):
        assert evaluate(original, w) == evaluate(nf, w)


def test_compile_then_run(capsys, tmp_path):
    model = tmp_path / "maj.json"
    assert run(capsys, "compile", F / "majority.foc", "-o", model)[0] == 0
    assert TransformerModel.loads(model.read_text()).meta["k"] >= 1
    code, out, _ = run(capsys, "run", model, "110", "100")
    assert code == 0 and out.splitlines() == ["110\taccept\tmargin=0.25", "100\treject\tmargin=-0.25"]


def test_uplift_round_trip(capsys, tmp_path):
    m = random_model(2, ModelShape(d=2, layers=1, d_k=1, d_ff=2))
    path = tmp_path / "m.json"
    path.write_text(m.dumps())
    sentence = tmp_path / "m.foc"
    code, _, err = run(capsys, "uplift", path, "-o", sentence, "--int-bits", 1, "--frac-bits", 2)
    assert code == 0 and "nodes" in json.loads(err)
    f = parse_sentence_file(sentence.read_text()).formula
    for w in BINARY.strings(4):
        assert evaluate(f, w) == fixed_exec(m, w, 1, 2).accept


def test_sscm_commands(capsys):
    machine = F / "equal_counts.sscm"
    assert run(capsys, "sscm", machine, "accept", "0011")[1] == "accept, counters=[0]\n"
    assert run(capsys, "sscm", machine, "accept", "001")[1] == "reject, counters=[1]\n"
    out = run(capsys, "sscm", machine, "sentence")[1]
    assert "E x1. E x2. (#[x1] p. Q_0(p) & #[x2] p. Q_1(p) & x1 - x2 = 0)" in out


def test_difftest_exit_codes(capsys, tmp_path):
    code, out, _ = run(capsys, "difftest", "eval≡normal", "--maxlen", 3)
    assert code == 0 and json.loads(out)["passed"] is True
    report = tmp_path / "r.json"
    code, _, err = run(capsys, "difftest", "eval=lower", "--maxlen", 3, "--inject-fault", "--report", report)
    assert code == 1 and "minimal counterexample" in err
    data = json.loads(report.read_text())
    assert data["passed"] is False and data["mismatches"]


def test_difftest_random_models_and_machines(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        code, _, _ = run(capsys, "difftest", "fixedexec≡uplift", "--models", "random", "--count", 2, "--seed", 3,
                         "--maxlen", 4, "--report", path)
        assert code == 0
    assert a.read_bytes() == b.read_bytes()
    code, _, _ = run(capsys, "difftest", "sscm≡lower", "--machines", "random", "--count", 3, "--maxlen", 4)
    assert code == 0
    code, _, _ = run(capsys, "difftest", "sscm≡logic", "--machines", F / "equal_counts.sscm", "--maxlen", 6)
    assert code == 0
