"""Differential testing between the evaluators, compilers and executors.

Each route compares a reference verdict with a derived one on every string
of a corpus and collects the disagreements in a ``DiffReport``.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .logic.alphabet import Alphabet, show
from .logic.evaluator import evaluate
from .logic.parser import SentenceFile, parse_sentence_file
from .lower import compile_sentence
from .normal_form import evaluate_normal, normalize
from .sscm import Sscm, random_sscm, sscm_run, sscm_to_sentence
from .transformer.executor import classify
from .transformer.model import TransformerModel
from .transformer.weights import WeightEntry
from .upper import ModelShape, compile_model_with_stats, fixed_exec, random_model

ROUTES = ("eval≡normal", "eval≡lower", "fixedexec≡uplift", "sscm≡logic", "sscm≡lower")
MARGIN_TOL = 1e-9
NODE_BUDGET = 500_000


def route_name(spec: str) -> str:
    """Canonical route id; ``=`` and ``==`` are accepted in place of ``≡``."""
    s = spec.replace("==", "≡").replace("=", "≡")
    if s not in ROUTES:
        raise ValueError(f"unknown route {spec!r}; expected one of {', '.join(ROUTES)}")
    return s


@dataclass
class Mismatch:
    case: str
    w: str
    expected: bool
    got: bool
    margins: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"case": self.case, "w": self.w, "expected": self.expected, "got": self.got,
                "margins": self.margins}


@dataclass
class DiffReport:
    route: str
    alphabet: list[str]
    maxlen: int
    cases: list[str] = field(default_factory=list)
    mismatches: list[Mismatch] = field(default_factory=list)
    strings: int = 0
    comparisons: int = 0
    stats: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.mismatches

    def add(self, mm: Mismatch) -> None:
        self.mismatches.append(mm)

    def minimal(self) -> dict[str, str]:
        """Shortest mismatching string per case."""
        out: dict[str, str] = {}
        for mm in self.mismatches:
            cur = out.get(mm.case)
            if cur is None or (len(mm.w), mm.w) < (len(cur), cur):
                out[mm.case] = mm.w
        return out

    def to_json(self) -> dict:
        mms = sorted(self.mismatches, key=lambda m: (m.case, len(m.w), m.w))
        return {
            "route": self.route,
            "corpus": {"alphabet": list(self.alphabet), "maxlen": self.maxlen},
            "cases": list(self.cases),
            "passed": self.passed,
            "totals": {"cases": len(self.cases), "strings": self.strings, "comparisons": self.comparisons,
                       "mismatches": len(mms)},
            "minimal_counterexamples": dict(sorted(self.minimal().items())),
            "mismatches": [m.to_json() for m in mms],
            "stats": self.stats,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


# --- case sources --------------------------------------------------------------------

def fixture_path(name: str = "") -> Path:
    base = Path(str(resources.files("focmod") / "fixtures"))
    return base / name if name else base


def load_sentences(path: str | Path, alphabet: Alphabet | None = None) -> list[tuple[str, SentenceFile]]:
    """Sentence files from a file or every ``*.foc`` file of a directory, sorted by name."""
    p = Path(path)
    files = sorted(p.glob("*.foc")) if p.is_dir() else [p]
    return [(f.stem, parse_sentence_file(f.read_text(), alphabet)) for f in files]


def fixture_sentences() -> list[tuple[str, SentenceFile]]:
    return load_sentences(fixture_path())


def random_models(count: int, seed: int = 0, alphabet: Alphabet | None = None) -> list[tuple[str, TransformerModel]]:
    """Random models with d <= 4, L <= 2, H = 1, d_K <= 2, d_FF <= 4."""
    rng = random.Random(seed)
    out = []
    for i in range(count):
        shape = ModelShape(d=rng.randint(1, 4), layers=rng.randint(1, 2), d_k=rng.randint(1, 2),
                           d_ff=rng.randint(1, 4))
        kw = {} if alphabet is None else {"alphabet": alphabet}
        out.append((f"model{seed}-{i}", random_model(seed * 100003 + i, shape, **kw)))
    return out


def random_machines(count: int, seed: int = 0) -> list[tuple[str, Sscm]]:
    rng = random.Random(seed)
    return [(f"machine{seed}-{i}", random_sscm(rng)) for i in range(count)]


# --- faults ---------------------------------------------------------------------------

def negate_output(model: TransformerModel) -> TransformerModel:
    """The model with its output weights and bias negated (a harness self-test fault)."""
    def neg(e: WeightEntry) -> WeightEntry:
        ex = e.exact()
        if ex is None:
            raise ValueError("only exact output weights can be negated")
        return WeightEntry.q(-ex)

    return replace(model, out_w=[neg(e) for e in model.out_w], out_b=neg(model.out_b), meta=dict(model.meta))


# --- routes -------------------------------------------------------------------------------

def _run(report: DiffReport, name: str, alphabet: Alphabet, maxlen: int,
         check: Callable[[tuple], tuple[bool, bool, dict, bool]]) -> None:
    report.cases.append(name)
    for w in alphabet.strings(maxlen):
        expected, got, margins, ok = check(w)
        report.strings += 1
        report.comparisons += 1
        if not ok or expected != got:
            report.add(Mismatch(name, show(w), expected, got, margins))


def diff_eval_normal(cases: Sequence[tuple[str, SentenceFile]], maxlen: int) -> DiffReport:
    alphabet = cases[0][1].alphabet if cases else Alphabet(["0", "1"])
    report = DiffReport("eval≡normal", list(alphabet), maxlen)
    for name, sf in cases:
        nf = normalize(sf.formula)

        def check(w, f=sf.formula, nf=nf):
            return evaluate(f, w), evaluate_normal(nf, w), {}, True

        _run(report, name, sf.alphabet, maxlen, check)
    return report


def lower_margin_ok(margin: float, accept: bool, n: int, tol: float = MARGIN_TOL) -> bool:
    target = (1 if accept else -1) / (n + 1)
    return abs(margin - target) <= tol


def diff_eval_lower(cases: Sequence[tuple[str, SentenceFile]], maxlen: int,
                    fault: Callable[[TransformerModel], TransformerModel] | None = None,
                    tol: float = MARGIN_TOL) -> DiffReport:
    alphabet = cases[0][1].alphabet if cases else Alphabet(["0", "1"])
    report = DiffReport("eval≡lower", list(alphabet), maxlen)
    worst = 0.0
    for name, sf in cases:
        model = compile_sentence(sf.formula, sf.alphabet)
        if fault is not None:
            model = fault(model)

        def check(w, f=sf.formula, model=model):
            nonlocal worst
            want = evaluate(f, w)
            c = classify(model, w)
            target = (1 if want else -1) / (len(w) + 1)
            worst = max(worst, abs(c.margin - target))
            ok = lower_margin_ok(c.margin, want, len(w), tol)
            return want, c.accept, {"got": repr(c.margin), "expected": repr(target)}, ok

        _run(report, name, sf.alphabet, maxlen, check)
    report.stats["max_margin_error"] = worst
    return report


def diff_fixed_uplift(models: Sequence[tuple[str, TransformerModel]], maxlen: int, r: int = 2, s: int = 2,
                      average: str = "direct", budget: int = NODE_BUDGET,
                      fault: Callable[[TransformerModel], TransformerModel] | None = None) -> DiffReport:
    alphabet = models[0][1].alphabet if models else Alphabet(["0", "1"])
    report = DiffReport("fixedexec≡uplift", list(alphabet), maxlen)
    largest = {"nodes": 0, "depth": 0}
    for name, model in models:
        sentence, st = compile_model_with_stats(model, r, s, average)
        largest = {"nodes": max(largest["nodes"], st.nodes), "depth": max(largest["depth"], st.depth)}
        if st.nodes > budget:
            report.add(Mismatch(name, "", True, False, {"nodes": st.nodes, "budget": budget}))
        run_model = model if fault is None else fault(model)

        def check(w, sentence=sentence, m=run_model):
            run = fixed_exec(m, w, r, s)
            return run.accept, evaluate(sentence, w), {"fixed_output": str(run.output)}, True

        _run(report, name, model.alphabet, maxlen, check)
    report.stats.update({"int_bits": r, "frac_bits": s, "average": average, "node_budget": budget,
                         "max_nodes": largest["nodes"], "max_depth": largest["depth"]})
    return report


def diff_sscm_logic(machines: Sequence[tuple[str, Sscm]], maxlen: int) -> DiffReport:
    alphabet = machines[0][1].alphabet if machines else Alphabet(["0", "1"])
    report = DiffReport("sscm≡logic", list(alphabet), maxlen)
    for name, m in machines:
        sentence = sscm_to_sentence(m)

        def check(w, m=m, sentence=sentence):
            run = sscm_run(m, w)
            return run.accept, evaluate(sentence, w), {"counters": list(run.counters)}, True

        _run(report, name, m.alphabet, maxlen, check)
    return report


def diff_sscm_lower(machines: Sequence[tuple[str, Sscm]], maxlen: int,
                    fault: Callable[[TransformerModel], TransformerModel] | None = None) -> DiffReport:
    alphabet = machines[0][1].alphabet if machines else Alphabet(["0", "1"])
    report = DiffReport("sscm≡lower", list(alphabet), maxlen)
    for name, m in machines:
        model = compile_sentence(sscm_to_sentence(m), m.alphabet)
        if fault is not None:
            model = fault(model)

        def check(w, m=m, model=model):
            run = sscm_run(m, w)
            c = classify(model, w)
            return run.accept, c.accept, {"margin": repr(c.margin)}, True

        _run(report, name, m.alphabet, maxlen, check)
    return report


def run_route(route: str, maxlen: int, *, sentences: Iterable | None = None, models: Iterable | None = None,
              machines: Iterable | None = None, r: int = 2, s: int = 2, average: str = "direct",
              fault: Callable | None = None) -> DiffReport:
    route = route_name(route)
    if route == "eval≡normal":
        return diff_eval_normal(list(sentences or []), maxlen)
    if route == "eval≡lower":
        return diff_eval_lower(list(sentences or []), maxlen, fault)
    if route == "fixedexec≡uplift":
        return diff_fixed_uplift(list(models or []), maxlen, r, s, average, fault=fault)
    if route == "sscm≡logic":
        return diff_sscm_logic(list(machines or []), maxlen)
    return diff_sscm_lower(list(machines or []), maxlen, fault)
