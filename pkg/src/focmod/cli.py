"""Command-line front end: ``focmod eval|normalize|compile|run|uplift|sscm|difftest``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .logic.alphabet import Alphabet, show
from .logic.evaluator import evaluate
from .logic.parser import ParseError, SentenceFile, parse_sentence_file
from .logic.printer import render_sentence_file
from .lower import compile_sentence
from .normal_form import normalize
from .sscm import SscmError, format_sscm, parse_sscm, sscm_run, sscm_to_sentence
from .transformer.executor import classify
from .transformer.model import TransformerModel
from .upper import compile_model_with_stats
from .upper.compiler import AVERAGE_MODES
from . import difftest as D


class CliError(Exception):
    pass


def parse_alphabet(text: str | None) -> Alphabet | None:
    if text is None:
        return None
    if "," in text or " " in text:
        return Alphabet([s for s in text.replace(",", " ").split() if s])
    return Alphabet(list(text))


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _read_sentence(path: str, alphabet: Alphabet | None) -> SentenceFile:
    sf = parse_sentence_file(Path(path).read_text(), alphabet)
    if alphabet is not None and tuple(alphabet) != tuple(sf.alphabet):
        raise CliError(f"--alphabet {list(alphabet)} disagrees with the file's alphabet {list(sf.alphabet)}")
    return sf


def _words(alphabet: Alphabet, strings: list[str] | None, up_to: int | None):
    if up_to is not None:
        return list(alphabet.strings(up_to))
    return [alphabet.tokenize(s) for s in strings or []]


def _label(w) -> str:
    return show(w) if w else "ε"


# --- commands ----------------------------------------------------------------------------

def cmd_eval(args) -> int:
    sf = _read_sentence(args.file, parse_alphabet(args.alphabet))
    strings = list(args.strings or [])
    if args.string is not None:
        strings.append(args.string)
    up_to = args.all_up_to
    words = _words(sf.alphabet, strings, up_to)
    if not words and up_to is None:
        raise CliError("give --string, positional strings or --all-up-to N")
    single = len(words) == 1 and up_to is None
    for w in words:
        v = "true" if evaluate(sf.formula, w) else "false"
        print(v if single else f"{_label(w)}\t{v}")
    return 0


def cmd_normalize(args) -> int:
    sf = _read_sentence(args.file, parse_alphabet(args.alphabet))
    nf = normalize(sf.formula)
    text = render_sentence_file(sf.alphabet, nf.to_formula())
    sidecar = json.dumps(nf.sidecar(), indent=2, ensure_ascii=False) + "\n"
    if args.output:
        Path(args.output).write_text(text)
        Path(args.output + ".json").write_text(sidecar)
    else:
        sys.stdout.write(text)
        sys.stdout.write("".join(f"% {line}\n" for line in sidecar.splitlines()))
    return 0


def cmd_compile(args) -> int:
    sf = _read_sentence(args.file, parse_alphabet(args.alphabet))
    model = compile_sentence(sf.formula, sf.alphabet)
    _emit(model.dumps(), args.output)
    return 0


def cmd_run(args) -> int:
    model = TransformerModel.load(args.model)
    for w in _words(model.alphabet, args.strings, args.all_up_to):
        c = classify(model, w)
        print(f"{_label(w)}\t{'accept' if c.accept else 'reject'}\tmargin={c.margin!r}")
    return 0


def cmd_uplift(args) -> int:
    model = TransformerModel.load(args.model)
    sentence, stats = compile_model_with_stats(model, args.int_bits, args.frac_bits, args.average)
    _emit(render_sentence_file(model.alphabet, sentence), args.output)
    report = dict(stats.to_json(), int_bits=args.int_bits, frac_bits=args.frac_bits, average=args.average)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.report:
        Path(args.report).write_text(text)
    else:
        sys.stderr.write(text)
    return 0


def cmd_sscm(args) -> int:
    m = parse_sscm(Path(args.machine).read_text())
    if args.action == "accept":
        if len(args.rest) > 1:
            raise CliError("accept takes one string")
        w = m.alphabet.tokenize(args.rest[0] if args.rest else "")
        run = sscm_run(m, w)
        print(f"{'accept' if run.accept else 'reject'}, counters={list(run.counters)}")
    elif args.action == "sentence":
        _emit(render_sentence_file(m.alphabet, sscm_to_sentence(m)), args.output)
    elif args.action == "compile":
        _emit(compile_sentence(sscm_to_sentence(m), m.alphabet).dumps(), args.output)
    else:
        _emit(format_sscm(m), args.output)
    return 0


def cmd_difftest(args) -> int:
    route = D.route_name(args.route)
    alphabet = parse_alphabet(args.alphabet)
    maxlen = args.maxlen if args.maxlen is not None else 10
    fault = D.negate_output if args.inject_fault else None
    kw = {}
    if route in ("eval≡normal", "eval≡lower"):
        kw["sentences"] = D.load_sentences(args.sentences or D.fixture_path(), alphabet)
    elif route == "fixedexec≡uplift":
        if args.models in (None, "random"):
            kw["models"] = D.random_models(args.count, args.seed, alphabet)
        else:
            p = Path(args.models)
            files = sorted(p.glob("*.json")) if p.is_dir() else [p]
            kw["models"] = [(f.stem, TransformerModel.load(f)) for f in files]
    else:
        if args.machines in (None, "random"):
            kw["machines"] = D.random_machines(args.count, args.seed)
        else:
            p = Path(args.machines)
            files = sorted(p.glob("*.sscm")) if p.is_dir() else [p]
            kw["machines"] = [(f.stem, parse_sscm(f.read_text())) for f in files]
    report = D.run_route(route, maxlen, r=args.int_bits, s=args.frac_bits, average=args.average,
                         fault=fault, **kw)
    _emit(report.dumps(), args.report)
    status = "pass" if report.passed else "FAIL"
    print(f"{route}: {status} ({report.comparisons} comparisons, {len(report.mismatches)} mismatches)",
          file=sys.stderr)
    for case, w in sorted(report.minimal().items()):
        print(f"  {case}: minimal counterexample {w or 'ε'!r}", file=sys.stderr)
    return 0 if report.passed else 1


# --- parser ------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--alphabet", help="symbols, e.g. 01 or a,b,c (default: from the input file)")
    common.add_argument("--maxlen", type=int, help="longest corpus string (difftest; default 10)")
    common.add_argument("--seed", type=int, default=0, help="seed for random models and machines")
    common.add_argument("--int-bits", type=int, default=2, help="integer bits r of the fixed-point format")
    common.add_argument("--frac-bits", type=int, default=2, help="fractional bits s of the fixed-point format")
    common.add_argument("--report", help="write the JSON report here instead of stdout/stderr")

    p = argparse.ArgumentParser(prog="focmod", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("eval", parents=[common], help="evaluate a sentence on strings")
    e.add_argument("file")
    e.add_argument("strings", nargs="*")
    e.add_argument("--string", help="a single string (may be empty)")
    e.add_argument("--all-up-to", type=int, metavar="N", help="every string of length <= N")
    e.set_defaults(fn=cmd_eval)

    n = sub.add_parser("normalize", parents=[common], help="write the normal form of a sentence")
    n.add_argument("file")
    n.add_argument("-o", "--output", help="sentence file; the sidecar goes to OUTPUT.json")
    n.set_defaults(fn=cmd_normalize)

    c = sub.add_parser("compile", parents=[common], help="compile a sentence into a transformer model")
    c.add_argument("file")
    c.add_argument("-o", "--output")
    c.set_defaults(fn=cmd_compile)

    r = sub.add_parser("run", parents=[common], help="classify strings with a model")
    r.add_argument("model")
    r.add_argument("strings", nargs="*")
    r.add_argument("--all-up-to", type=int, metavar="N")
    r.set_defaults(fn=cmd_run)

    u = sub.add_parser("uplift", parents=[common], help="compile a fixed-precision model into a sentence")
    u.add_argument("model")
    u.add_argument("-o", "--output")
    u.add_argument("--average", choices=AVERAGE_MODES, default="direct")
    u.set_defaults(fn=cmd_uplift)

    s = sub.add_parser("sscm", parents=[common], help="counter machine actions")
    s.add_argument("machine")
    s.add_argument("action", choices=["accept", "sentence", "compile", "show"])
    s.add_argument("rest", nargs="*")
    s.add_argument("-o", "--output")
    s.set_defaults(fn=cmd_sscm)

    d = sub.add_parser("difftest", parents=[common], help="differential test along one route")
    d.add_argument("route", help="one of: " + ", ".join(D.ROUTES) + " (= accepted for ≡)")
    d.add_argument("--sentences", help="sentence file or directory (default: bundled fixtures)")
    d.add_argument("--models", help="'random' or a model file/directory")
    d.add_argument("--machines", help="'random' or a machine file/directory")
    d.add_argument("--count", type=int, default=5, help="number of random models or machines")
    d.add_argument("--average", choices=AVERAGE_MODES, default="direct")
    d.add_argument("--inject-fault", action="store_true", help="negate the output layer (harness self-test)")
    d.set_defaults(fn=cmd_difftest)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ParseError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return 2
    except (CliError, SscmError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
