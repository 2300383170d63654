"""Criterios de aceptación de extremo a extremo sobre las máquinas incluidas."""

import random

import pytest

from app.services.aca_service import evolve
from app.services.construction_service import ScatterMap, compile_tm
from app.services.sequence_service import (CyclicSequence, ExplicitSequence,
                                           insert_noise, quadratic_universal,
                                           random_walk_sequence,
                                           scattered_sequence, sweep_sequence)
from app.services.turing_service import tm_output, tm_run
from app.services.verifier_service import (Verdict, bound_value,
                                           control_invariant_run, verify,
                                           verify_scattered, verify_strict)

WORDS = {
    "zigzag": ["", "0", "1", "01", "110"],
    "unary-inc": ["", "1", "11", "111", "111111"],
    "bin-counter": ["", "0", "1", "10", "1011", "111111"],
    "palindrome": ["", "0", "01", "101", "0110", "100101"],
}
CASES = [(name, w) for name, words in WORDS.items() for w in words]


def test_case_count():
    assert len(CASES) >= 20


def test_first_step_golden_trace(builtins):
    for tm in builtins.values():
        compiled = compile_tm(tm, 1)
        word = "1" if "1" in tm.input_alphabet else ""
        trace = evolve(compiled.initial(word), compiled.rule, [0, -1, 0], 3)
        ctl0 = [trace.configuration_at(k).at(0).ctl for k in range(4)]
        ctl_m1 = [trace.configuration_at(k).at(-1).ctl for k in range(4)]
        assert ctl0 == [2, 0, 0, 1]
        assert ctl_m1 == [1, 1, 2, 2]
        report = verify_strict(tm, word, compiled, [0, -1, 0], 1, budget=3)
        assert report.passed
        assert report.tprime(1) == 3


@pytest.mark.parametrize("name, word", CASES)
def test_oracle_equivalence(builtins, name, word):
    tm = builtins[name]
    report = verify_strict(tm, word, compile_tm(tm, 1), quadratic_universal(), 25)
    run = tm_run(tm, word, 25)
    assert report.passed, report.reason
    assert report.tm_steps == run.steps
    if run.halted:
        assert report.final_tape == tm_output(run, tm.blank)


def test_construction1_bound(zigzag, zigzag_c1):
    report = verify_strict(zigzag, "", zigzag_c1, quadratic_universal(), 50)
    assert report.passed
    for t, k in report.matches[1:]:
        assert k <= bound_value(1, t)
    assert report.tprime(1) == 3


def test_construction2_bound(zigzag, zigzag_c2):
    report = verify_strict(zigzag, "", zigzag_c2, sweep_sequence(), 50)
    assert report.passed
    for t, k in report.matches[1:]:
        assert k <= bound_value(2, t)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_scattered_bound(zigzag, p):
    compiled = compile_tm(zigzag, 3, gap=p)
    for T in range(1, 21):
        report = verify_scattered(zigzag, "", compiled, ScatterMap(p), scattered_sequence(p), T,
                                  budget=bound_value(3, T, p))
        assert report.passed, (T, report.reason)


def test_cyclic_window_starves(zigzag, zigzag_c1):
    heads = tm_run(zigzag, "", 200).heads()
    first_out = next(t for t in range(1, 201) if not -5 <= heads[t - 1] <= 5)
    report = verify(zigzag, "", zigzag_c1, CyclicSequence(range(-5, 6)), 200, budget=100_000)
    assert report.verdict == Verdict.BUDGET_EXCEEDED
    assert report.first_unmatched == first_out


def test_single_visit_starves(zigzag, zigzag_c1):
    prefix = quadratic_universal().prefix(20000)
    first = prefix.index(1)
    thinned = prefix[:first + 1] + [x for x in prefix[first + 1:] if x != 1]
    assert thinned.count(1) == 1
    report = verify(zigzag, "", zigzag_c1, ExplicitSequence(thinned), 10, budget=100_000)
    assert report.verdict == Verdict.BUDGET_EXCEEDED
    assert report.first_unmatched == 4


@pytest.mark.slow
@pytest.mark.parametrize("seed", [1, 2, 3, 4, 5])
def test_control_invariant_million_updates(zigzag_c1, seed):
    assert control_invariant_run(zigzag_c1, "", random_walk_sequence(seed), 1_000_000) is None


def test_insertions_preserve_pass(zigzag, zigzag_c1):
    rng = random.Random(2024)
    base = verify_strict(zigzag, "", zigzag_c1, quadratic_universal(), 10)
    assert base.passed
    last = base.tprime(10)
    for _ in range(100):
        n = rng.randint(0, 20)
        insertions = sorted((rng.randint(0, last), rng.randint(-10, 10)) for _ in range(n))
        seq = insert_noise(quadratic_universal(), insertions)
        report = verify_strict(zigzag, "", zigzag_c1, seq, 10, budget=last + n)
        assert report.passed
        for t, k in base.matches:
            assert report.tprime(t) <= k + n


def test_scattered_gap_one_matches_construction1(zigzag, zigzag_c1):
    c3 = compile_tm(zigzag, 3, gap=1)
    seq = scattered_sequence(1).prefix(3000)
    t1 = evolve(zigzag_c1.initial("01"), zigzag_c1.rule, seq, len(seq))
    t3 = evolve(c3.initial("01", ScatterMap(1)), c3.rule, seq, len(seq))
    assert [(u.pos, u.new.gamma, u.new.ctl) for u in t1.updates] == \
        [(u.pos, u.new.gamma, u.new.ctl) for u in t3.updates]

