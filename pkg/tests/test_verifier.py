"""Verificador: t'_t, veredictos, cotas, perfil e invariante de control."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.services.aca_service import evolve
from app.services.construction_service import (FRESH, SETTLED, ScatterMap,
                                               compile_tm, construction3_initial)
from app.services.sequence_service import (ExplicitSequence, SequenceExhausted,
                                           SweepSequence, insert_noise,
                                           quadratic_universal,
                                           random_walk_sequence,
                                           scattered_sequence, sweep_sequence)
from app.services.turing_service import tm_run
from app.services.verifier_service import (ReportError, ScatterError, Verdict,
                                           bench, bound_value,
                                           check_construction1_control_invariant,
                                           control_invariant_run, default_budget,
                                           random_walk_successes,
                                           slowdown_profile, verify,
                                           verify_scattered, verify_strict)

ZIGZAG_WALK = [0, -1, 0, -1, -2, -1]


class TestBounds:
    def test_values(self):
        assert bound_value(1, 1) == 7
        assert bound_value(2, 10) == 66
        assert bound_value(3, 1, gap=1) == 15
        assert bound_value(3, 2, gap=2) == 78

    def test_construction1_matches_formula(self):
        for T in range(0, 60):
            assert bound_value(1, T) * 2 == 3 * T * T + 7 * T + 4

    def test_default_budget_slack(self):
        assert default_budget(1, 1) == 7
        assert default_budget(1, 1, slack=1.5) == 11
        with pytest.raises(ValueError):
            default_budget(1, 1, slack=0)


class TestStrict:
    def test_first_steps(self, zigzag, zigzag_c1):
        report = verify_strict(zigzag, "", zigzag_c1, quadratic_universal(), 3)
        assert report.verdict == Verdict.PASS
        assert report.matches == [(0, 0), (1, 3), (2, 7), (3, 15)]
        assert report.tprime(2) == 7
        assert report.bound_ok

    def test_quadratic_closed_form(self, zigzag, zigzag_c1):
        T = 40
        report = verify(zigzag, "", zigzag_c1, quadratic_universal(), T)
        heads = tm_run(zigzag, "", T).heads()
        for t in range(2, T + 1):
            expected = (3 * t * t - t + 4 + heads[t - 1] + t - 1) // 2
            assert report.tprime(t) == expected

    def test_zero_steps(self, zigzag, zigzag_c1):
        report = verify(zigzag, "", zigzag_c1, quadratic_universal(), 0)
        assert report.passed
        assert report.matches == [(0, 0)]
        assert report.budget_used == 0

    def test_budget_exceeded(self, zigzag, zigzag_c1):
        report = verify(zigzag, "", zigzag_c1, quadratic_universal(), 3, budget=10)
        assert report.verdict == Verdict.BUDGET_EXCEEDED
        assert report.first_unmatched == 3
        assert report.budget_used == 10

    def test_finite_sequence_exhausts(self, zigzag, zigzag_c1):
        report = verify(zigzag, "", zigzag_c1, ExplicitSequence([0, -1, 0]), 2)
        assert report.verdict == Verdict.BUDGET_EXCEEDED
        assert "sequence exhausted" in report.reason
        assert report.matches == [(0, 0), (1, 3)]

    def test_cyclic_budget(self, zigzag, zigzag_c1):
        from app.services.sequence_service import CyclicSequence
        report = verify(zigzag, "", zigzag_c1, CyclicSequence([0]), 5, budget=1000)
        assert report.verdict == Verdict.BUDGET_EXCEEDED
        assert report.first_unmatched == 1

    def test_insertion_can_finish_earlier(self, zigzag, zigzag_c1):
        seq = insert_noise(quadratic_universal(), [(3, -1), (3, 0), (3, -1)])
        report = verify(zigzag, "", zigzag_c1, seq, 2)
        assert report.matches == [(0, 0), (1, 3), (2, 6)]

    def test_tape_mode_repeated_tape_fails(self, zigzag, zigzag_c1):
        report = verify(zigzag, "", zigzag_c1, quadratic_universal(), 3, match="tape")
        assert report.verdict == Verdict.FAIL
        assert not report.monotone_ok
        assert "tm steps 2 and 3" in report.reason

    def test_tape_mode_passes_on_distinct_tapes(self, zigzag, zigzag_c1):
        report = verify(zigzag, "", zigzag_c1, quadratic_universal(), 2, match="tape")
        assert report.passed
        assert report.matches == [(0, 0), (1, 1), (2, 4)]
        assert report.final_tape == "01"

    def test_halting_machine_final_tape(self, builtins):
        tm = builtins["bin-counter"]
        report = verify(tm, "1011", compile_tm(tm, 1), quadratic_universal(), 50)
        assert report.passed
        assert report.halted
        assert report.final_tape == "1100"

    def test_bad_match_mode(self, zigzag, zigzag_c1):
        with pytest.raises(ValueError):
            verify(zigzag, "", zigzag_c1, quadratic_universal(), 1, match="both")

    def test_strict_needs_strict_construction(self, zigzag):
        with pytest.raises(ValueError):
            verify_strict(zigzag, "", compile_tm(zigzag, 3, gap=2), quadratic_universal(), 1)

    def test_to_dict(self, zigzag, zigzag_c1):
        d = verify(zigzag, "", zigzag_c1, quadratic_universal(), 2, seq_label="quadratic").to_dict()
        assert d["verdict"] == "PASS"
        assert d["bound"] == {"formula": "3/2*(T^2+7/3*T+4/3)", "value": 15, "ok": True}
        assert d["sequence"] == "quadratic"
        assert d["matches"] == [[0, 0], [1, 3], [2, 7]]


class TestConstruction2:
    def test_sweep_completes_step_inside_previous_block(self, zigzag, zigzag_c2):
        T = 30
        report = verify(zigzag, "", zigzag_c2, sweep_sequence(), T)
        assert report.passed
        for t in range(1, T + 1):
            lo = SweepSequence.cumulative_length(t - 2) if t >= 2 else 0
            assert lo < report.tprime(t) <= SweepSequence.cumulative_length(t - 1)

    def test_first_steps(self, zigzag, zigzag_c2):
        report = verify(zigzag, "", zigzag_c2, sweep_sequence(), 3)
        assert report.matches == [(0, 0), (1, 1), (2, 2), (3, 5)]


class TestScattered:
    def test_gap_two(self, zigzag):
        compiled = compile_tm(zigzag, 3, gap=2)
        report = verify_scattered(zigzag, "", compiled, ScatterMap(2), scattered_sequence(2), 2)
        assert report.passed
        assert report.budget == 78
        assert report.tprime(2) == 31

    def test_gap_must_equal_radius(self, zigzag):
        compiled = compile_tm(zigzag, 3, gap=2)
        with pytest.raises(ScatterError, match="gap exceeds radius"):
            verify_scattered(zigzag, "", compiled, ScatterMap(3), scattered_sequence(3), 1)
        with pytest.raises(ScatterError, match="radius exceeds gap"):
            verify_scattered(zigzag, "", compiled, ScatterMap(1), scattered_sequence(1), 1)

    def test_radius_beyond_gap_fires_two_cells_away(self, zigzag):
        # con radio 2 sobre soporte de paso 1 la celda 1 ve la marca de -1
        cfg = construction3_initial(zigzag, "", ScatterMap(1))
        wide = compile_tm(zigzag, 3, gap=2)
        tight = compile_tm(zigzag, 3, gap=1)
        assert evolve(cfg, wide.rule, [1], 1).configuration_at(1).at(1).ctl == FRESH
        assert evolve(cfg, tight.rule, [1], 1).configuration_at(1).at(1).ctl == SETTLED

    def test_strict_rejects_gap(self, zigzag, zigzag_c1):
        with pytest.raises(ScatterError):
            verify(zigzag, "", zigzag_c1, quadratic_universal(), 1, scatter=ScatterMap(2))


class TestProfile:
    def test_leading_coefficient(self, zigzag, zigzag_c1):
        report = verify(zigzag, "", zigzag_c1, quadratic_universal(), 50)
        profile = slowdown_profile(report)
        assert abs(profile.leading_coefficient - 1.5) < 0.05
        assert len(profile.per_step_cost) == 50
        assert profile.bound_ok

    def test_needs_pass(self, zigzag, zigzag_c1):
        report = verify(zigzag, "", zigzag_c1, quadratic_universal(), 3, budget=5)
        with pytest.raises(ReportError):
            slowdown_profile(report)


class TestControlInvariant:
    def test_guarded_rule_holds_on_walk(self, zigzag_c1):
        trace = evolve(zigzag_c1.initial(""), zigzag_c1.rule, ZIGZAG_WALK, len(ZIGZAG_WALK))
        assert check_construction1_control_invariant(trace)
        assert control_invariant_run(zigzag_c1, "", ZIGZAG_WALK, len(ZIGZAG_WALK)) is None

    def test_literal_rule_breaks_on_walk(self, zigzag_literal):
        trace = evolve(zigzag_literal.initial(""), zigzag_literal.rule, ZIGZAG_WALK,
                       len(ZIGZAG_WALK))
        assert not check_construction1_control_invariant(trace)
        assert control_invariant_run(zigzag_literal, "", ZIGZAG_WALK, len(ZIGZAG_WALK)) == 6

    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_short_random_walks(self, zigzag_c1, seed):
        assert control_invariant_run(zigzag_c1, "", random_walk_sequence(seed), 20000) is None

    def test_finite_sequence_runs_out(self, zigzag_c1):
        with pytest.raises(SequenceExhausted, match="after 2 updates"):
            control_invariant_run(zigzag_c1, "", ExplicitSequence([0, -1]), 5)


class TestRandomWalk:
    def test_one_step(self, zigzag, zigzag_c1):
        assert random_walk_successes(zigzag, "", zigzag_c1, 1) == (1, 4)

    def test_two_steps(self, zigzag, zigzag_c1):
        assert random_walk_successes(zigzag, "", zigzag_c1, 2) == (1, 32)


class TestBench:
    def test_rows(self, zigzag, zigzag_c1):
        rows = bench(zigzag, "", zigzag_c1, quadratic_universal(), 1, 5, seq_label="quadratic")
        assert [r.T for r in rows] == [1, 2, 3, 4, 5]
        assert rows[0].tprime == 3 and rows[0].bound == 7
        assert all(r.ok for r in rows)
        assert rows[0].to_dict()["seq"] == "quadratic"

    def test_stops_at_halt(self, builtins):
        tm = builtins["unary-inc"]
        rows = bench(tm, "1", compile_tm(tm, 1), quadratic_universal(), 1, 10)
        assert [r.T for r in rows] == [1, 2]

    def test_bad_range(self, zigzag, zigzag_c1):
        with pytest.raises(ValueError):
            bench(zigzag, "", zigzag_c1, quadratic_universal(), 5, 2)


class TestInsertionRobustness:
    @given(st.lists(st.tuples(st.integers(0, 150), st.integers(-10, 10)), max_size=20))
    @settings(max_examples=40, deadline=None)
    def test_pass_preserved(self, raw):
        from app.services.turing_service import zigzag_machine
        tm = zigzag_machine()
        compiled = compile_tm(tm, 1)
        base = verify(tm, "", compiled, quadratic_universal(), 10)
        insertions = sorted(raw, key=lambda x: x[0])
        seq = insert_noise(quadratic_universal(), insertions)
        report = verify(tm, "", compiled, seq, 10, budget=bound_value(1, 10) + len(insertions))
        assert report.passed
        for t, k in base.matches:
            assert report.tprime(t) <= k + len(insertions)
