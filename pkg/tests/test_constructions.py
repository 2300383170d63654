"""Compilación de las tres construcciones, cláusulas y manifiesto."""

import pytest

from app.services.aca_service import ProductSymbol, evolve
from app.services.construction_service import (FRESH, HEAD, INACTIVE, SETTLED,
                                               ConstructionError, ScatterMap,
                                               all_neighborhoods,
                                               clause_conflicts, compile_tm,
                                               construction1_initial,
                                               construction3_initial,
                                               first_match, matching_clauses,
                                               rule_manifest)
from app.services.sequence_service import ExplicitSequence, scattered_sequence
from app.services.turing_service import InputWordError


def ctl_at(trace, k, pos):
    return trace.configuration_at(k).at(pos).ctl


class TestCompile:
    def test_alphabet_sizes(self, zigzag):
        assert compile_tm(zigzag, 1).alphabet.size == 36
        assert compile_tm(zigzag, 2).alphabet.size == 24
        assert compile_tm(zigzag, 3, gap=2).alphabet.size == 48

    def test_radius(self, zigzag):
        assert compile_tm(zigzag, 1).radius == 1
        assert compile_tm(zigzag, 3, gap=3).radius == 3

    def test_gap_rules(self, zigzag):
        with pytest.raises(ConstructionError):
            compile_tm(zigzag, 3)
        with pytest.raises(ConstructionError):
            compile_tm(zigzag, 1, gap=2)
        with pytest.raises(ConstructionError):
            compile_tm(zigzag, 4)
        with pytest.raises(ConstructionError):
            compile_tm(zigzag, 3, gap=0)

    def test_bad_input_word(self, zigzag):
        with pytest.raises(InputWordError):
            construction1_initial(zigzag, "2")


class TestInitialConfigurations:
    def test_strict_initial(self, zigzag):
        cfg = construction1_initial(zigzag, "01")
        assert cfg.at(-1) == ProductSymbol("_", "q_R", "R", HEAD)
        assert cfg.at(0).gamma == "0" and cfg.at(0).ctl == SETTLED
        assert cfg.at(1).gamma == "1"
        assert cfg.at(5) == cfg.background[0]
        assert cfg.background[0].ctl == SETTLED

    def test_scattered_initial(self, zigzag):
        cfg = construction3_initial(zigzag, "11", ScatterMap(3))
        assert cfg.period == 3
        assert cfg.at(-3).ctl == HEAD
        assert cfg.at(0).gamma == "1" and cfg.at(3).gamma == "1"
        assert cfg.at(1).ctl == INACTIVE and cfg.at(-2).ctl == INACTIVE
        assert cfg.at(30).ctl == SETTLED and cfg.at(31).ctl == INACTIVE


class TestConstruction1:
    def test_first_step_trace(self, zigzag_c1):
        cfg = zigzag_c1.initial("")
        trace = evolve(cfg, zigzag_c1.rule, [0, -1, 0], 3)
        assert trace.configuration_at(1).at(0) == ProductSymbol("1", "q_L", "L", FRESH)
        assert [ctl_at(trace, k, 0) for k in range(4)] == [SETTLED, FRESH, FRESH, HEAD]
        assert [ctl_at(trace, k, -1) for k in range(4)] == [HEAD, HEAD, SETTLED, SETTLED]
        assert trace.final.at(0) == ProductSymbol("1", "q_L", "L", HEAD)

    def test_background_is_fixed(self, zigzag_c1):
        filler = zigzag_c1.initial("").background[0]
        assert zigzag_c1.rule((filler, filler, filler)) == filler

    def test_clauses_agree_with_rule(self, zigzag_c1):
        for nb in all_neighborhoods(zigzag_c1):
            assert first_match(zigzag_c1.clauses, nb) == zigzag_c1.rule(nb)

    def test_literal_clauses_agree_with_rule(self, zigzag_literal):
        for nb in all_neighborhoods(zigzag_literal):
            assert first_match(zigzag_literal.clauses, nb) == zigzag_literal.rule(nb)

    def test_one_marker_overlaps_agree(self, zigzag_c1):
        nbs = [nb for nb in all_neighborhoods(zigzag_c1)
               if sum(1 for s in nb if s.ctl == HEAD) <= 1]
        assert len(nbs) > 20000
        overlaps = clause_conflicts(zigzag_c1, nbs)
        assert overlaps
        for c in overlaps:
            u, v, z = c["neighborhood"]
            assert c["clauses"] == ["promote_from_left", "promote_from_right"]
            assert c["agree"]
            assert (u.ctl, u.dir, v.ctl, z.ctl, z.dir) == (SETTLED, "R", FRESH, SETTLED, "L")

    def test_disagreeing_overlaps_need_two_markers(self, zigzag_c1):
        conflicts = [c for c in clause_conflicts(zigzag_c1) if not c["agree"]]
        assert conflicts
        for c in conflicts:
            u, v, z = c["neighborhood"]
            assert (u.ctl, u.dir, v.ctl, z.ctl, z.dir) == (HEAD, "R", SETTLED, HEAD, "L")
            assert set(c["clauses"]) == {"fire_right_move", "fire_left_move"}

    def test_promote_overlap_is_reachable(self, zigzag, zigzag_c1):
        # tras un movimiento a izquierda la celda nueva queda entre dos celdas asentadas
        cfg = construction1_initial(zigzag, "")
        trace = evolve(cfg, zigzag_c1.rule, ExplicitSequence([0, -1, 0, -1, 0]), 5)
        nb = trace.configuration_at(5).neighborhood(-1, 1)
        assert nb[0] == cfg.background[0]
        assert nb[1] == ProductSymbol("0", "q_R", "R", FRESH)
        assert nb[2] == ProductSymbol("1", "q_L", "L", SETTLED)
        assert matching_clauses(zigzag_c1, nb) == ["promote_from_left", "promote_from_right"]
        assert clause_conflicts(zigzag_c1, [nb])[0]["agree"]
        assert zigzag_c1.rule(nb) == nb[1]._replace(ctl=HEAD)

    def test_promote_guard_waits_for_demotion(self, zigzag_c1, zigzag_literal):
        left = ProductSymbol("_", "q_R", "R", SETTLED)
        fresh = ProductSymbol("0", "q_R", "R", FRESH)
        marker = ProductSymbol("1", "q_L", "L", HEAD)
        nb = (left, fresh, marker)
        assert zigzag_c1.rule(nb) == fresh
        assert zigzag_literal.rule(nb) == fresh._replace(ctl=HEAD)
        assert matching_clauses(zigzag_literal, nb) == ["promote_from_left"]


class TestConstruction2:
    def test_fire_keeps_marker(self, zigzag_c2):
        trace = evolve(zigzag_c2.initial(""), zigzag_c2.rule, [0], 1)
        assert trace.final.at(0) == ProductSymbol("1", "q_L", "L", HEAD)

    def test_left_move_fires_old_marker(self, zigzag_c2):
        trace = evolve(zigzag_c2.initial(""), zigzag_c2.rule, [0, -1], 2)
        assert trace.final.at(-1) == ProductSymbol("0", "q_R", "R", HEAD)
        assert trace.final.at(0).ctl == HEAD

    def test_otherwise_settles(self, zigzag_c2):
        cfg = zigzag_c2.initial("")
        trace = evolve(cfg, zigzag_c2.rule, [-1], 1)
        assert trace.final.at(-1) == cfg.background[0]
        assert trace.final.non_background() == {}

    def test_background_is_fixed(self, zigzag_c2):
        filler = zigzag_c2.initial("").background[0]
        assert zigzag_c2.rule((filler, filler, filler)) == filler


class TestConstruction3:
    def test_gap_one_equals_construction1(self, zigzag, zigzag_c1):
        c3 = compile_tm(zigzag, 3, gap=1)
        seq = scattered_sequence(1).prefix(600)
        t1 = evolve(zigzag_c1.initial("1"), zigzag_c1.rule, seq, len(seq))
        t3 = evolve(c3.initial("1", ScatterMap(1)), c3.rule, seq, len(seq))
        assert t1.updates == t3.updates
        assert t1.final.same_as(t3.final)

    def test_inactive_cells_never_change(self, zigzag):
        c3 = compile_tm(zigzag, 3, gap=2)
        trace = evolve(c3.initial("", ScatterMap(2)), c3.rule, range(-30, 31), 61)
        assert all(u.pos % 2 == 0 for u in trace.updates)

    def test_fire_reaches_across_gap(self, zigzag):
        c3 = compile_tm(zigzag, 3, gap=2)
        trace = evolve(c3.initial("", ScatterMap(2)), c3.rule, ExplicitSequence([0]), 1)
        assert trace.final.at(0) == ProductSymbol("1", "q_L", "L", FRESH)


class TestManifest:
    def test_keys(self, zigzag_c1):
        manifest = rule_manifest(zigzag_c1)
        assert manifest["radius"] == 1
        assert manifest["construction"] == 1
        assert manifest["clauses"][-1] == "otherwise"
        assert len(manifest["delta"]) == 6
        assert 0 < len(manifest["test_vectors"]) <= 256

    def test_vectors_are_rule_outputs(self, zigzag_c1):
        for vec in rule_manifest(zigzag_c1)["test_vectors"]:
            nb = tuple(ProductSymbol(*s) for s in vec["neighborhood"])
            assert zigzag_c1.rule(nb).as_list() == vec["output"]

    def test_scattered_manifest(self, zigzag):
        manifest = rule_manifest(compile_tm(zigzag, 3, gap=2))
        assert manifest["gap"] == 2
        assert manifest["radius"] == 2
        assert all(len(v["neighborhood"]) == 5 for v in manifest["test_vectors"])
