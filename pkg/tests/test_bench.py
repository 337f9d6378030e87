"""Metric and harness tests; formula values frozen from direct evaluation."""
import math

import pytest

from vgdl2pddl.bench import (
    PlannerSpec,
    RunRow,
    ScoreBoard,
    domain_stats,
    run_suite,
    score_agile,
    score_coverage,
    score_satisficing,
)
from vgdl2pddl.compiler import compile_domain
from vgdl2pddl.games import load_game
from vgdl2pddl.pddl import Domain
from vgdl2pddl.planner import Mode


class TestAgile:
    def test_boundaries(self):
        assert score_agile(1.0) == 1.0
        assert score_agile(0.2) == 1.0
        assert score_agile(900.0) == 0.0
        assert score_agile(901.0) == 0.0
        assert score_agile(None) == 0.0

    def test_thirty_seconds(self):
        expected = 1.0 - math.log(30.0) / math.log(900.0)
        assert score_agile(30.0) == pytest.approx(expected)
        assert score_agile(30.0) == pytest.approx(0.5)  # log 30 = half log 900

    def test_monotone_decreasing(self):
        times = [1, 2, 5, 30, 100, 500, 899]
        scores = [score_agile(t) for t in times]
        assert scores == sorted(scores, reverse=True)


class TestSatisficing:
    def test_equal_lengths_score_one(self):
        assert score_satisficing(12, 12) == 1.0

    def test_double_length_halves(self):
        assert score_satisficing(24, 12) == 0.5

    def test_unsolved_scores_zero(self):
        assert score_satisficing(None, 12) == 0.0
        assert score_satisficing(12, None) == 0.0


class TestCoverage:
    def test_counts(self):
        assert score_coverage([True] * 10) == 10
        assert score_coverage([False] * 5) == 0
        assert score_coverage([True, True, False]) == 2


class TestDomainStats:
    def test_sokoban_and_zenpuzzle_rows(self):
        s = domain_stats(compile_domain(load_game("sokoban")))
        assert (s.types, s.supertypes, s.predicates, s.actions) == (4, 3, 13, 12)
        z = domain_stats(compile_domain(load_game("zenpuzzle")))
        assert (z.types, z.supertypes, z.predicates, z.actions) == (5, 2, 15, 8)

    def test_empty_domain(self):
        empty = Domain("toy", (), (), (), ())
        s = domain_stats(empty)
        assert (s.types, s.supertypes, s.predicates, s.actions) == (0, 0, 0, 0)


def row(planner, game, level, solved, length=None, seconds=None, blind=False):
    return RunRow(planner, game, level, solved, length, seconds, blind)


class TestScoreBoard:
    def test_reference_is_min_over_planners(self):
        board = ScoreBoard([
            row("a", "g", 0, True, 20, 1.0),
            row("b", "g", 0, True, 10, 2.0),
        ])
        ref, source = board.reference("g", 0)
        assert ref == 10 and source == "best-found"
        assert board.satisficing("b", "g") == 1.0
        assert board.satisficing("a", "g") == 0.5

    def test_blind_reference_flagged_optimal(self):
        board = ScoreBoard([
            row("bfs", "g", 0, True, 10, 2.0, blind=True),
            row("a", "g", 0, True, 20, 1.0),
        ])
        assert board.reference("g", 0) == (10, "optimal")

    def test_monotonicity_adding_results(self):
        base = [row("a", "g", 0, True, 20, 1.0)]
        board = ScoreBoard(list(base))
        before = board.satisficing("a", "g")
        board2 = ScoreBoard(base + [row("b", "g", 0, True, 12, 1.0)])
        after = board2.satisficing("a", "g")
        assert after <= before

    def test_per_game_sums_bounded_by_level_count(self):
        rows = [row("a", "g", i, True, 10 + i, 0.5) for i in range(10)]
        board = ScoreBoard(rows)
        assert board.satisficing("a", "g") <= 10
        assert board.agile("a", "g") <= 10
        assert board.coverage("a", "g") <= 10


@pytest.fixture(scope="module")
def suite(tmp_path_factory):
    out = tmp_path_factory.mktemp("bench")
    planners = (PlannerSpec("gbfs-hadd", mode=Mode.GBFS_HADD),)
    report = run_suite(planners=planners,
                       games=["sokoban", "keymaze"],
                       time_limit=60, out_dir=out)
    return out, report


class TestHarness:

    def test_all_levels_solved(self, suite):
        _, report = suite
        for game in ("sokoban", "keymaze"):
            assert report.board.coverage("gbfs-hadd", game) == 2

    def test_outputs_written(self, suite):
        out, report = suite
        assert (out / "results.csv").exists()
        assert (out / "summary.csv").exists()
        text = (out / "report.txt").read_text()
        assert "Coverage" in text and "Agile" in text
        assert "sokoban: 4/3/13/12" in text
        assert "static facts" in text

    def test_static_reduction_reported(self, suite):
        _, report = suite
        # 16 walls vs 3 placed objects on the 5x5 level
        assert report.reductions["sokoban"] == pytest.approx(100 * 16 / 19)

    def test_resumable_identical_aggregates(self, suite):
        out, report = suite
        planners = (PlannerSpec("gbfs-hadd", mode=Mode.GBFS_HADD),)
        again = run_suite(planners=planners, games=["sokoban", "keymaze"],
                          time_limit=60, out_dir=out)
        for game in ("sokoban", "keymaze"):
            assert again.board.coverage("gbfs-hadd", game) == \
                report.board.coverage("gbfs-hadd", game)
            assert again.board.satisficing("gbfs-hadd", game) == \
                pytest.approx(report.board.satisficing("gbfs-hadd", game))
        # no duplicate rows were appended
        assert len(again.board.rows) == len(report.board.rows)

    def test_parallel_workers_match_sequential(self, tmp_path):
        planners = (PlannerSpec("gbfs-hadd", mode=Mode.GBFS_HADD),)
        seq = run_suite(planners=planners, games=["sokoban"], time_limit=60,
                        jobs=1, out_dir=tmp_path / "seq")
        par = run_suite(planners=planners, games=["sokoban"], time_limit=60,
                        jobs=2, out_dir=tmp_path / "par")
        assert par.board.coverage("gbfs-hadd", "sokoban") == \
            seq.board.coverage("gbfs-hadd", "sokoban")
        assert par.board.satisficing("gbfs-hadd", "sokoban") == \
            pytest.approx(seq.board.satisficing("gbfs-hadd", "sokoban"))

    def test_stub_external_planner_scored(self, tmp_path):
        # external adapter wired through the harness with a canned plan
        out = tmp_path / "out"
        from vgdl2pddl.compiler import compile_game
        from vgdl2pddl.games import load_level
        from vgdl2pddl.ground import ground
        from vgdl2pddl.planner import SearchConfig, solve
        from vgdl2pddl.problems import generate_problem
        from vgdl2pddl.pddl import format_plan
        game = compile_game(load_game("sokoban"))
        grid = load_level("sokoban", 0, game.model)
        problem, _ = generate_problem(grid, game)
        task = ground(game.domain, problem)
        plan = solve(task, SearchConfig(mode=Mode.GBFS_HADD)).plan
        canned = tmp_path / "canned_plan.txt"
        canned.write_text(format_plan((a.name, a.args) for a in plan))
        stub = PlannerSpec("stub", cmd=f"cp {canned} {{plan}}")
        report = run_suite(planners=(stub,), games=["sokoban"],
                           time_limit=60, out_dir=out)
        # the canned plan only fits level 0; level 1 must be rejected
        assert report.board.coverage("stub", "sokoban") == 1
