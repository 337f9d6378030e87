"""IPC-2018-style benchmark harness over games x levels x planners.

Metrics per planner and game:
  * coverage     -- number of levels solved;
  * satisficing  -- sum over levels of C*/C, the best known plan length over
                    the found length (0 when unsolved); the per-level
                    reference C* is the cheapest plan any planner found, and
                    is flagged "optimal" when a BlindBFS run produced it;
  * agile        -- sum over levels of the logarithmic time score:
                    1 for T <= 1s, 1 - log(T)/log(900) up to the 900s cap, 0
                    beyond.

Write-ups sometimes print the satisficing ratio inverted (C/C*); the IPC
convention C*/C is implemented here so per-level scores stay within [0, 1].

Times wrap grounding + search (compilation is excluded).  Results persist as
one CSV row per (planner, game, level); rerunning with a partial results file
skips finished rows and recomputes identical aggregates.
"""
from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import yaml

from .compiler import CompiledGame, compile_game
from .games import available_games, level_paths, load_game
from .ground import ground
from .pddl import Domain, print_domain, print_problem
from .planner import Mode, SearchConfig, Status, external_solve, solve
from .problems import generate_problem
from .vgdl import SPRITE_TYPE_BY_NAME, parse_ldf

TIME_CAP = 900.0


# -- metrics -------------------------------------------------------------------------

def score_coverage(solved_flags) -> int:
    return sum(1 for s in solved_flags if s)


def score_satisficing(length: Optional[int], reference: Optional[int]) -> float:
    """C*/C for a solved level; 0 when unsolved."""
    if length is None or reference is None or length <= 0:
        return 0.0
    return reference / length


def score_agile(seconds: Optional[float]) -> float:
    if seconds is None:
        return 0.0
    if seconds <= 1.0:
        return 1.0
    if seconds > TIME_CAP:
        return 0.0
    return 1.0 - math.log(seconds) / math.log(TIME_CAP)


@dataclass(frozen=True)
class DomainStats:
    types: int
    supertypes: int
    predicates: int
    actions: int


def domain_stats(domain: Domain) -> DomainStats:
    """Element counts; supertypes are the declared VGDL-class type names."""
    class_names = {n.lower() for n in SPRITE_TYPE_BY_NAME}
    supertypes = sum(1 for n, _ in domain.types if n.lower() in class_names)
    return DomainStats(
        types=len(domain.types) - supertypes,
        supertypes=supertypes,
        predicates=len(domain.predicates),
        actions=len(domain.actions),
    )


# -- planner configuration ------------------------------------------------------------

@dataclass(frozen=True)
class PlannerSpec:
    name: str
    mode: Optional[Mode] = None  # builtin
    cmd: Optional[str] = None    # external command template

    @property
    def is_blind(self) -> bool:
        return self.mode is Mode.BLIND_BFS


BUILTIN_PLANNERS = (
    PlannerSpec("gbfs-hadd", mode=Mode.GBFS_HADD),
    PlannerSpec("blind-bfs", mode=Mode.BLIND_BFS),
)


def load_planners(path: Optional[Path]) -> tuple[PlannerSpec, ...]:
    if path is None:
        return BUILTIN_PLANNERS
    data = yaml.safe_load(Path(path).read_text())
    specs = []
    for entry in data["planners"]:
        if "mode" in entry:
            specs.append(PlannerSpec(entry["name"], mode=Mode(entry["mode"])))
        elif "cmd" in entry:
            specs.append(PlannerSpec(entry["name"], cmd=entry["cmd"]))
        else:
            raise ValueError(f"planner {entry.get('name')} needs mode or cmd")
    return tuple(specs)


# -- result store --------------------------------------------------------------------

@dataclass(frozen=True)
class RunRow:
    planner: str
    game: str
    level: int
    solved: bool
    plan_length: Optional[int]
    seconds: Optional[float]
    blind: bool = False  # produced by a BlindBFS-mode planner

    def key(self):
        return (self.planner, self.game, self.level)


RESULT_FIELDS = ("planner", "game", "level", "solved", "plan_length",
                 "seconds", "blind")


def read_results(path: Path) -> list[RunRow]:
    rows = []
    if not path.exists():
        return rows
    with path.open() as fh:
        for rec in csv.DictReader(fh):
            rows.append(RunRow(
                planner=rec["planner"],
                game=rec["game"],
                level=int(rec["level"]),
                solved=rec["solved"] == "True",
                plan_length=int(rec["plan_length"]) if rec["plan_length"] else None,
                seconds=float(rec["seconds"]) if rec["seconds"] else None,
                blind=rec.get("blind") == "True",
            ))
    return rows


def append_result(path: Path, row: RunRow) -> None:
    new_file = not path.exists()
    with path.open("a", newline="") as fh:
        writer = csv.writer(fh)
        if new_file:
            writer.writerow(RESULT_FIELDS)
        writer.writerow([row.planner, row.game, row.level, row.solved,
                         row.plan_length if row.plan_length is not None else "",
                         f"{row.seconds:.4f}" if row.seconds is not None else "",
                         row.blind])
        fh.flush()


# -- score board ---------------------------------------------------------------------

@dataclass
class ScoreBoard:
    rows: list[RunRow]

    def planners(self) -> list[str]:
        return sorted({r.planner for r in self.rows})

    def games(self) -> list[str]:
        return sorted({r.game for r in self.rows})

    def reference(self, game: str, level: int
                  ) -> tuple[Optional[int], str]:
        """Best known length for a level and how it was obtained."""
        lengths = [r.plan_length for r in self.rows
                   if r.game == game and r.level == level and r.solved]
        if not lengths:
            return None, "none"
        best = min(lengths)
        verified = any(r.blind and r.solved and r.plan_length == best
                       for r in self.rows
                       if r.game == game and r.level == level)
        return best, "optimal" if verified else "best-found"

    def coverage(self, planner: str, game: str) -> int:
        return score_coverage(r.solved for r in self.rows
                              if r.planner == planner and r.game == game)

    def satisficing(self, planner: str, game: str) -> float:
        total = 0.0
        for r in self.rows:
            if r.planner != planner or r.game != game or not r.solved:
                continue
            ref, _ = self.reference(game, r.level)
            total += score_satisficing(r.plan_length, ref)
        return total

    def agile(self, planner: str, game: str) -> float:
        return sum(score_agile(r.seconds) for r in self.rows
                   if r.planner == planner and r.game == game and r.solved)


# -- harness -------------------------------------------------------------------------

@dataclass
class SuiteReport:
    board: ScoreBoard
    stats: dict[str, DomainStats]
    reductions: dict[str, float]  # game -> static object reduction (%)


def _run_one(spec: PlannerSpec, game: CompiledGame, level_path: Path,
             level_index: int, time_limit: float,
             work_dir: Path) -> RunRow:
    grid = parse_ldf(level_path.read_text(), game.model)
    problem, _ = generate_problem(grid, game)
    name = game.model.name
    if spec.cmd is not None:
        domain_file = work_dir / f"{name}.pddl"
        problem_file = work_dir / f"{name}_{level_index}.pddl"
        domain_file.write_text(print_domain(game.domain))
        problem_file.write_text(print_problem(problem))
        try:
            result = external_solve(domain_file, problem_file, spec.cmd,
                                    time_limit=time_limit)
        except Exception:
            return RunRow(spec.name, name, level_index, False, None, None)
        solved = result.status is Status.SOLVED
        return RunRow(spec.name, name, level_index, solved,
                      len(result.plan) if solved else None,
                      result.stats.wall_time if solved else None)
    started = time.perf_counter()
    task = ground(game.domain, problem)
    result = solve(task, SearchConfig(mode=spec.mode, time_limit=time_limit))
    elapsed = time.perf_counter() - started
    solved = result.status is Status.SOLVED
    return RunRow(spec.name, name, level_index, solved,
                  len(result.plan) if solved else None,
                  elapsed if solved else None, blind=spec.is_blind)


def static_reduction(game: CompiledGame, grid) -> float:
    """Object-count saving of the is-<T> encoding vs an all-objects one."""
    static_cells = 0
    dynamic = 0
    for x, y, char in grid.positions():
        if char in (" ", "."):
            continue
        for sprite in game.model.level_mapping[char]:
            if sprite in game.static_sprites:
                static_cells += 1
            else:
                dynamic += 1
    naive = static_cells + dynamic
    if naive == 0:
        return 0.0
    return 100.0 * static_cells / naive


def run_suite(suite_dir: Optional[Path] = None,
              planners: tuple[PlannerSpec, ...] = BUILTIN_PLANNERS,
              games: Optional[list[str]] = None,
              time_limit: float = TIME_CAP,
              jobs: int = 1,
              out_dir: Path = Path("bench-out")) -> SuiteReport:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results_path = out_dir / "results.csv"
    rows = read_results(results_path)
    done = {r.key() for r in rows}

    games = games or available_games(suite_dir)
    compiled: dict[str, CompiledGame] = {
        name: compile_game(load_game(name, suite_dir)) for name in games}

    jobs_list = []
    for name in games:
        for level_index, level_path in enumerate(level_paths(name, suite_dir)):
            for spec in planners:
                if (spec.name, name, level_index) in done:
                    continue
                jobs_list.append((spec, compiled[name], level_path, level_index))

    work_dir = out_dir / "pddl"
    work_dir.mkdir(exist_ok=True)

    def runner(job):
        spec, game, level_path, level_index = job
        return _run_one(spec, game, level_path, level_index, time_limit,
                        work_dir)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            new_rows = list(pool.map(runner, jobs_list))
    else:
        new_rows = [runner(job) for job in jobs_list]
    for row in new_rows:
        append_result(results_path, row)
        rows.append(row)

    board = ScoreBoard(rows)
    stats = {name: domain_stats(compiled[name].domain) for name in games}
    reductions = {}
    for name in games:
        paths = level_paths(name, suite_dir)
        if paths:
            grid = parse_ldf(paths[0].read_text(), compiled[name].model)
            reductions[name] = static_reduction(compiled[name], grid)
    report = SuiteReport(board, stats, reductions)
    (out_dir / "summary.csv").write_text(summary_csv(report))
    (out_dir / "report.txt").write_text(format_report(report))
    return report


def summary_csv(report: SuiteReport) -> str:
    lines = ["planner,game,coverage,satisficing,agile"]
    board = report.board
    for planner in board.planners():
        for game in board.games():
            lines.append(
                f"{planner},{game},{board.coverage(planner, game)},"
                f"{board.satisficing(planner, game):.2f},"
                f"{board.agile(planner, game):.2f}")
    return "\n".join(lines) + "\n"


def format_report(report: SuiteReport) -> str:
    board = report.board
    games = board.games()
    planners = board.planners()
    out = []

    def table(title, cell):
        out.append(title)
        header = f"{'planner':<14}" + "".join(f"{g:>14}" for g in games) \
            + f"{'SUM':>10}"
        out.append(header)
        for p in planners:
            cells = [cell(p, g) for g in games]
            total = sum(cells)
            row = f"{p:<14}" + "".join(f"{c:>14.2f}" for c in cells) \
                + f"{total:>10.2f}"
            out.append(row)
        out.append("")

    table("Coverage", lambda p, g: float(board.coverage(p, g)))
    table("Satisficing", board.satisficing)
    table("Agile", board.agile)

    out.append("Reference plans")
    for g in games:
        levels = sorted({r.level for r in board.rows if r.game == g})
        for lvl in levels:
            ref, source = board.reference(g, lvl)
            out.append(f"  {g} level {lvl}: C*="
                       f"{ref if ref is not None else '-'} ({source})")
    out.append("")

    out.append("Domain statistics (types/supertypes/predicates/actions)")
    for g, s in sorted(report.stats.items()):
        out.append(f"  {g}: {s.types}/{s.supertypes}/{s.predicates}/{s.actions}")
    out.append("")

    out.append("Static-object encoding: instance reduction vs all-objects")
    for g, pct in sorted(report.reductions.items()):
        out.append(f"  {g}: {pct:.1f}% of cells are static facts, not objects")
    out.append("")
    return "\n".join(out)
