"""Access to the shipped example games (GDF + levels as package data)."""
from __future__ import annotations

from importlib import resources
from pathlib import Path

from .vgdl import GameModel, LevelGrid, parse_gdf, parse_ldf


def games_dir() -> Path:
    return Path(resources.files("vgdl2pddl")) / "games"


def available_games(directory: Path | None = None) -> list[str]:
    directory = directory or games_dir()
    return sorted(p.name for p in directory.iterdir() if p.is_dir())


def load_game(name: str, directory: Path | None = None) -> GameModel:
    directory = directory or games_dir()
    path = directory / name / f"{name}.txt"
    return parse_gdf(path.read_text(), name=name)


def level_paths(name: str, directory: Path | None = None) -> list[Path]:
    directory = directory or games_dir()
    return sorted((directory / name).glob(f"{name}_lvl*.txt"))


def load_level(name: str, index: int, model: GameModel | None = None,
               directory: Path | None = None) -> LevelGrid:
    directory = directory or games_dir()
    model = model or load_game(name, directory)
    path = directory / name / f"{name}_lvl{index}.txt"
    return parse_ldf(path.read_text(), model)
