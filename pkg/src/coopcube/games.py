"""2x2 bimatrix games and the 8 payoff-preserving board presentations.

A game is stored in a fixed canonical orientation: Player 1 picks a row
(0=top, 1=bottom), Player 2 picks a column (0=left, 1=right), and every
cell holds the pair (u1, u2) in that order.  The eight presentations --
row swap, column swap, transpose, and their compositions -- act only on
how a board is displayed; analysis always runs on the canonical game.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

# Binary action indices in the canonical orientation.
TOP, BOTTOM = 0, 1
LEFT, RIGHT = 0, 1

Action = int


class Payoff(NamedTuple):
    """Point payoffs for one outcome cell."""

    u1: int
    u2: int

    def swapped(self) -> "Payoff":
        return Payoff(self.u2, self.u1)


Cells = tuple[tuple[Payoff, Payoff], tuple[Payoff, Payoff]]


class Role(Enum):
    PLAYER1 = "player1"  # chooses rows in the canonical orientation
    PLAYER2 = "player2"  # chooses columns

    @property
    def other(self) -> "Role":
        return Role.PLAYER2 if self is Role.PLAYER1 else Role.PLAYER1


@dataclass(frozen=True)
class BimatrixGame:
    """A 2x2 game with non-negative integer point payoffs."""

    game_id: str
    cells: Cells

    def __post_init__(self) -> None:
        if len(self.cells) != 2 or any(len(row) != 2 for row in self.cells):
            raise ValueError("a bimatrix game needs exactly 2x2 cells")
        for row in self.cells:
            for cell in row:
                if cell.u1 < 0 or cell.u2 < 0:
                    raise ValueError(f"negative payoff in {self.game_id}: {cell}")

    @classmethod
    def from_rows(cls, game_id: str, rows) -> "BimatrixGame":
        """Build from [[(u1,u2),(u1,u2)],[(u1,u2),(u1,u2)]] row-major input."""
        cells = tuple(tuple(Payoff(int(a), int(b)) for a, b in row) for row in rows)
        return cls(game_id, cells)  # type: ignore[arg-type]

    def flat(self) -> tuple[Payoff, ...]:
        """Cells in row-major order: top-left, top-right, bottom-left, bottom-right."""
        return (self.cells[0][0], self.cells[0][1], self.cells[1][0], self.cells[1][1])

    def total(self) -> int:
        return sum(c.u1 + c.u2 for c in self.flat())

    def scaled(self, factor: int, game_id: str | None = None) -> "BimatrixGame":
        cells = tuple(
            tuple(Payoff(c.u1 * factor, c.u2 * factor) for c in row) for row in self.cells
        )
        return BimatrixGame(game_id or self.game_id, cells)  # type: ignore[arg-type]


def payoff(game: BimatrixGame, a1: Action, a2: Action) -> Payoff:
    """Resolve a pair of canonical actions to the outcome cell."""
    if a1 not in (0, 1) or a2 not in (0, 1):
        raise ValueError(f"actions must be 0 or 1, got ({a1}, {a2})")
    return game.cells[a1][a2]


class Transformation(Enum):
    """The 8 presentations of a board, closed under composition.

    Composite kinds apply the transpose first, then the row/column swaps.
    Transpose mirrors the grid across the main diagonal and swaps (u1, u2)
    inside every cell, so the displayed board is always readable as
    "row chooser's payoff first".
    """

    IDENTITY = "identity"
    SWAP_ROWS = "swap_rows"
    SWAP_COLS = "swap_cols"
    SWAP_BOTH = "swap_both"
    TRANSPOSE = "transpose"
    TRANSPOSE_SWAP_ROWS = "transpose_swap_rows"
    TRANSPOSE_SWAP_COLS = "transpose_swap_cols"
    TRANSPOSE_SWAP_BOTH = "transpose_swap_both"

    @property
    def flags(self) -> tuple[bool, bool, bool]:
        """(transpose, swap_rows, swap_cols) components of this kind."""
        return _FLAGS[self]

    @property
    def transpose(self) -> bool:
        return self.flags[0]

    @property
    def swap_rows(self) -> bool:
        return self.flags[1]

    @property
    def swap_cols(self) -> bool:
        return self.flags[2]


_FLAGS: dict[Transformation, tuple[bool, bool, bool]] = {
    Transformation.IDENTITY: (False, False, False),
    Transformation.SWAP_ROWS: (False, True, False),
    Transformation.SWAP_COLS: (False, False, True),
    Transformation.SWAP_BOTH: (False, True, True),
    Transformation.TRANSPOSE: (True, False, False),
    Transformation.TRANSPOSE_SWAP_ROWS: (True, True, False),
    Transformation.TRANSPOSE_SWAP_COLS: (True, False, True),
    Transformation.TRANSPOSE_SWAP_BOTH: (True, True, True),
}

_BY_FLAGS = {flags: kind for kind, flags in _FLAGS.items()}

ALL_TRANSFORMATIONS: tuple[Transformation, ...] = tuple(Transformation)


def apply_transformation(game: BimatrixGame, t: Transformation) -> BimatrixGame:
    """Return the board as displayed under presentation `t`."""
    tr, sr, sc = t.flags
    cells = game.cells
    if tr:
        cells = tuple(
            tuple(cells[j][i].swapped() for j in (0, 1)) for i in (0, 1)
        )  # type: ignore[assignment]
    if sr:
        cells = (cells[1], cells[0])
    if sc:
        cells = tuple((row[1], row[0]) for row in cells)  # type: ignore[assignment]
    return BimatrixGame(game.game_id, cells)  # type: ignore[arg-type]


def compose(t1: Transformation, t2: Transformation) -> Transformation:
    """The kind equivalent to applying t2 first and then t1.

    Swaps commute with each other; pulling a transpose past a row swap
    turns it into a column swap and vice versa.
    """
    tr1, sr1, sc1 = t1.flags
    tr2, sr2, sc2 = t2.flags
    if tr1:
        return _BY_FLAGS[(not tr2, sr1 ^ sc2, sc1 ^ sr2)]
    return _BY_FLAGS[(tr2, sr1 ^ sr2, sc1 ^ sc2)]


def inverse(t: Transformation) -> Transformation:
    """The kind undoing `t` (every presentation is invertible)."""
    for candidate in ALL_TRANSFORMATIONS:
        if compose(candidate, t) is Transformation.IDENTITY:
            return candidate
    raise AssertionError("unreachable: the 8 kinds form a group")


class Presentation(NamedTuple):
    """What one participant sees for a round: the board plus their axis."""

    board: BimatrixGame
    chooses: str  # "rows" or "cols" on the displayed board


def viewer_presentation(game: BimatrixGame, role: Role, t: Transformation) -> Presentation:
    """Displayed board plus which axis `role` selects on it."""
    board = apply_transformation(game, t)
    if role is Role.PLAYER1:
        chooses = "cols" if t.transpose else "rows"
    else:
        chooses = "rows" if t.transpose else "cols"
    return Presentation(board, chooses)


def displayed_to_canonical(t: Transformation, role: Role, index: int) -> Action:
    """Map a choice made on the displayed board back to a canonical action.

    The map is an XOR with the swap bit of the axis the role occupies on
    the displayed board, so it is its own inverse.
    """
    if index not in (0, 1):
        raise ValueError(f"displayed index must be 0 or 1, got {index}")
    tr, sr, sc = t.flags
    if role is Role.PLAYER1:
        return index ^ (sc if tr else sr)
    return index ^ (sr if tr else sc)


def canonical_to_displayed(t: Transformation, role: Role, action: Action) -> int:
    return displayed_to_canonical(t, role, action)


def game_to_record(game: BimatrixGame) -> dict:
    """Canonical serialization: row-major cells as [u1, u2] pairs."""
    return {
        "game_id": game.game_id,
        "cells": [[c.u1, c.u2] for c in game.flat()],
    }


def game_from_record(record: dict) -> BimatrixGame:
    flat = [Payoff(int(a), int(b)) for a, b in record["cells"]]
    if len(flat) != 4:
        raise ValueError("game record needs exactly 4 cells")
    cells = ((flat[0], flat[1]), (flat[2], flat[3]))
    return BimatrixGame(str(record["game_id"]), cells)
