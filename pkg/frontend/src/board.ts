// Pure view models for the 2x2 board and the choice screen. These are
// data-in/data-out so they can be tested without a DOM; dom.ts turns
// them into elements. No payoff arithmetic happens here: every number
// shown is copied verbatim from a server payload.

import type { BoardPayload, CellPair, ChoiceOption, Reveal } from "./types.js";

export interface CellModel {
  row: number;
  col: number;
  payoffs: CellPair;
  selectable: boolean;
  revealed: boolean;
}

export interface BoardModel {
  kind: "board";
  color: string;
  chooses: "rows" | "cols";
  cells: CellModel[];
  // Indices the participant can pick: 0/1 along their axis.
  options: Array<{ index: number; title: string }>;
}

export interface ErrorPanel {
  kind: "error";
  message: string;
}

function wellFormed(cells: CellPair[][] | undefined): cells is CellPair[][] {
  return (
    Array.isArray(cells) &&
    cells.length === 2 &&
    cells.every(
      (row) =>
        Array.isArray(row) &&
        row.length === 2 &&
        row.every((pair) => Array.isArray(pair) && pair.length === 2),
    )
  );
}

const ROW_TITLES = ["top row", "bottom row"];
const COL_TITLES = ["left column", "right column"];

export function boardModel(board: BoardPayload, reveal: Reveal | null = null): BoardModel | ErrorPanel {
  if (!wellFormed(board?.cells)) {
    return { kind: "error", message: "malformed board payload" };
  }
  if (board.chooses !== "rows" && board.chooses !== "cols") {
    return { kind: "error", message: `unknown axis ${String(board.chooses)}` };
  }
  const revealCell = reveal?.status === "resolved" ? reveal.cell : undefined;
  const cells: CellModel[] = [];
  for (let row = 0; row < 2; row++) {
    for (let col = 0; col < 2; col++) {
      cells.push({
        row,
        col,
        payoffs: board.cells[row][col],
        selectable: true,
        revealed: revealCell !== undefined && revealCell[0] === row && revealCell[1] === col,
      });
    }
  }
  const titles = board.chooses === "rows" ? ROW_TITLES : COL_TITLES;
  return {
    kind: "board",
    color: board.color,
    chooses: board.chooses,
    cells,
    options: [0, 1].map((index) => ({ index, title: titles[index] })),
  };
}

export interface ChoiceModel {
  kind: "choice";
  // Options in display order; placement is randomized per session so the
  // first-listed game is not always on the left.
  options: Array<{ label: string; color: string; cells: CellPair[][] }>;
}

/** Stable tiny hash for per-session placement randomization. */
export function placementBit(sessionId: string): number {
  let h = 5381;
  for (const ch of sessionId) {
    h = (h * 33 + ch.charCodeAt(0)) >>> 0;
  }
  return h & 1;
}

export function choiceModel(options: ChoiceOption[], sessionId: string): ChoiceModel | ErrorPanel {
  if (!Array.isArray(options) || options.length !== 2 || !options.every((o) => wellFormed(o.cells))) {
    return { kind: "error", message: "malformed choice payload" };
  }
  const ordered = placementBit(sessionId) === 0 ? options : [options[1], options[0]];
  return {
    kind: "choice",
    options: ordered.map((o) => ({ label: o.label, color: o.color, cells: o.cells })),
  };
}
