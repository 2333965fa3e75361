// Payload shapes mirrored from the session service. The client renders
// exactly what the server sends and never derives payoffs itself.

export type Stage =
  | "tutorial"
  | "quiz"
  | "stage1"
  | "stage2"
  | "choice"
  | "stage4"
  | "survey"
  | "done";

// cells are row-major [[u_row, u_col], ...] pairs as displayed.
export type CellPair = [number, number];

export interface BoardPayload {
  cells: CellPair[][];
  chooses: "rows" | "cols";
  color: string;
  round_token: string;
}

export interface ChoiceOption {
  label: string;
  cells: CellPair[][];
  color: string;
}

export interface Reveal {
  status: "resolved" | "pending";
  cell?: [number, number];
  cell_payoffs?: CellPair;
  your_points?: number;
  your_role?: string;
  bonus_estimate?: number | null;
}

export interface ClientView {
  session_id: string;
  stage: Stage;
  round: number | null;
  rounds_per_stage: number;
  bonus: number;
  reveal: Reveal | null;
  abandoned: boolean;
  board?: BoardPayload;
  choice?: { options: ChoiceOption[] };
}

export interface SessionInfo {
  session_id: string;
  stage: Stage;
  tutorial: string;
  rounds_per_stage: number;
}

export interface ActionOutcome {
  status: "resolved" | "pending";
  round_token: string;
  reveal: Reveal | null;
  bonus: number;
  stage: Stage;
}
