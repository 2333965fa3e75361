// Session flow controller: drives one participant through the staged
// protocol. The server is authoritative; the controller only reads the
// current state and funnels one user input per screen into one API
// call. Rendering is injected, so the same flow runs in the browser
// and in headless tests.

import { ApiClient, ApiError } from "./api.js";
import { BoardModel, ChoiceModel, boardModel, choiceModel } from "./board.js";
import type { ActionOutcome, CellPair, ClientView, Reveal } from "./types.js";

export type Screen =
  | { kind: "tutorial"; reference: string }
  | { kind: "quiz" }
  | { kind: "round"; view: ClientView; board: BoardModel }
  | { kind: "reveal"; reveal: Reveal; bonus: number }
  | { kind: "choice"; model: ChoiceModel }
  | { kind: "survey" }
  | { kind: "done"; bonus: number }
  | { kind: "stale-session" }
  | { kind: "error"; message: string };

export interface FlowHooks {
  onScreen(screen: Screen): void | Promise<void>;
  /** Pick 0 or 1 along the highlighted axis of the displayed board. */
  chooseAction(board: BoardModel, view: ClientView): number | Promise<number>;
  /** Pick one of the two offered games by label. */
  choosePreference(model: ChoiceModel): string | Promise<string>;
  surveyAnswers(): Record<string, string> | Promise<Record<string, string>>;
}

export interface RoundRecord {
  token: string;
  stage: string;
  round: number;
  boardCells: CellPair[][];
  chooses: string;
  action: number;
  outcome: ActionOutcome;
}

export interface FlowResult {
  sessionId: string;
  submissions: number;
  preference: string | null;
  rounds: RoundRecord[];
  finalBonus: number;
}

export class SessionFlow {
  private submittedTokens = new Set<string>();

  constructor(
    private readonly api: ApiClient,
    private readonly hooks: FlowHooks,
  ) {}

  /** Submit once per round token; a retry of the same token is safe
   * because the server treats round tokens idempotently. */
  private async submitOnce(
    sessionId: string,
    action: number,
    token: string,
  ): Promise<ActionOutcome> {
    if (this.submittedTokens.has(token)) {
      throw new Error(`double submission blocked for token ${token}`);
    }
    this.submittedTokens.add(token);
    try {
      return await this.api.submitAction(sessionId, action, token);
    } catch (err) {
      if (err instanceof ApiError) throw err;
      // Transport hiccup: retry the identical call once; same token, same effect.
      return await this.api.submitAction(sessionId, action, token);
    }
  }

  async run(): Promise<FlowResult> {
    const info = await this.api.createSession();
    const sessionId = info.session_id;
    const result: FlowResult = {
      sessionId,
      submissions: 0,
      preference: null,
      rounds: [],
      finalBonus: 0,
    };
    await this.hooks.onScreen({ kind: "tutorial", reference: info.tutorial });
    await this.api.advance(sessionId); // leave tutorial
    await this.hooks.onScreen({ kind: "quiz" });
    await this.api.advance(sessionId); // leave quiz

    for (;;) {
      let view: ClientView;
      try {
        view = await this.api.getState(sessionId);
      } catch (err) {
        if (err instanceof ApiError && err.status === 404) {
          await this.hooks.onScreen({ kind: "stale-session" });
          throw err;
        }
        throw err;
      }

      if (view.stage === "stage1" || view.stage === "stage2" || view.stage === "stage4") {
        if (!view.board) {
          await this.hooks.onScreen({ kind: "error", message: "play stage without a board" });
          throw new Error("play stage without a board");
        }
        const model = boardModel(view.board, null);
        if (model.kind === "error") {
          await this.hooks.onScreen({ kind: "error", message: model.message });
          throw new Error(model.message);
        }
        await this.hooks.onScreen({ kind: "round", view, board: model });
        const action = await this.hooks.chooseAction(model, view);
        const outcome = await this.submitOnce(sessionId, action, view.board.round_token);
        result.submissions += 1;
        result.rounds.push({
          token: view.board.round_token,
          stage: view.stage,
          round: view.round ?? 0,
          boardCells: view.board.cells,
          chooses: view.board.chooses,
          action,
          outcome,
        });
        if (outcome.reveal) {
          await this.hooks.onScreen({ kind: "reveal", reveal: outcome.reveal, bonus: outcome.bonus });
        }
        continue;
      }

      if (view.stage === "choice") {
        const model = choiceModel(view.choice?.options ?? [], sessionId);
        if (model.kind === "error") {
          await this.hooks.onScreen({ kind: "error", message: model.message });
          throw new Error(model.message);
        }
        await this.hooks.onScreen({ kind: "choice", model });
        const label = await this.hooks.choosePreference(model);
        await this.api.submitPreference(sessionId, label);
        result.preference = label;
        continue;
      }

      if (view.stage === "survey") {
        await this.hooks.onScreen({ kind: "survey" });
        const answers = await this.hooks.surveyAnswers();
        await this.api.submitSurvey(sessionId, answers);
        continue;
      }

      if (view.stage === "done") {
        result.finalBonus = view.bonus;
        await this.hooks.onScreen({ kind: "done", bonus: view.bonus });
        return result;
      }

      throw new Error(`unexpected stage ${view.stage}`);
    }
  }
}
