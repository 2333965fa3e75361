// Browser rendering of flow screens. Every interactive element funnels
// into a single pending promise resolver, and controls are disabled the
// moment one is clicked, so a screen can never emit two API calls.

import { BoardModel, CellModel, ChoiceModel } from "./board.js";
import { FlowHooks, Screen } from "./flow.js";
import type { ClientView } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function cellTable(cells: { payoffs: [number, number] }[][] | CellModel[], color: string): HTMLTableElement {
  const grid: { payoffs: [number, number]; revealed?: boolean }[][] =
    Array.isArray(cells[0])
      ? (cells as { payoffs: [number, number] }[][])
      : [
          (cells as CellModel[]).filter((c) => c.row === 0),
          (cells as CellModel[]).filter((c) => c.row === 1),
        ];
  const table = el("table", "board");
  table.style.borderColor = color;
  for (const row of grid) {
    const tr = el("tr");
    for (const cell of row) {
      const td = el("td", cell.revealed ? "cell revealed" : "cell");
      td.textContent = `${cell.payoffs[0]} / ${cell.payoffs[1]}`;
      tr.appendChild(td);
    }
    table.appendChild(tr);
  }
  return table;
}

export class DomView implements FlowHooks {
  private root: HTMLElement;
  private pendingAction: ((index: number) => void) | null = null;
  private pendingChoice: ((label: string) => void) | null = null;
  private pendingContinue: (() => void) | null = null;

  constructor(root: HTMLElement) {
    this.root = root;
  }

  private clear(): HTMLElement {
    this.root.innerHTML = "";
    return this.root;
  }

  private continueButton(label: string): HTMLButtonElement {
    const button = el("button", "continue", label);
    button.addEventListener("click", () => {
      button.disabled = true;
      const resolve = this.pendingContinue;
      this.pendingContinue = null;
      resolve?.();
    });
    return button;
  }

  private waitForContinue(): Promise<void> {
    return new Promise((resolve) => {
      this.pendingContinue = resolve;
    });
  }

  async onScreen(screen: Screen): Promise<void> {
    const root = this.clear();
    switch (screen.kind) {
      case "tutorial": {
        root.appendChild(el("h2", undefined, "How to read the board"));
        root.appendChild(
          el(
            "p",
            undefined,
            "Each cell shows two scores: the row chooser's first, the column chooser's second. " +
              "You will pick a row or a column; the other player picks the other axis.",
          ),
        );
        root.appendChild(this.continueButton("Start the quiz"));
        await this.waitForContinue();
        break;
      }
      case "quiz": {
        root.appendChild(el("h2", undefined, "Comprehension check"));
        root.appendChild(el("p", undefined, "Confirm you can read both scores in a cell."));
        root.appendChild(this.continueButton("I understand"));
        await this.waitForContinue();
        break;
      }
      case "round": {
        const view = screen.view;
        root.appendChild(
          el("h2", undefined, `Round ${view.round} of ${view.rounds_per_stage}`),
        );
        root.appendChild(el("p", "bonus", `Bonus so far: ${view.bonus.toFixed(2)} points`));
        root.appendChild(cellTable(screen.board.cells as CellModel[], screen.board.color));
        const picks = el("div", "picks");
        for (const option of screen.board.options) {
          const button = el("button", "pick", `Play the ${option.title}`);
          button.addEventListener("click", () => {
            for (const b of Array.from(picks.querySelectorAll("button"))) {
              (b as HTMLButtonElement).disabled = true;
            }
            const resolve = this.pendingAction;
            this.pendingAction = null;
            resolve?.(option.index);
          });
          picks.appendChild(button);
        }
        root.appendChild(picks);
        break;
      }
      case "reveal": {
        const reveal = screen.reveal;
        root.appendChild(el("h2", undefined, "Round result"));
        if (reveal.status === "resolved") {
          root.appendChild(
            el("p", undefined, `You earned ${reveal.your_points} points this round.`),
          );
        } else {
          root.appendChild(
            el(
              "p",
              undefined,
              "Your move is recorded. The other player answers later; " +
                `your estimated bonus is ${reveal.bonus_estimate ?? 0}.`,
            ),
          );
        }
        root.appendChild(el("p", "bonus", `Bonus so far: ${screen.bonus.toFixed(2)} points`));
        break;
      }
      case "choice": {
        root.appendChild(el("h2", undefined, "Pick the game you prefer to play"));
        const row = el("div", "choice-row");
        for (const option of screen.model.options) {
          const panel = el("div", "choice-panel");
          panel.appendChild(cellTable(option.cells.map((r) => r.map((p) => ({ payoffs: p }))), option.color));
          const button = el("button", "pick", "Play this game");
          button.addEventListener("click", () => {
            for (const b of Array.from(row.querySelectorAll("button"))) {
              (b as HTMLButtonElement).disabled = true;
            }
            const resolve = this.pendingChoice;
            this.pendingChoice = null;
            resolve?.(option.label);
          });
          panel.appendChild(button);
          row.appendChild(panel);
        }
        root.appendChild(row);
        break;
      }
      case "survey": {
        root.appendChild(el("h2", undefined, "Almost done"));
        root.appendChild(el("p", undefined, "A few closing questions."));
        root.appendChild(this.continueButton("Submit survey"));
        await this.waitForContinue();
        break;
      }
      case "done": {
        root.appendChild(el("h2", undefined, "Thanks for playing!"));
        root.appendChild(
          el("p", "bonus", `Final bonus: ${screen.bonus.toFixed(2)} points`),
        );
        break;
      }
      case "stale-session": {
        root.appendChild(el("div", "banner error", "This session is no longer active. Please reload."));
        break;
      }
      case "error": {
        root.appendChild(el("div", "banner error", `Something went wrong: ${screen.message}`));
        break;
      }
    }
  }

  chooseAction(_board: BoardModel, _view: ClientView): Promise<number> {
    return new Promise((resolve) => {
      this.pendingAction = resolve;
    });
  }

  choosePreference(_model: ChoiceModel): Promise<string> {
    return new Promise((resolve) => {
      this.pendingChoice = resolve;
    });
  }

  surveyAnswers(): Record<string, string> {
    return { completed: "yes" };
  }
}
