// DOM wiring for the play screen. Four fixed regions (Aegis figure,
// gamemaster guidance, Aegis reaction, player input) plus a single
// overlay slot for clue, decision, or ending choice.

import {
  ApiError,
  chooseEnding,
  createSession,
  getView,
  submitDecision,
  submitTurn,
} from "./api.js";
import type { SessionView } from "./api.js";
import {
  afterFailure,
  afterTurn,
  dismissClue,
  initialView,
  inputEnabled,
  withBusy,
} from "./view.js";
import type { UiViewState } from "./view.js";

export class GameApp {
  private guidancePanel: HTMLElement;
  private reactionPanel: HTMLElement;
  private input: HTMLInputElement;
  private sendButton: HTMLButtonElement;
  private statusLine: HTMLElement;
  private overlayRoot: HTMLElement;
  private sessionId = "";
  private lastSession: SessionView | null = null;
  private state: UiViewState = initialView();

  constructor(private root: Document) {
    this.guidancePanel = byId(root, "guidance-panel");
    this.reactionPanel = byId(root, "reaction-panel");
    this.input = byId(root, "player-input") as HTMLInputElement;
    this.sendButton = byId(root, "send-button") as HTMLButtonElement;
    this.statusLine = byId(root, "status-line");
    this.overlayRoot = byId(root, "overlay-root");

    byId(root, "turn-form").addEventListener("submit", (e) => {
      e.preventDefault();
      void this.submitCurrent();
    });
    this.overlayRoot.addEventListener("click", (e) => {
      const target = e.target as HTMLElement;
      if (target.id === "overlay-close") {
        this.closeClueOverlay();
        return;
      }
      const decision = target.getAttribute("data-decision");
      if (decision !== null) {
        void this.pickDecision(decision);
        return;
      }
      const ending = target.getAttribute("data-ending");
      if (ending !== null) {
        void this.pickEnding(ending);
      }
    });
  }

  async start(): Promise<void> {
    try {
      this.sessionId = await createSession();
    } catch (err) {
      this.state = afterFailure(this.state, describe(err));
      this.render();
      return;
    }
    this.state = initialView();
    this.render();
  }

  async submitCurrent(): Promise<void> {
    const text = this.input.value.trim();
    if (text === "" || !inputEnabled(this.state)) return;
    this.state = withBusy(this.state);
    this.render();
    try {
      const reply = await submitTurn(this.sessionId, text);
      const session = await getView(this.sessionId);
      this.lastSession = session;
      this.state = afterTurn(this.state, reply, session);
      this.input.value = "";
    } catch (err) {
      // typed text survives a failed turn so the player can retry
      this.state = afterFailure(this.state, describe(err));
    }
    this.render();
  }

  async pickDecision(optionId: string): Promise<void> {
    const pending = this.lastSession?.pending_decision;
    if (!pending || this.state.busy) return;
    this.state = withBusy(this.state);
    this.render();
    try {
      const reply = await submitDecision(this.sessionId, pending.scene_id, optionId);
      const session = await getView(this.sessionId);
      this.lastSession = session;
      this.state = afterTurn(this.state, reply, session);
    } catch (err) {
      this.state = afterFailure(this.state, describe(err));
    }
    this.render();
  }

  async pickEnding(optionId: string): Promise<void> {
    if (this.state.busy) return;
    this.state = withBusy(this.state);
    this.render();
    try {
      const reply = await chooseEnding(this.sessionId, optionId);
      const session = await getView(this.sessionId);
      this.lastSession = session;
      this.state = afterTurn(this.state, reply, session);
    } catch (err) {
      this.state = afterFailure(this.state, describe(err));
    }
    this.render();
  }

  closeClueOverlay(): void {
    this.state = dismissClue(this.state, this.lastSession);
    this.render();
  }

  get view(): UiViewState {
    return this.state;
  }

  render(): void {
    this.guidancePanel.textContent = this.state.guidanceText;
    this.reactionPanel.textContent = this.state.reactionText;
    const enabled = inputEnabled(this.state);
    this.input.disabled = !enabled;
    this.sendButton.disabled = !enabled;
    if (this.state.error !== null) {
      this.statusLine.textContent = `${this.state.error} (your message was kept; try again)`;
      this.statusLine.classList.add("error");
    } else {
      this.statusLine.textContent = this.state.busy ? "Aegis is responding..." : "";
      this.statusLine.classList.remove("error");
    }
    this.renderOverlay();
  }

  private renderOverlay(): void {
    const overlay = this.state.overlay;
    if (overlay === null) {
      this.overlayRoot.innerHTML = "";
      return;
    }
    if (overlay.kind === "clue") {
      const clue = overlay.clue;
      this.overlayRoot.innerHTML = `
        <div class="overlay" data-overlay="clue">
          <div class="overlay-card">
            <img class="clue-image" src="/assets/${esc(clue.image_ref)}" alt="">
            <h2>${esc(clue.title)}</h2>
            <p>${esc(clue.content)}</p>
            <button id="overlay-close" type="button">Take the clue</button>
          </div>
        </div>`;
      return;
    }
    if (overlay.kind === "decision") {
      const buttons = overlay.decision.options
        .map(
          (o) =>
            `<button type="button" data-decision="${esc(o.option_id)}">${esc(o.label)}</button>`,
        )
        .join("");
      this.overlayRoot.innerHTML = `
        <div class="overlay" data-overlay="decision">
          <div class="overlay-card">
            <p>${esc(overlay.decision.prompt_text)}</p>
            ${buttons}
          </div>
        </div>`;
      return;
    }
    const buttons = overlay.options
      .map(
        (o) =>
          `<button type="button" data-ending="${esc(o.option_id)}">${esc(o.label)}</button>`,
      )
      .join("");
    this.overlayRoot.innerHTML = `
      <div class="overlay" data-overlay="ending">
        <div class="overlay-card">
          <p>What will you do with what you found?</p>
          ${buttons}
        </div>
      </div>`;
  }
}

function byId(root: Document, id: string): HTMLElement {
  const el = root.getElementById(id);
  if (el === null) throw new Error(`missing #${id} in the page`);
  return el;
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return err.message;
  if (err instanceof Error) return err.message;
  return String(err);
}

function esc(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
