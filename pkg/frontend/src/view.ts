// Pure view-state transitions. The DOM layer renders whatever this
// produces; nothing here touches the network or the document.

import type { ChoiceOption, ClueView, PendingDecision, SessionView, TurnReply } from "./api.js";

export type Overlay =
  | { kind: "clue"; clue: ClueView }
  | { kind: "decision"; decision: PendingDecision }
  | { kind: "ending"; options: ChoiceOption[] }
  | null;

export type UiViewState = {
  phase: string;
  guidanceText: string;
  reactionText: string;
  overlay: Overlay;
  busy: boolean;
  error: string | null;
  seenClues: number[];
};

export const BOOT_GUIDANCE =
  'You stand before the terminal of Aegis. Say "hi" to approach it.';

export function initialView(): UiViewState {
  return {
    phase: "Intro",
    guidanceText: BOOT_GUIDANCE,
    reactionText: "",
    overlay: null,
    busy: false,
    error: null,
    seenClues: [],
  };
}

export function inputEnabled(view: UiViewState): boolean {
  return !view.busy && view.phase !== "Done";
}

// Only one overlay may be visible: a fresh clue outranks a pending
// decision, which outranks the ending choice.
export function pickOverlay(
  clue: ClueView | null,
  decision: PendingDecision | null,
  endings: ChoiceOption[] | null,
): Overlay {
  if (clue !== null) return { kind: "clue", clue };
  if (decision !== null) return { kind: "decision", decision };
  if (endings !== null && endings.length > 0) return { kind: "ending", options: endings };
  return null;
}

export function overlayFromSession(view: SessionView, seen: number[]): Overlay {
  void seen; // clue overlays only ever come from turn replies
  return pickOverlay(null, view.pending_decision, view.endings);
}

export function afterTurn(
  prev: UiViewState,
  reply: TurnReply,
  session: SessionView,
): UiViewState {
  const freshClue =
    reply.clue !== null && !prev.seenClues.includes(reply.clue.clue_id)
      ? reply.clue
      : null;
  const seenClues = freshClue !== null ? [...prev.seenClues, freshClue.clue_id] : prev.seenClues;
  return {
    phase: reply.phase,
    guidanceText: reply.gamemaster_guidance || prev.guidanceText,
    reactionText: reply.aegis_reaction,
    overlay: pickOverlay(freshClue, session.pending_decision, session.endings),
    busy: false,
    error: null,
    seenClues,
  };
}

export function afterFailure(prev: UiViewState, message: string): UiViewState {
  return { ...prev, busy: false, error: message };
}

export function withBusy(prev: UiViewState): UiViewState {
  return { ...prev, busy: true, error: null };
}

export function dismissClue(prev: UiViewState, session: SessionView | null): UiViewState {
  if (prev.overlay === null || prev.overlay.kind !== "clue") return prev;
  const overlay = session === null ? null : overlayFromSession(session, prev.seenClues);
  return { ...prev, overlay };
}
