// Typed client for the game service. All game logic lives server-side;
// this module only shapes requests and checks reply payloads at runtime.

export type ClueView = {
  clue_id: number;
  title: string;
  content: string;
  image_ref: string;
};

export type TurnReply = {
  gamemaster_guidance: string;
  aegis_reaction: string;
  clue: ClueView | null;
  scene_advanced: number | null;
  clamped: boolean;
  phase: string;
  seq: number;
};

export type ChoiceOption = { option_id: string; label: string };

export type PendingDecision = {
  scene_id: number;
  prompt_text: string;
  options: ChoiceOption[];
};

export type SessionView = {
  session_id: string;
  phase: string;
  scene_id: number | null;
  rounds: number;
  delivered_clues: ClueView[];
  decisions: Record<string, string>;
  pending_decision: PendingDecision | null;
  endings: ChoiceOption[] | null;
  ending_choice: string | null;
  seq: number;
};

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
    this.name = "ApiError";
  }

  get retryable(): boolean {
    // 502 means the model backend hiccupped; 0 means we never reached the service
    return this.status === 502 || this.status === 0;
  }
}

const isObject = (v: unknown): v is Record<string, unknown> =>
  typeof v === "object" && v !== null;

function isClue(v: unknown): v is ClueView {
  return (
    isObject(v) &&
    typeof v.clue_id === "number" &&
    typeof v.title === "string" &&
    typeof v.content === "string"
  );
}

function isOption(v: unknown): v is ChoiceOption {
  return isObject(v) && typeof v.option_id === "string" && typeof v.label === "string";
}

function isTurnReply(v: unknown): v is TurnReply {
  return (
    isObject(v) &&
    typeof v.gamemaster_guidance === "string" &&
    typeof v.aegis_reaction === "string" &&
    (v.clue === null || isClue(v.clue)) &&
    typeof v.clamped === "boolean" &&
    typeof v.phase === "string" &&
    typeof v.seq === "number"
  );
}

function isSessionView(v: unknown): v is SessionView {
  if (!isObject(v)) return false;
  if (typeof v.session_id !== "string" || typeof v.phase !== "string") return false;
  if (!Array.isArray(v.delivered_clues) || !v.delivered_clues.every(isClue)) return false;
  if (v.pending_decision !== null) {
    const pd = v.pending_decision;
    if (!isObject(pd) || typeof pd.prompt_text !== "string") return false;
    if (!Array.isArray(pd.options) || !pd.options.every(isOption)) return false;
  }
  if (v.endings !== null && !(Array.isArray(v.endings) && v.endings.every(isOption))) {
    return false;
  }
  return typeof v.seq === "number";
}

async function request(path: string, init?: RequestInit): Promise<unknown> {
  let res: Response;
  try {
    res = await fetch(path, init);
  } catch {
    throw new ApiError(0, "cannot reach the game service");
  }
  const raw: unknown = await res.json().catch(() => ({}));
  if (!res.ok) {
    const detail =
      isObject(raw) && typeof raw.detail === "string"
        ? raw.detail
        : `HTTP ${res.status}`;
    throw new ApiError(res.status, detail);
  }
  return raw;
}

function post(path: string, body: unknown): Promise<unknown> {
  return request(path, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(body),
  });
}

export async function createSession(): Promise<string> {
  const raw = await post("/sessions", {});
  if (!isObject(raw) || typeof raw.session_id !== "string") {
    throw new Error("unexpected create-session reply");
  }
  return raw.session_id;
}

export async function getView(sessionId: string): Promise<SessionView> {
  const raw = await request(`/sessions/${sessionId}`);
  if (!isSessionView(raw)) throw new Error("unexpected session view");
  return raw;
}

export async function submitTurn(sessionId: string, text: string): Promise<TurnReply> {
  const raw = await post(`/sessions/${sessionId}/turns`, { text });
  if (!isTurnReply(raw)) throw new Error("unexpected turn reply");
  return raw;
}

export async function submitDecision(
  sessionId: string,
  sceneId: number,
  optionId: string,
): Promise<TurnReply> {
  const raw = await post(`/sessions/${sessionId}/decision`, {
    scene_id: sceneId,
    option_id: optionId,
  });
  if (!isTurnReply(raw)) throw new Error("unexpected decision reply");
  return raw;
}

export async function chooseEnding(
  sessionId: string,
  optionId: string,
): Promise<TurnReply> {
  const raw = await post(`/sessions/${sessionId}/ending`, { option_id: optionId });
  if (!isTurnReply(raw)) throw new Error("unexpected ending reply");
  return raw;
}
