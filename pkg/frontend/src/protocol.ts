// Wire types for the session protocol and a canonical JSON encoder that
// matches the server byte for byte (sorted keys, no whitespace).

export type QueryToken = string; // "l:<label>" | "e:<element>"
export type Query = QueryToken[];

export interface ReplyDraft {
  query: Query;
  reply: string; // "e:<element>"
}

export interface HistoryJson {
  rounds: { query: Query; reply: string }[][];
}

export interface HelloMsg {
  type: "hello";
  program: string;
  state: unknown;
}

export interface PendingMsg {
  type: "pending";
  queries: Query[];
  stepIndex: number;
}

export interface RoundAcceptedMsg {
  type: "roundAccepted";
  history: HistoryJson;
}

export interface StepDoneMsg {
  type: "stepDone";
  verdict: "success" | "fail";
  updates: [string, string[], string][];
  nextState: unknown | null;
}

export interface ErrorMsg {
  type: "error";
  code: string;
  msg: string;
}

export type ServerMessage =
  | HelloMsg
  | PendingMsg
  | RoundAcceptedMsg
  | StepDoneMsg
  | ErrorMsg;

export interface LoadProgramMsg {
  type: "loadProgram";
  asmText: string;
  stateJson?: unknown;
  replyUniverse?: Record<string, string[]>;
}

export interface SubmitRoundMsg {
  type: "submitRound";
  replies: ReplyDraft[];
}

export interface ResetMsg {
  type: "reset";
}

export interface AutoStepMsg {
  type: "autoStep";
  seed: number;
}

export type ClientMessage = LoadProgramMsg | SubmitRoundMsg | ResetMsg | AutoStepMsg;

export function queryKey(q: Query): string {
  return q.join(" ");
}

/** JSON with recursively sorted object keys and compact separators; the exact
 *  encoding the server uses, so exported histories compare byte for byte. */
export function canonicalJson(value: unknown): string {
  if (value === null || typeof value !== "object") {
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return "[" + value.map(canonicalJson).join(",") + "]";
  }
  const record = value as Record<string, unknown>;
  const body = Object.keys(record)
    .sort()
    .map((k) => JSON.stringify(k) + ":" + canonicalJson(record[k]))
    .join(",");
  return "{" + body + "}";
}
