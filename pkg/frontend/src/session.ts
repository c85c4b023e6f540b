// Client-side mirror of one server session.
//
// The store never computes semantics of its own: pending queries, histories,
// verdicts, updates, and states are only ever copied out of server messages.
// Its own contribution is the staged round: reply drafts grouped so that one
// submit lands them in a single simultaneity round.

import {
  HistoryJson,
  Query,
  ReplyDraft,
  ServerMessage,
  StepDoneMsg,
  canonicalJson,
  queryKey,
} from "./protocol.js";

export class SessionStore {
  programText = "";
  state: unknown = null;
  stepIndex = 0;
  pending: Query[] = [];
  history: HistoryJson = { rounds: [] };
  historyStepIndex = 0;
  lastStep: StepDoneMsg | null = null;
  errors: string[] = [];
  private staged = new Map<string, ReplyDraft>();
  private listeners: (() => void)[] = [];

  onChange(fn: () => void): void {
    this.listeners.push(fn);
  }

  private notify(): void {
    for (const fn of this.listeners) fn();
  }

  /** Mirror one server message into the view. */
  apply(msg: ServerMessage): void {
    switch (msg.type) {
      case "hello":
        this.programText = msg.program;
        this.state = msg.state;
        this.stepIndex = 0;
        this.history = { rounds: [] };
        this.historyStepIndex = 0;
        this.pending = [];
        this.lastStep = null;
        this.staged.clear();
        this.errors = [];
        break;
      case "pending":
        this.pending = msg.queries;
        this.stepIndex = msg.stepIndex;
        this.pruneStaged();
        break;
      case "roundAccepted":
        // The one place the timeline changes: always the server's history,
        // never a local reconstruction.  It sticks around after stepDone
        // until the next step's first round replaces it.
        this.history = msg.history;
        this.historyStepIndex = this.stepIndex;
        this.staged.clear();
        break;
      case "stepDone":
        this.lastStep = msg;
        if (msg.nextState !== null) {
          this.state = msg.nextState;
        }
        break;
      case "error":
        this.errors.push(`${msg.code}: ${msg.msg}`);
        break;
    }
    this.notify();
  }

  applyAll(msgs: ServerMessage[]): void {
    for (const m of msgs) this.apply(m);
  }

  isPending(query: Query): boolean {
    const key = queryKey(query);
    return this.pending.some((q) => queryKey(q) === key);
  }

  /** Draft a reply for a pending query; drafts accumulate into one round. */
  stageReply(query: Query, replyElement: string): void {
    if (!this.isPending(query)) {
      throw new Error(`query is not pending: ${queryKey(query)}`);
    }
    this.staged.set(queryKey(query), { query, reply: `e:${replyElement}` });
    this.notify();
  }

  unstage(query: Query): void {
    this.staged.delete(queryKey(query));
    this.notify();
  }

  stagedRound(): ReplyDraft[] {
    return [...this.staged.values()].sort((a, b) =>
      queryKey(a.query) < queryKey(b.query) ? -1 : 1
    );
  }

  clearStaged(): void {
    this.staged.clear();
    this.notify();
  }

  private pruneStaged(): void {
    for (const key of [...this.staged.keys()]) {
      if (!this.pending.some((q) => queryKey(q) === key)) {
        this.staged.delete(key);
      }
    }
  }

  /** Timeline columns: one entry per round, exactly as the server sent them. */
  timeline(): { query: Query; reply: string }[][] {
    return this.history.rounds;
  }

  /** The mirrored history in the server's own canonical bytes. */
  exportHistoryJson(): string {
    return canonicalJson(this.history);
  }

  verdict(): string | null {
    return this.lastStep ? this.lastStep.verdict : null;
  }

  updates(): [string, string[], string][] {
    return this.lastStep ? this.lastStep.updates : [];
  }
}
