// Transports for the session protocol: plain HTTP endpoints for scripting and
// a websocket for the live cockpit.  Both hand every server message to the
// store untouched.

import { ClientMessage, ReplyDraft, ServerMessage } from "./protocol.js";
import { SessionStore } from "./session.js";

export class HttpSessionClient {
  private sessionId: string | null = null;

  constructor(private baseUrl: string, private store: SessionStore) {}

  private async post(path: string, body: unknown): Promise<ServerMessage[]> {
    const res = await fetch(this.baseUrl + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    const data = await res.json();
    return (data.messages ?? []) as ServerMessage[];
  }

  async load(asmText: string, stateJson: unknown): Promise<void> {
    const res = await fetch(this.baseUrl + "/session", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ asmText, stateJson }),
    });
    const data = await res.json();
    this.sessionId = data.sessionId ?? null;
    this.store.applyAll((data.messages ?? []) as ServerMessage[]);
  }

  private require(): string {
    if (this.sessionId === null) throw new Error("no session loaded");
    return this.sessionId;
  }

  async submitRound(replies: ReplyDraft[]): Promise<void> {
    const msgs = await this.post(`/session/${this.require()}/round`, { replies });
    this.store.applyAll(msgs);
  }

  async reset(): Promise<void> {
    const msgs = await this.post(`/session/${this.require()}/reset`, {});
    this.store.applyAll(msgs);
  }

  async autoStep(seed: number): Promise<void> {
    const msgs = await this.post(`/session/${this.require()}/autostep`, { seed });
    this.store.applyAll(msgs);
  }
}

export class WsSessionClient {
  private ws: WebSocket | null = null;

  constructor(private url: string, private store: SessionStore) {}

  connect(): Promise<void> {
    return new Promise((resolve, reject) => {
      const ws = new WebSocket(this.url);
      ws.onopen = () => {
        this.ws = ws;
        resolve();
      };
      ws.onerror = () => reject(new Error(`cannot reach ${this.url}`));
      ws.onmessage = (event) => {
        this.store.apply(JSON.parse(String(event.data)) as ServerMessage);
      };
      ws.onclose = () => {
        this.ws = null;
      };
    });
  }

  send(msg: ClientMessage): void {
    if (this.ws === null || this.ws.readyState !== WebSocket.OPEN) {
      throw new Error("websocket is not connected");
    }
    this.ws.send(JSON.stringify(msg));
  }

  load(asmText: string, stateJson: unknown): void {
    this.send({ type: "loadProgram", asmText, stateJson });
  }

  submitRound(replies: ReplyDraft[]): void {
    this.send({ type: "submitRound", replies });
  }

  reset(): void {
    this.send({ type: "reset" });
  }

  autoStep(seed: number): void {
    this.send({ type: "autoStep", seed });
  }
}
