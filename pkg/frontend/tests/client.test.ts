// Transport tests against stubbed fetch / WebSocket: every server message is
// forwarded to the store unmodified and in order.

import { afterEach, describe, expect, it, vi } from "vitest";

import { HttpSessionClient, WsSessionClient } from "../src/client.js";
import { ServerMessage } from "../src/protocol.js";
import { SessionStore } from "../src/session.js";

const HELLO: ServerMessage = { type: "hello", program: "rule fail", state: {} };
const PENDING: ServerMessage = { type: "pending", queries: [["l:q0"]], stepIndex: 0 };

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("HttpSessionClient", () => {
  it("creates a session and applies returned messages", async () => {
    const calls: { url: string; body: any }[] = [];
    vi.stubGlobal("fetch", async (url: string, init: any) => {
      calls.push({ url, body: JSON.parse(init.body) });
      return {
        json: async () => ({ sessionId: "s1", messages: [HELLO, PENDING] }),
      };
    });
    const store = new SessionStore();
    const client = new HttpSessionClient("http://server", store);
    await client.load("rule fail", {});
    expect(calls[0].url).toBe("http://server/session");
    expect(store.pending).toEqual([["l:q0"]]);
  });

  it("posts rounds to the session endpoint", async () => {
    const calls: { url: string; body: any }[] = [];
    vi.stubGlobal("fetch", async (url: string, init: any) => {
      calls.push({ url, body: JSON.parse(init.body) });
      if (url.endsWith("/session")) {
        return { json: async () => ({ sessionId: "s9", messages: [HELLO, PENDING] }) };
      }
      return { json: async () => ({ messages: [] }) };
    });
    const store = new SessionStore();
    const client = new HttpSessionClient("http://server", store);
    await client.load("rule fail", {});
    await client.submitRound([{ query: ["l:q0"], reply: "e:yes" }]);
    expect(calls[1].url).toBe("http://server/session/s9/round");
    expect(calls[1].body.replies).toEqual([{ query: ["l:q0"], reply: "e:yes" }]);
  });

  it("refuses to act before a session exists", async () => {
    const store = new SessionStore();
    const client = new HttpSessionClient("http://server", store);
    await expect(client.reset()).rejects.toThrow(/no session/);
  });
});

class FakeWebSocket {
  static OPEN = 1;
  static instances: FakeWebSocket[] = [];
  readyState = FakeWebSocket.OPEN;
  sent: string[] = [];
  onopen: (() => void) | null = null;
  onmessage: ((event: { data: string }) => void) | null = null;
  onerror: (() => void) | null = null;
  onclose: (() => void) | null = null;

  constructor(public url: string) {
    FakeWebSocket.instances.push(this);
    queueMicrotask(() => this.onopen?.());
  }

  send(data: string): void {
    this.sent.push(data);
  }

  receive(msg: ServerMessage): void {
    this.onmessage?.({ data: JSON.stringify(msg) });
  }
}

describe("WsSessionClient", () => {
  it("sends protocol messages and mirrors replies", async () => {
    vi.stubGlobal("WebSocket", FakeWebSocket);
    const store = new SessionStore();
    const client = new WsSessionClient("ws://server/ws", store);
    await client.connect();
    const socket = FakeWebSocket.instances.at(-1)!;

    client.load("rule fail", { elements: [] });
    expect(JSON.parse(socket.sent[0]).type).toBe("loadProgram");

    socket.receive(HELLO);
    socket.receive(PENDING);
    expect(store.programText).toBe("rule fail");
    expect(store.pending).toEqual([["l:q0"]]);

    client.submitRound([{ query: ["l:q0"], reply: "e:yes" }]);
    expect(JSON.parse(socket.sent[1]).replies.length).toBe(1);
  });

  it("throws when sending while disconnected", () => {
    vi.stubGlobal("WebSocket", FakeWebSocket);
    const store = new SessionStore();
    const client = new WsSessionClient("ws://server/ws", store);
    expect(() => client.reset()).toThrow(/not connected/);
  });
});
