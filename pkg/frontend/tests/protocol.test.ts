import { describe, expect, it } from "vitest";

import { canonicalJson, queryKey } from "../src/protocol.js";

describe("canonicalJson", () => {
  it("sorts keys recursively and uses compact separators", () => {
    const value = { b: 1, a: { d: [2, { z: null, y: "x" }], c: true } };
    expect(canonicalJson(value)).toBe('{"a":{"c":true,"d":[2,{"y":"x","z":null}]},"b":1}');
  });

  it("matches the server encoding of a history", () => {
    // the exact bytes the session server produces for this history
    const history = {
      rounds: [[{ query: ["l:q0"], reply: "e:yes" }]],
    };
    expect(canonicalJson(history)).toBe(
      '{"rounds":[[{"query":["l:q0"],"reply":"e:yes"}]]}'
    );
  });

  it("keeps arrays in order", () => {
    expect(canonicalJson([3, 1, 2])).toBe("[3,1,2]");
  });
});

describe("queryKey", () => {
  it("joins tokens with single spaces", () => {
    expect(queryKey(["l:q0", "e:sv"])).toBe("l:q0 e:sv");
  });
});
