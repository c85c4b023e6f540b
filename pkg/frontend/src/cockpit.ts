// DOM cockpit: the human plays the environment of a running step.
//
// Pending queries appear as they are issued; replies are staged into a round
// (simultaneity is the point: everything staged goes out in one submit) and
// the timeline, verdicts, updates, and state views mirror server messages.

import { WsSessionClient } from "./client.js";
import { canonicalJson, queryKey } from "./protocol.js";
import { SessionStore } from "./session.js";

const DEFAULT_PROGRAM = `static client0/0
static client1/0
dynamic sold/0 relational
dynamic buyer/0
dynamic cancelled/0 relational
label q0, q1, t
external q0/0 = [q0]
external q1/0 = [q1]
external t/0 = [t]
rule
if knot (q0() preceq t()) kand knot (q1() preceq t()) then
  cancelled() := true
else
  if q0() preceq q1() then
    par { sold() := true; buyer() := client0 }
  else
    par { sold() := true; buyer() := client1 }
  endif
endif
`;

const DEFAULT_STATE = {
  elements: ["c0", "c1", "yes"],
  functions: {
    "client0/0": { default: "c0", table: [] },
    "client1/0": { default: "c1", table: [] },
  },
  dynamic: ["buyer/0", "cancelled/0", "sold/0"],
  relational: ["cancelled/0", "sold/0"],
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = []
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  for (const child of children) node.append(child);
  return node;
}

export function mountCockpit(root: HTMLElement, wsUrl: string): void {
  const store = new SessionStore();
  const client = new WsSessionClient(wsUrl, store);

  const programBox = el("textarea", { rows: "14", cols: "72" });
  programBox.value = DEFAULT_PROGRAM;
  const stateBox = el("textarea", { rows: "6", cols: "72" });
  stateBox.value = JSON.stringify(DEFAULT_STATE, null, 1);

  const statusLine = el("div", { class: "status" });
  const pendingList = el("div", { class: "pending" });
  const stagedList = el("div", { class: "staged" });
  const timelineBox = el("div", { class: "timeline" });
  const verdictBox = el("div", { class: "verdict" });
  const stateBoxView = el("pre", { class: "state" });
  const errorBox = el("div", { class: "errors" });

  const loadBtn = el("button", {}, ["load program"]) as HTMLButtonElement;
  loadBtn.onclick = async () => {
    try {
      await client.connect();
      client.load(programBox.value, JSON.parse(stateBox.value));
    } catch (err) {
      errorBox.textContent = String(err);
    }
  };

  const submitBtn = el("button", {}, ["submit round"]) as HTMLButtonElement;
  submitBtn.onclick = () => {
    const round = store.stagedRound();
    if (round.length === 0) return;
    client.submitRound(round);
  };

  const resetBtn = el("button", {}, ["reset"]) as HTMLButtonElement;
  resetBtn.onclick = () => client.reset();

  const autoBtn = el("button", {}, ["auto step (seed 0)"]) as HTMLButtonElement;
  autoBtn.onclick = () => client.autoStep(0);

  const exportBtn = el("button", {}, ["export history"]) as HTMLButtonElement;
  exportBtn.onclick = () => {
    const blob = new Blob([store.exportHistoryJson()], { type: "application/json" });
    const link = el("a", {
      href: URL.createObjectURL(blob),
      download: `history-step${store.historyStepIndex}.json`,
    });
    link.click();
  };

  function renderPending(): void {
    pendingList.replaceChildren(el("h3", {}, ["pending queries"]));
    for (const query of store.pending) {
      const replyInput = el("input", { size: "8", value: "yes" }) as HTMLInputElement;
      const stageBtn = el("button", {}, ["stage"]) as HTMLButtonElement;
      stageBtn.onclick = () => store.stageReply(query, replyInput.value);
      const quickBtn = el("button", {}, ["answer now"]) as HTMLButtonElement;
      quickBtn.onclick = () => {
        // singleton round: answers immediately, alone in its own round
        client.submitRound([{ query, reply: `e:${replyInput.value}` }]);
      };
      pendingList.append(
        el("div", { class: "query" }, [queryKey(query), " ↦ ", replyInput, stageBtn, quickBtn])
      );
    }
  }

  function renderStaged(): void {
    const round = store.stagedRound();
    stagedList.replaceChildren(
      el("h3", {}, [`staged round (${round.length} replies, submitted together)`])
    );
    for (const draft of round) {
      const dropBtn = el("button", {}, ["remove"]) as HTMLButtonElement;
      dropBtn.onclick = () => store.unstage(draft.query);
      stagedList.append(
        el("div", {}, [queryKey(draft.query), " ↦ ", draft.reply, dropBtn])
      );
    }
  }

  function renderTimeline(): void {
    timelineBox.replaceChildren(
      el("h3", {}, [`history of step ${store.historyStepIndex} (rounds left to right)`])
    );
    const row = el("div", { class: "rounds" });
    store.timeline().forEach((round, i) => {
      const col = el("div", { class: "round" }, [el("strong", {}, [`round ${i + 1}`])]);
      for (const entry of round) {
        col.append(el("div", {}, [`${entry.query.join(" ")} ↦ ${entry.reply}`]));
      }
      row.append(col);
    });
    timelineBox.append(row);
  }

  function renderVerdict(): void {
    const verdict = store.verdict();
    if (verdict === null) {
      verdictBox.textContent = "step in progress";
      return;
    }
    const updates = store
      .updates()
      .map(([f, args, v]) => `${f}(${args.join(", ")}) := ${v}`)
      .join("; ");
    verdictBox.textContent = `step ended: ${verdict}${updates ? ` with ${updates}` : ""}`;
  }

  store.onChange(() => {
    statusLine.textContent = `step ${store.stepIndex}`;
    renderPending();
    renderStaged();
    renderTimeline();
    renderVerdict();
    stateBoxView.textContent = canonicalJson(store.state);
    errorBox.textContent = store.errors.join("\n");
  });

  root.replaceChildren(
    el("h2", {}, ["machine cockpit"]),
    programBox,
    el("br"),
    stateBox,
    el("div", {}, [loadBtn, resetBtn, autoBtn, exportBtn]),
    statusLine,
    pendingList,
    stagedList,
    el("div", {}, [submitBtn]),
    timelineBox,
    verdictBox,
    el("h3", {}, ["state"]),
    stateBoxView,
    errorBox
  );
}
