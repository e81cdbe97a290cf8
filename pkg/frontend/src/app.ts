/** DOM layer: renders SessionState, forwards clicks and keystrokes.
 * All state lives in the machine; this file only paints it. */

import { SessionMachine, SessionState } from "./session.js";

const LAYOUT = `
  <header>
    <h1>pair judgment</h1>
    <label class="annotator-field">annotator
      <input id="annotator" type="text" value="anonymous" autocomplete="off">
    </label>
  </header>
  <div id="banner" class="banner" hidden>
    <span id="banner-text"></span>
    <button id="retry" type="button">retry</button>
  </div>
  <p id="notice" class="notice"></p>
  <section id="loading"><p>connecting to the judgment service…</p></section>
  <section id="judging" hidden>
    <div class="progress-block">
      <div class="progress-label">
        <span id="phase-label"></span>
        <span id="volume-text"></span>
      </div>
      <div class="bar"><div id="volume-fill" class="fill"></div></div>
      <div class="progress-label">
        <span id="doc-label"></span>
        <span id="doc-text"></span>
      </div>
      <div class="bar"><div id="doc-fill" class="fill doc"></div></div>
    </div>
    <div class="pair-card">
      <p class="score">score <span id="score"></span></p>
      <p class="sentence src" id="src-text"></p>
      <p class="sentence tgt" id="tgt-text"></p>
    </div>
    <div class="controls">
      <button id="btn-good" type="button">good <kbd>g</kbd></button>
      <button id="btn-bad" type="button">bad <kbd>b</kbd></button>
      <button id="btn-undo" type="button">undo <kbd>u</kbd></button>
    </div>
  </section>
  <section id="done" hidden>
    <h2>all pairs judged</h2>
    <table class="summary">
      <thead><tr><th>split</th><th>documents</th><th>pairs kept</th><th>deleted</th></tr></thead>
      <tbody id="summary-body"></tbody>
    </table>
    <p id="judged-total"></p>
    <ul id="warnings"></ul>
  </section>
`;

function pct(done: number, total: number): string {
  if (total <= 0) {
    return "0%";
  }
  return `${Math.min(100, (100 * done) / total).toFixed(1)}%`;
}

export function createApp(root: HTMLElement, machine: SessionMachine): () => void {
  root.innerHTML = LAYOUT;
  const el = <T extends HTMLElement>(id: string): T => {
    const found = root.querySelector<T>(`#${id}`);
    if (!found) {
      throw new Error(`layout is missing #${id}`);
    }
    return found;
  };

  const banner = el<HTMLDivElement>("banner");
  const bannerText = el<HTMLSpanElement>("banner-text");
  const notice = el<HTMLParagraphElement>("notice");
  const loading = el<HTMLElement>("loading");
  const judging = el<HTMLElement>("judging");
  const done = el<HTMLElement>("done");
  const annotator = el<HTMLInputElement>("annotator");
  const buttons = {
    good: el<HTMLButtonElement>("btn-good"),
    bad: el<HTMLButtonElement>("btn-bad"),
    undo: el<HTMLButtonElement>("btn-undo"),
  };

  annotator.value = machine.annotator;
  annotator.addEventListener("input", () => {
    machine.annotator = annotator.value.trim() || "anonymous";
  });
  el<HTMLButtonElement>("retry").addEventListener("click", () => {
    void machine.retry();
  });
  buttons.good.addEventListener("click", () => void machine.judge("good"));
  buttons.bad.addEventListener("click", () => void machine.judge("bad"));
  buttons.undo.addEventListener("click", () => machine.undo());

  const onKey = (event: KeyboardEvent): void => {
    const target = event.target as HTMLElement | null;
    if (target && (target.tagName === "INPUT" || target.tagName === "TEXTAREA")) {
      return;
    }
    if (event.key === "g") {
      void machine.judge("good");
    } else if (event.key === "b") {
      void machine.judge("bad");
    } else if (event.key === "u") {
      machine.undo();
    }
  };
  const doc = root.ownerDocument;
  doc.addEventListener("keydown", onKey);

  function render(s: SessionState): void {
    banner.hidden = s.error === null;
    bannerText.textContent = s.error ?? "";
    notice.textContent = s.notice ?? "";
    loading.hidden = s.phase !== "loading";
    judging.hidden = s.phase !== "judging";
    done.hidden = s.phase !== "done";

    if (s.phase === "judging" && s.pair && s.server) {
      el("phase-label").textContent = `${s.server.phase} set`;
      el("volume-text").textContent =
        `${s.server.accepted_pairs} / ${s.server.volume} pairs accepted`;
      el<HTMLDivElement>("volume-fill").style.width =
        pct(s.server.accepted_pairs, s.server.volume);
      const progress = s.pair.doc_progress;
      el("doc-label").textContent = `document ${s.pair.pair_id}`;
      el("doc-text").textContent = `${progress.judged} / ${progress.total} judged`;
      el<HTMLDivElement>("doc-fill").style.width =
        pct(progress.judged, progress.total);
      el("score").textContent = s.pair.score.toFixed(4);
      el("src-text").textContent = s.pair.src_text;
      el("tgt-text").textContent = s.pair.tgt_text;
      for (const b of Object.values(buttons)) {
        b.disabled = s.busy;
      }
    }

    if (s.phase === "done" && s.manifest) {
      const body = el<HTMLTableSectionElement>("summary-body");
      body.textContent = "";
      for (const split of ["test", "dev", "train"]) {
        const counts = s.manifest.counts[split];
        if (!counts) {
          continue;
        }
        const row = doc.createElement("tr");
        for (const cell of [split, counts.documents, counts.kept_pairs,
                            counts.deleted_pairs]) {
          const td = doc.createElement("td");
          td.textContent = String(cell);
          row.appendChild(td);
        }
        body.appendChild(row);
      }
      el("judged-total").textContent =
        `${s.manifest.judged_candidates} candidate pairs judged`;
      const list = el<HTMLUListElement>("warnings");
      list.textContent = "";
      for (const warning of s.manifest.warnings) {
        const item = doc.createElement("li");
        item.textContent = warning;
        list.appendChild(item);
      }
    }
  }

  machine.onChange(render);
  render(machine.state);
  return () => doc.removeEventListener("keydown", onKey);
}
