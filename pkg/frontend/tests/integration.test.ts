/** End-to-end check against the real judgment service.
 *
 * Builds the bundled 5-document dataset with the command-line tools, judges
 * it once through the terminal prompt and once through this UI driven by
 * synthetic keystrokes, and requires both paths to leave byte-equivalent
 * judgment logs (timestamps aside). Also exercises mid-session reload.
 */

import { ChildProcess, spawn, spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import * as path from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { createApp } from "../src/app.js";
import { SessionMachine } from "../src/session.js";

const HERE = path.dirname(new URL(import.meta.url).pathname);
const FIXTURE = path.resolve(HERE, "..", "..", "tests", "fixtures", "lecture5");
const BASE = "http://127.0.0.1:8731";

let tmp: string;
let server: ChildProcess | null = null;
let script: string[] = [];

function run(args: string[], input?: string): void {
  const result = spawnSync("paramine", args, { input, encoding: "utf-8" });
  if (result.status !== 0) {
    throw new Error(
      `paramine ${args[0]} failed (${result.status}):\n${result.stdout}\n${result.stderr}`,
    );
  }
}

async function serverUp(timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const res = await fetch(`${BASE}/api/state`);
      if (res.ok) {
        return;
      }
    } catch {
      // not listening yet
    }
    await new Promise((resolve) => setTimeout(resolve, 150));
  }
  throw new Error("judgment service did not come up");
}

interface LogRecord {
  pair_id: string;
  src_index: number;
  tgt_index: number;
  verdict: string;
  annotator: string;
}

function readLog(file: string): LogRecord[] {
  return readFileSync(file, "utf-8")
    .split("\n")
    .filter((line) => line.trim() !== "")
    .map((line) => {
      const { timestamp: _dropped, ...rest } = JSON.parse(line);
      return rest as LogRecord;
    });
}

beforeAll(async () => {
  expect(typeof fetch, "node 18+ global fetch required").toBe("function");
  tmp = mkdtempSync(path.join(tmpdir(), "annotation-ui-"));
  const cleaned = path.join(tmp, "cleaned");
  const aligned = path.join(tmp, "aligned");

  run(["clean", "--manifest", path.join(FIXTURE, "manifest.tsv"),
       "--out", cleaned, "--meta-patterns", path.join(FIXTURE, "meta-patterns.txt"),
       "--lang-a", "en", "--lang-b", "en"]);
  run(["align", "--manifest", path.join(cleaned, "manifest.tsv"),
       "--measure", "mt-bleu", "--provider", "identity",
       "--th", "0.92", "--k", "2.0", "--out", aligned]);

  const scriptText = readFileSync(path.join(FIXTURE, "judgment-script.txt"), "utf-8");
  script = scriptText.split("\n").map((l) => l.trim()).filter((l) => l !== "");

  // reference log: the same verdicts through the terminal prompt
  run(["split", "--alignments", aligned, "--volume-test", "12",
       "--volume-dev", "10", "--ratio", "0.5",
       "--log", path.join(tmp, "cli.jsonl"), "--out", path.join(tmp, "cli-splits"),
       "--interactive", "--annotator", "checker"],
      scriptText);

  server = spawn("paramine", ["serve", "--alignments", aligned,
                              "--volume-test", "12", "--volume-dev", "10",
                              "--ratio", "0.5", "--log", path.join(tmp, "ui.jsonl"),
                              "--addr", "127.0.0.1:8731"],
                 { stdio: "ignore" });
  await serverUp(30_000);
});

afterAll(async () => {
  if (server) {
    const gone = new Promise((resolve) => server?.once("exit", resolve));
    server.kill("SIGTERM");
    await Promise.race([gone, new Promise((resolve) => setTimeout(resolve, 5_000))]);
  }
});

function mountApp(): SessionMachine {
  document.body.innerHTML = '<div id="app"></div>';
  const machine = new SessionMachine(new ApiClient(BASE));
  createApp(document.getElementById("app") as HTMLElement, machine);
  const input = document.getElementById("annotator") as HTMLInputElement;
  input.value = "checker";
  input.dispatchEvent(new Event("input", { bubbles: true }));
  return machine;
}

async function press(machine: SessionMachine, verdict: string): Promise<void> {
  const keyName = verdict === "g" || verdict === "good" ? "g" : "b";
  document.dispatchEvent(new KeyboardEvent("keydown", { key: keyName, bubbles: true }));
  await machine.idle();
}

describe("against the live service", () => {
  it("keystroke session matches the terminal log and survives a reload", async () => {
    expect(script).toHaveLength(30);

    const machine = mountApp();
    await machine.refresh();
    expect(machine.state.phase).toBe("judging");
    expect(machine.state.pair).toMatchObject({ pair_id: "lec01", src_index: 0 });

    for (const verdict of script.slice(0, 10)) {
      expect(machine.state.error).toBeNull();
      await press(machine, verdict);
    }

    // a reload mid-session lands exactly on the server's next unjudged pair
    const raw = await (await fetch(`${BASE}/api/next`)).json();
    const reloaded = new SessionMachine(new ApiClient(BASE));
    await reloaded.refresh();
    expect(reloaded.state.phase).toBe("judging");
    expect(reloaded.state.pair).toMatchObject({
      pair_id: raw.pair_id,
      src_index: raw.src_index,
      tgt_index: raw.tgt_index,
    });
    expect(reloaded.state.pair).toMatchObject({
      pair_id: machine.state.pair?.pair_id,
      src_index: machine.state.pair?.src_index,
    });

    for (const verdict of script.slice(10)) {
      expect(machine.state.error).toBeNull();
      await press(machine, verdict);
    }

    expect(machine.state.phase).toBe("done");
    expect(machine.state.manifest?.counts).toEqual({
      test: { documents: 1, kept_pairs: 12, deleted_pairs: 2 },
      dev: { documents: 2, kept_pairs: 12, deleted_pairs: 4 },
      train: { documents: 2, kept_pairs: 12, deleted_pairs: 0 },
    });
    expect(document.querySelectorAll("#summary-body tr")).toHaveLength(3);
    expect(document.getElementById("judged-total")?.textContent)
      .toContain("30 candidate pairs judged");

    // zero loss: all 30 acknowledged verdicts are in the server's log,
    // and the log is indistinguishable from the terminal session's
    const uiLog = readLog(path.join(tmp, "ui.jsonl"));
    const cliLog = readLog(path.join(tmp, "cli.jsonl"));
    expect(uiLog).toHaveLength(30);
    expect(uiLog).toEqual(cliLog);
  });

  it("the service reports completion state after the session", async () => {
    const state = await (await fetch(`${BASE}/api/state`)).json();
    expect(state.phase).toBe("done");
    expect(state.judged).toBe(30);
    expect(state.accepted_pairs).toBe(24);
    expect(state.volume).toBe(22);
  });
});
