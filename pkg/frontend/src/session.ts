/** Session state machine, framework-free so it can be tested headless.
 *
 * The server owns the truth. Every pair and counter shown comes from the
 * last response; the machine only remembers which pairs of the current
 * document were judged, so "undo" can re-present one. Judging a
 * re-presented pair appends a superseding verdict server-side.
 */

import {
  ApiError,
  JudgmentApi,
  ManifestView,
  NextView,
  PairView,
  StateView,
  Verdict,
} from "./api.js";

export type Phase = "loading" | "judging" | "done";

export interface SessionState {
  phase: Phase;
  pair: PairView | null;
  server: StateView | null;
  manifest: ManifestView | null;
  busy: boolean;
  /** banner text; a retry of the failed action is available while set */
  error: string | null;
  /** transient message (supersede warning, empty undo stack) */
  notice: string | null;
}

type Listener = (s: SessionState) => void;

export class SessionMachine {
  annotator = "anonymous";

  private st: SessionState = {
    phase: "loading",
    pair: null,
    server: null,
    manifest: null,
    busy: false,
    error: null,
    notice: null,
  };
  private listeners: Listener[] = [];
  private undoStack: PairView[] = [];
  private docId: string | null = null;
  private retryAction: (() => Promise<void>) | null = null;
  private inflight: Promise<void> = Promise.resolve();

  constructor(private readonly client: JudgmentApi) {}

  get state(): SessionState {
    return this.st;
  }

  onChange(fn: Listener): void {
    this.listeners.push(fn);
  }

  /** Resolves when the machine has no request in flight (tests await this). */
  idle(): Promise<void> {
    return this.inflight;
  }

  refresh(): Promise<void> {
    return this.track(this.doRefresh());
  }

  judge(verdict: Verdict): Promise<void> {
    if (this.st.busy || this.st.phase !== "judging" || !this.st.pair) {
      return this.inflight;
    }
    return this.track(this.doJudge(this.st.pair, verdict));
  }

  /** Re-present the last judged pair of the current document. */
  undo(): void {
    if (this.st.busy || this.st.phase !== "judging") {
      return;
    }
    const prev = this.undoStack.pop();
    if (!prev) {
      this.patch({ notice: "nothing to undo in this document" });
      return;
    }
    this.patch({
      pair: prev,
      notice: `re-judging pair ${prev.src_index + 1} of ${prev.pair_id}`,
    });
  }

  /** Re-run the action behind the banner; plain refresh if there is none. */
  retry(): Promise<void> {
    const action = this.retryAction;
    this.retryAction = null;
    return this.track(action ? action() : this.doRefresh());
  }

  private patch(p: Partial<SessionState>): void {
    this.st = { ...this.st, ...p };
    for (const fn of this.listeners) {
      fn(this.st);
    }
  }

  private track(work: Promise<void>): Promise<void> {
    this.inflight = work.then(
      () => undefined,
      () => undefined,
    );
    return work;
  }

  private async doRefresh(): Promise<void> {
    try {
      const [server, next] = await Promise.all([
        this.client.state(),
        this.client.next(),
      ]);
      await this.show(server, next);
      this.retryAction = null;
    } catch (err) {
      this.fail(err, () => this.doRefresh());
    }
  }

  private async doJudge(pair: PairView, verdict: Verdict): Promise<void> {
    this.patch({ busy: true, error: null, notice: null });
    let ack;
    try {
      ack = await this.client.judge(pair, verdict, this.annotator);
    } catch (err) {
      // nothing was acknowledged: keep the pair on screen, offer a retry
      this.fail(err, () => this.doJudge(pair, verdict));
      return;
    }
    this.undoStack.push(pair);
    if (ack.warning) {
      this.patch({ notice: ack.warning });
    }
    try {
      const server = await this.client.state();
      await this.show(server, ack.next);
      this.retryAction = null;
    } catch (err) {
      // the verdict is durable server-side; recovery is a plain refresh
      this.fail(err, () => this.doRefresh());
    }
  }

  private async show(server: StateView, next: NextView): Promise<void> {
    if (next.done) {
      const manifest = await this.client.manifest();
      this.undoStack = [];
      this.docId = null;
      this.patch({
        phase: "done",
        pair: null,
        server,
        manifest,
        busy: false,
        error: null,
      });
      return;
    }
    if (next.pair_id !== this.docId) {
      this.undoStack = [];
      this.docId = next.pair_id;
    }
    this.patch({ phase: "judging", pair: next, server, busy: false, error: null });
  }

  private fail(err: unknown, retry: () => Promise<void>): void {
    const message = err instanceof ApiError ? err.message : String(err);
    this.retryAction = retry;
    this.patch({ busy: false, error: message });
  }
}
