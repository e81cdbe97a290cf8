/** Typed client for the judgment service. The shapes here mirror the wire
 * format one to one; nothing is derived or cached on this side. */

export type Verdict = "good" | "bad";

export interface StateView {
  phase: string;
  judged: number;
  accepted_pairs: number;
  volume: number;
  ratio: number;
}

export interface DocProgress {
  pair_id: string;
  judged: number;
  total: number;
}

export interface PairView {
  pair_id: string;
  src_index: number;
  tgt_index: number;
  src_text: string;
  tgt_text: string;
  score: number;
  doc_progress: DocProgress;
}

export type NextView = { done: true } | ({ done: false } & PairView);

export interface JudgmentAck {
  ok: boolean;
  warning?: string;
  next: NextView;
}

export interface SplitCounts {
  documents: number;
  kept_pairs: number;
  deleted_pairs: number;
}

export interface ManifestView {
  assignments: Record<string, string>;
  counts: Record<string, SplitCounts>;
  judged_candidates: number;
  document_outcomes: unknown[];
  warnings: string[];
  config: Record<string, number>;
}

export interface PairRef {
  pair_id: string;
  src_index: number;
  tgt_index: number;
}

/** status 0 means the request never reached the server. */
export class ApiError extends Error {
  constructor(public readonly status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** What the session machine needs; ApiClient is the real implementation. */
export interface JudgmentApi {
  state(): Promise<StateView>;
  next(): Promise<NextView>;
  manifest(): Promise<ManifestView>;
  judge(pair: PairRef, verdict: Verdict, annotator: string): Promise<JudgmentAck>;
}

export class ApiClient implements JudgmentApi {
  constructor(
    private readonly base = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let res: Response;
    try {
      res = await this.fetchImpl(this.base + path, init);
    } catch (err) {
      throw new ApiError(0, `server unreachable: ${String(err)}`);
    }
    const text = await res.text();
    let body: unknown = null;
    if (text) {
      try {
        body = JSON.parse(text);
      } catch {
        // proxy error pages and the like; fall through to the status check
      }
    }
    if (!res.ok) {
      const message =
        body !== null && typeof body === "object" && "error" in body
          ? String((body as { error: unknown }).error)
          : `HTTP ${res.status}`;
      throw new ApiError(res.status, message);
    }
    return body as T;
  }

  state(): Promise<StateView> {
    return this.request<StateView>("/api/state");
  }

  next(): Promise<NextView> {
    return this.request<NextView>("/api/next");
  }

  manifest(): Promise<ManifestView> {
    return this.request<ManifestView>("/api/manifest");
  }

  judge(pair: PairRef, verdict: Verdict, annotator: string): Promise<JudgmentAck> {
    return this.request<JudgmentAck>("/api/judgment", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        pair_id: pair.pair_id,
        src_index: pair.src_index,
        tgt_index: pair.tgt_index,
        verdict,
        annotator,
      }),
    });
  }
}
