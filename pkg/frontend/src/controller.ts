/** Session controller: holds the current query, polls while the engine is
 * training, submits annotations with optimistic concurrency on the query
 * id. A 409 means our query went stale — discard pending input and refetch.
 *
 * All state comes from the last GET /query payload; callers re-render from
 * scratch on every onQuery callback. */

import { ApiClient, StaleQueryError } from "./client.js";
import { CorrectionTool, LineTool } from "./tools.js";
import type { AnnotateBody, QueryResponse } from "./types.js";

export type Tool = "line" | "correct";

export interface ControllerOptions {
  pollMs?: number;
  onQuery?: (q: QueryResponse) => void;
  setTimeoutFn?: (fn: () => void, ms: number) => unknown;
}

export class SessionController {
  tool: Tool = "line";
  readonly lineTool = new LineTool();
  readonly correctionTool = new CorrectionTool();
  current: QueryResponse | null = null;

  private pollMs: number;
  private onQuery: (q: QueryResponse) => void;
  private setTimeoutFn: (fn: () => void, ms: number) => unknown;

  constructor(
    private client: ApiClient,
    private sessionId: string,
    opts: ControllerOptions = {},
  ) {
    this.pollMs = opts.pollMs ?? 1000;
    this.onQuery = opts.onQuery ?? (() => {});
    this.setTimeoutFn = opts.setTimeoutFn ?? ((fn, ms) => setTimeout(fn, ms));
  }

  /** Fetch the current query; keep polling while the engine trains. */
  async refresh(): Promise<QueryResponse> {
    const q = await this.client.getQuery(this.sessionId);
    this.current = q;
    this.onQuery(q);
    if (q.status === "training") {
      this.setTimeoutFn(() => void this.refresh(), this.pollMs);
    }
    return q;
  }

  click(x: number, y: number): void {
    const q = this.current;
    if (!q || q.status !== "awaiting_annotation" || !q.raster) return;
    if (this.tool === "line") {
      this.lineTool.click(q.raster, x, y);
    } else {
      this.correctionTool.click(q.raster, x, y, q.n_classes ?? 2);
    }
  }

  async submit(): Promise<void> {
    const q = this.current;
    if (!q || q.query_id === undefined) return;
    let body: AnnotateBody;
    if (this.tool === "line") {
      if (!this.lineTool.ready()) return;
      body = this.lineTool.annotation(q.query_id);
    } else {
      body = this.correctionTool.annotation(q.query_id);
    }
    try {
      await this.client.annotate(this.sessionId, body);
    } catch (err) {
      if (!(err instanceof StaleQueryError)) throw err;
      // fall through: stale input is discarded and the query refetched
    }
    this.lineTool.reset();
    this.correctionTool.reset();
    await this.refresh();
  }
}
