import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/client.js";
import { SessionController } from "../src/controller.js";
import { FixtureServer } from "./fixtureServer.js";
import fixture from "./fixture.json";

function setup(opts: { pollMs?: number } = {}) {
  const server = new FixtureServer();
  const client = new ApiClient("", server.fetch as typeof fetch);
  const ctl = new SessionController(client, server.sessionId, {
    pollMs: opts.pollMs ?? 1,
    setTimeoutFn: () => 0, // no automatic polling in tests
  });
  return { server, client, ctl };
}

describe("submit flow", () => {
  it("line submit posts the recorded body and refetches", async () => {
    const { server, ctl } = setup();
    await ctl.refresh();
    ctl.click(9, 10);
    ctl.click(16, 13);
    await ctl.submit();
    const post = server.log.find((e) => e.method === "POST" && e.path.endsWith("/annotate"));
    expect(post?.body).toEqual(fixture.annotate_body);
    // after the annotation the controller refetched the follow-up query
    expect(ctl.current?.query_id).toBe(fixture.query_after.query_id);
  });

  it("does not post without two staged clicks", async () => {
    const { server, ctl } = setup();
    await ctl.refresh();
    ctl.click(9, 10);
    await ctl.submit();
    expect(server.log.some((e) => e.method === "POST" && e.path.endsWith("/annotate"))).toBe(
      false,
    );
  });

  it("empty corrections submit is allowed in correct mode", async () => {
    const { server, ctl } = setup();
    await ctl.refresh();
    ctl.tool = "correct";
    await ctl.submit();
    const post = server.log.find((e) => e.method === "POST" && e.path.endsWith("/annotate"));
    expect(post?.body).toEqual({ query_id: fixture.query.query_id, corrections: [] });
  });
});

describe("409 handling", () => {
  it("a stale reply discards pending input and refetches the query", async () => {
    const { server, ctl } = setup();
    await ctl.refresh();
    const getsBefore = server.log.filter((e) => e.path.endsWith("/query")).length;
    ctl.click(9, 10);
    ctl.click(16, 13);
    server.staleNext = true;
    await ctl.submit(); // must not throw
    const getsAfter = server.log.filter((e) => e.path.endsWith("/query")).length;
    expect(getsAfter).toBe(getsBefore + 1);
    expect(ctl.lineTool.pending()).toHaveLength(0);
  });

  it("non-409 errors propagate", async () => {
    const server = new FixtureServer();
    const client = new ApiClient("", server.fetch as typeof fetch);
    const ctl = new SessionController(client, "wrong-session", {
      setTimeoutFn: () => 0,
    });
    await expect(ctl.refresh()).rejects.toThrow(/404/);
  });
});

describe("polling", () => {
  it("keeps polling while the engine is training", async () => {
    const server = new FixtureServer();
    const training = { ...fixture.query, status: "training" };
    const fx = { ...fixture, query: training };
    const srv = new FixtureServer(fx as typeof fixture);
    const client = new ApiClient("", srv.fetch as typeof fetch);
    const scheduled: number[] = [];
    const ctl = new SessionController(client, srv.sessionId, {
      pollMs: 1000,
      setTimeoutFn: (_fn, ms) => {
        scheduled.push(ms);
        return 0;
      },
    });
    await ctl.refresh();
    expect(scheduled).toEqual([1000]);
    void server;
  });

  it("stops polling once a query is outstanding", async () => {
    const { ctl } = setup();
    const q = await ctl.refresh();
    expect(q.status).toBe("awaiting_annotation");
  });
});
