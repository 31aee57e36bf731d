import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { DecisionQueue } from "../src/queue.js";
import { FakeServer, flaky } from "./fakeServer.js";

describe("DecisionQueue", () => {
  it("passes decisions straight through when online", async () => {
    const server = new FakeServer({ "tok-a": "alice" });
    server.addTask("t1", "s1", "forest", 1);
    const queue = new DecisionQueue(new ApiClient("tok-a", server.fetch));
    const ack = await queue.submit("t1", "forest");
    expect(ack).not.toBe("queued");
    expect(queue.pendingCount).toBe(0);
  });

  it("queues while offline and flushes on reconnect, in order", async () => {
    const server = new FakeServer({ "tok-a": "alice" });
    server.addTask("t1", "s1", "forest", 1);
    server.addTask("t2", "s2", "non-forest", 1);
    let offline = true;
    const api = new ApiClient("tok-a", flaky(server.fetch, () => offline));
    const queue = new DecisionQueue(api);
    expect(await queue.submit("t1", "forest")).toBe("queued");
    expect(await queue.submit("t2", "grassland")).toBe("queued");
    expect(queue.pendingCount).toBe(2);
    offline = false;
    await queue.flush();
    expect(queue.pendingCount).toBe(0);
    expect(server.confirmed.get("s1")).toBe("forest");
    expect(server.confirmed.get("s2")).toBe("non-forest");
  });

  it("replays are idempotent against the server", async () => {
    const server = new FakeServer({ "tok-a": "alice" });
    server.addTask("t1", "s1", "forest", 1);
    const api = new ApiClient("tok-a", server.fetch);
    const queue = new DecisionQueue(api);
    await queue.submit("t1", "forest");
    // a duplicate of the same decision is acknowledged, not rejected
    const ack = await queue.submit("t1", "forest");
    expect(ack).not.toBe("queued");
    expect(server.tasks[0].decisions).toHaveLength(1);
  });

  it("drops queued decisions the server has since rejected", async () => {
    const server = new FakeServer({ "tok-a": "alice", "tok-b": "bob" });
    server.addTask("t1", "s1", "forest", 1);
    let offline = true;
    const mine = new DecisionQueue(
      new ApiClient("tok-a", flaky(server.fetch, () => offline)),
    );
    expect(await mine.submit("t1", "forest")).toBe("queued");
    // someone else resolves the task while we are offline
    const other = new ApiClient("tok-b", server.fetch);
    await other.submitDecision("t1", "grassland");
    offline = false;
    await mine.flush();
    expect(mine.pendingCount).toBe(0);
    expect(server.confirmed.get("s1")).toBe("non-forest");
  });
});
