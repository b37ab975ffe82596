/**
 * Live round trip against the real session service: a scripted headless
 * client completes a 25-query batch (including the in-batch repeat) and a
 * second session answers its repeat inconsistently to verify the batch is
 * excluded from fitting. The service is spawned as a child process.
 */
import { spawn, ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { SessionClient } from "../src/api.js";
import { summarizeTimings } from "../src/view.js";
import type { QueryView, TimingRecord } from "../src/types.js";

const PORT = 8123 + (process.pid % 500);
const BASE = `http://127.0.0.1:${PORT}`;
const N_ITEMS = 8;

let server: ChildProcess;
let dataDir: string;

const SESSION_CONFIG = {
  tuple_size: 3,
  burn_in: 3, // 8 items x 3 = 24 fresh, so batch 1 is exactly 24 + repeat
  horizon: 1,
  candidates_per_head: 5,
  n_f: 5,
  seed: 11,
  batch_size: 25,
  synchronous: true,
};

beforeAll(async () => {
  const dir = mkdtempSync(join(tmpdir(), "labelui-"));
  dataDir = join(dir, "sessions");
  const catalog = Array.from({ length: N_ITEMS }, (_u, i) => `${i}\titem-${i}`).join("\n");
  writeFileSync(join(dir, "catalog.tsv"), catalog + "\n");
  writeFileSync(
    join(dir, "service.json"),
    JSON.stringify({
      port: PORT,
      data_dir: dataDir,
      catalogs: { demo: { path: join(dir, "catalog.tsv") } },
    }),
  );
  server = spawn(
    "python3",
    ["-m", "tuplelearn.cli", "serve", join(dir, "service.json"), "--port", String(PORT)],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  const deadline = Date.now() + 60_000;
  for (;;) {
    try {
      const response = await fetch(`${BASE}/healthz`);
      if (response.ok) break;
    } catch {
      // server still booting
    }
    if (Date.now() > deadline) throw new Error("service did not become healthy");
    await new Promise((resolve) => setTimeout(resolve, 300));
  }
}, 90_000);

afterAll(() => {
  server?.kill("SIGTERM");
});

/** Ascending-id ranking: deterministic, so repeats are answered consistently. */
function consistentRanking(query: QueryView): number[] {
  return query.body.map((b) => b.id).sort((a, b) => a - b);
}

async function driveBatch(
  client: SessionClient,
  count: number,
  rank: (query: QueryView, seenBefore: boolean) => number[],
): Promise<{ queries: QueryView[]; timings: TimingRecord[] }> {
  const seen = new Set<string>();
  const queries: QueryView[] = [];
  const timings: TimingRecord[] = [];
  for (let i = 0; i < count; i++) {
    const query = await client.nextQuery();
    expect(query).not.toBeNull();
    const key = `${query!.head.id}|${[...query!.body.map((b) => b.id)].sort().join(",")}`;
    const elapsed = 0.5 + i * 0.01;
    const ack = await client.submitRanking(query!.query_id, rank(query!, seen.has(key)), elapsed);
    expect(ack).not.toBe("queued");
    seen.add(key);
    queries.push(query!);
    timings.push({
      queryId: query!.query_id,
      tupleSize: query!.body.length + 1,
      elapsedSeconds: elapsed,
    });
  }
  return { queries, timings };
}

describe("session service round trip", () => {
  it(
    "completes a 25-query batch with a consistent repeat; journal holds 25 canonical responses",
    { timeout: 120_000 },
    async () => {
      const client = new SessionClient(BASE);
      await client.createSession("demo", SESSION_CONFIG);
      const { queries, timings } = await driveBatch(client, 25, consistentRanking);

      expect(new Set(queries.map((q) => q.batch_index))).toEqual(new Set([0]));
      expect(queries.map((q) => q.batch_position)).toEqual(
        Array.from({ length: 25 }, (_u, i) => i + 1),
      );

      const journal = (await client.journal())
        .trim()
        .split("\n")
        .map((line) => JSON.parse(line));
      const issued = journal.filter((r) => r.type === "issued");
      const responses = journal.filter((r) => r.type === "response");
      expect(responses).toHaveLength(25);
      const issuedById = new Map(issued.map((r) => [r.query_id, r]));
      for (const response of responses) {
        const record = issuedById.get(response.query_id);
        expect(record).toBeDefined();
        // Canonical: stored against the body's item ids, sorted storage order,
        // independent of the shuffled presentation.
        expect(record!.body).toEqual([...record!.body].sort((a: number, b: number) => a - b));
        expect([...response.ranking].sort((a: number, b: number) => a - b)).toEqual(record!.body);
        expect(response.elapsed_seconds).toBeGreaterThan(0);
      }
      const repeats = issued.filter((r) => r.repeat_of !== null);
      expect(repeats).toHaveLength(1);
      expect(issued.indexOf(repeats[0])).toBe(24);

      const snapshot = await client.snapshot();
      expect(snapshot.validity.batches_valid).toBe(1);
      expect(snapshot.validity.responses_in_fit).toBe(25);

      const summary = summarizeTimings(timings);
      expect(summary).toHaveLength(1);
      expect(summary[0].tupleSize).toBe(3);
      expect(summary[0].count).toBe(25);
      expect(summary[0].meanSeconds).toBeGreaterThan(0);
    },
  );

  it(
    "an inconsistent repeat marks the batch excluded and keeps it out of fitting",
    { timeout: 120_000 },
    async () => {
      const client = new SessionClient(BASE);
      await client.createSession("demo", { ...SESSION_CONFIG, seed: 12 });
      // Rank ascending everywhere except the batch's final slot (the repeat),
      // which gets the reverse: a guaranteed mismatch with its original.
      await driveBatch(client, 25, (query) => {
        const ascending = consistentRanking(query);
        return query.batch_position === query.batch_size ? [...ascending].reverse() : ascending;
      });
      const snapshot = await client.snapshot();
      expect(snapshot.validity.batches_invalid).toBe(1);
      expect(snapshot.validity.responses_in_fit).toBe(0);
      expect(snapshot.metric_history).toHaveLength(0);
    },
  );

  it(
    "runs a session to exhaustion and reports completion",
    { timeout: 180_000 },
    async () => {
      const client = new SessionClient(BASE);
      await client.createSession("demo", { ...SESSION_CONFIG, seed: 13 });
      const timings: TimingRecord[] = [];
      for (;;) {
        const query = await client.nextQuery();
        if (query === null) break;
        const elapsed = 0.25;
        await client.submitRanking(query.query_id, consistentRanking(query), elapsed);
        timings.push({
          queryId: query.query_id,
          tupleSize: query.body.length + 1,
          elapsedSeconds: elapsed,
        });
      }
      // 24 burn-in + repeat + 8 adaptive + trailing repeat.
      expect(timings).toHaveLength(34);
      const snapshot = await client.snapshot();
      expect(snapshot.exhausted).toBe(true);
      expect(snapshot.metric_history.at(-1)?.label_seconds).toBeCloseTo(34 * 0.25, 5);
    },
  );
});
