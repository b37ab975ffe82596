/** Browser bootstrap: create or resume a session and run the labeling loop. */

import { SessionClient } from "./api.js";
import { renderCompletion, renderQuery } from "./view.js";
import type { TimingRecord } from "./types.js";

interface AppConfig {
  baseUrl: string;
  catalogId: string;
  sessionId?: string;
  sessionConfig?: Record<string, unknown>;
}

function readConfig(): AppConfig {
  const params = new URLSearchParams(window.location.search);
  return {
    baseUrl: params.get("base") ?? "http://127.0.0.1:8008",
    catalogId: params.get("catalog") ?? "demo",
    sessionId: params.get("session") ?? undefined,
  };
}

export async function runApp(root: HTMLElement, config: AppConfig): Promise<void> {
  const client = new SessionClient(config.baseUrl, config.sessionId ?? null);
  if (!client.sessionId) {
    await client.createSession(config.catalogId, config.sessionConfig ?? {});
  }
  const timings: TimingRecord[] = [];
  for (;;) {
    const query = await client.nextQuery();
    if (query === null) {
      renderCompletion(root, timings);
      return;
    }
    await new Promise<void>((resolve) => {
      renderQuery(root, query, {
        onSubmit: async (ordering, elapsedSeconds) => {
          timings.push({
            queryId: query.query_id,
            tupleSize: query.body.length + 1,
            elapsedSeconds,
          });
          await client.submitRanking(query.query_id, ordering, elapsedSeconds);
          resolve();
        },
      });
    });
  }
}

if (typeof window !== "undefined" && typeof document !== "undefined") {
  const root = document.getElementById("app");
  if (root) {
    runApp(root, readConfig()).catch((error) => {
      root.textContent = `session failed: ${String(error)}`;
    });
  }
}
