// Shared fixtures: a six-idea rubric, checklist builders, a deterministic
// PRNG, and a stubbed assessment service that mirrors the real wire format
// (same fields, same draft_index bookkeeping) behind a fetch stub.

import { readFileSync } from "node:fs";
import { join } from "node:path";
import { vi } from "vitest";
import type { Checklist, RevisionRecord } from "../src/api";

export const IDEA_TEXTS = [
  "Plants make their own food using energy from sunlight",
  "Energy is transferred from one organism to another through food",
  "Matter cycles between organisms and the environment",
  "Decomposers break down dead organisms and recycle nutrients",
  "The amount of usable energy shrinks at each step of a food chain",
  "All organisms need energy to live and grow"
];

// confidence values observed in a reference deployment
export const CONFIDENCES = [0.77, 0.82, 0.69, 0.9, 0.72, 0.85];

export const SEEDED_ESSAY =
  "The sun gives plants the energy they need. Plants use sunlight, water, " +
  "and air to make their own food. Animals eat the plants, so the energy " +
  "moves from the plants into the animals. Mushrooms and bacteria break " +
  "down dead leaves and animals. Every living thing needs energy to grow.";

export function makeChecklist(essayId: string, detected: boolean[]): Checklist {
  const rows = detected.map((flag, position) => ({
    idea_id: position + 1,
    idea_text: IDEA_TEXTS[position],
    detected: flag,
    confidence: CONFIDENCES[position]
  }));
  const evidence = rows
    .filter((row) => row.detected)
    .map((row) => ({
      idea_id: row.idea_id,
      clause: `the clause that matched idea ${row.idea_id}`,
      sim: 0.6 + row.idea_id / 50
    }));
  return { essay_id: essayId, rows, evidence };
}

export function makeRecord(
  studentKey: string,
  draftIndex: number,
  detected: boolean[],
  text = SEEDED_ESSAY
): RevisionRecord {
  return {
    student_key: studentKey,
    draft_index: draftIndex,
    submitted_at: `2026-08-19T13:0${draftIndex % 10}:22.123456+00:00`,
    text,
    checklist: makeChecklist(studentKey, detected)
  };
}

export function deepFreeze<T>(value: T): T {
  if (value !== null && typeof value === "object") {
    for (const child of Object.values(value)) {
      deepFreeze(child);
    }
    Object.freeze(value);
  }
  return value;
}

/** Small seeded PRNG (mulberry32) so randomized cases are reproducible. */
export function mulberry32(seed: number): () => number {
  return () => {
    seed = (seed + 0x6d2b79f5) | 0;
    let t = Math.imul(seed ^ (seed >>> 15), 1 | seed);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Load the real page skeleton so tests run against the shipped markup. */
export function mountPage(): void {
  const html = readFileSync(join(process.cwd(), "index.html"), "utf-8");
  const body = html.slice(html.indexOf("<body>") + "<body>".length,
                          html.indexOf("</body>"));
  document.body.innerHTML = body.replace(/<script[\s\S]*?<\/script>/g, "");
}

type Failure = "network" | { status: number; detail: unknown };

export interface StubService {
  store: Map<string, RevisionRecord[]>;
  calls: { method: string; url: string }[];
  failNext(failure: Failure): void;
}

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" }
  });
}

/**
 * Replace global fetch with an in-memory service. `plan` decides which ideas
 * a submission detects, given the essay text and the draft index it will get.
 */
export function installStubService(
  plan: (text: string, draftIndex: number) => boolean[]
): StubService {
  const store = new Map<string, RevisionRecord[]>();
  const calls: { method: string; url: string }[] = [];
  const failures: Failure[] = [];

  const handler = async (
    input: RequestInfo | URL,
    init?: RequestInit
  ): Promise<Response> => {
    const url = String(input);
    const method = init?.method ?? "GET";
    calls.push({ method, url });

    const failure = failures.shift();
    if (failure === "network") {
      throw new TypeError("fetch failed");
    }
    if (failure !== undefined) {
      return jsonResponse(failure.status, { detail: failure.detail });
    }

    if (method === "POST" && url.endsWith("/assess")) {
      const body = JSON.parse(String(init?.body)) as {
        student_key: string;
        text: string;
      };
      const history = store.get(body.student_key) ?? [];
      const record: RevisionRecord = {
        student_key: body.student_key,
        draft_index: history.length,
        submitted_at: new Date().toISOString(),
        text: body.text,
        checklist: makeChecklist(body.student_key,
                                 plan(body.text, history.length))
      };
      history.push(record);
      store.set(body.student_key, history);
      return jsonResponse(200, record);
    }

    const revisionsAt = url.indexOf("/revisions/");
    if (method === "GET" && revisionsAt >= 0) {
      const key = decodeURIComponent(
        url.slice(revisionsAt + "/revisions/".length)
      );
      return jsonResponse(200, {
        student_key: key,
        revisions: store.get(key) ?? []
      });
    }

    return jsonResponse(404, { detail: "not found" });
  };

  vi.stubGlobal("fetch", vi.fn(handler));
  return {
    store,
    calls,
    failNext: (failure) => {
      failures.push(failure);
    }
  };
}
