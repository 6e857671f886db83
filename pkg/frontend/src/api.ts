// Typed client for the assessment service. The interfaces mirror the wire
// format exactly; nothing here reshapes or reorders what the service sends.

export interface ChecklistRow {
  idea_id: number;
  idea_text: string;
  detected: boolean;
  confidence: number;
}

export interface EvidenceItem {
  idea_id: number;
  clause: string;
  sim: number;
}

export interface Checklist {
  essay_id: string;
  rows: ChecklistRow[];
  evidence: EvidenceItem[];
}

export interface RevisionRecord {
  student_key: string;
  draft_index: number;
  submitted_at: string;
  text: string;
  checklist: Checklist;
}

export interface RevisionHistory {
  student_key: string;
  revisions: RevisionRecord[];
}

export interface MainIdea {
  id: number;
  text: string;
  confidence: number;
}

export interface Rubric {
  main_ideas: MainIdea[];
}

export interface Health {
  status: string;
  version: string;
  pyramid_id: string;
  space_id: string;
  config: { topk: number; t: number };
}

/** The service answered with an error status (as opposed to not answering). */
export class ApiError extends Error {
  constructor(readonly status: number, readonly detail: string) {
    super(detail);
    this.name = "ApiError";
  }
}

/** Flatten a 400/413 "detail" payload into one readable line. */
export function formatDetail(detail: unknown): string {
  if (typeof detail === "string") {
    return detail;
  }
  if (Array.isArray(detail)) {
    const parts = detail.map((item) => {
      if (item && typeof item === "object" && "msg" in item) {
        const loc = Array.isArray((item as { loc?: unknown }).loc)
          ? ((item as { loc: unknown[] }).loc).join(".") + ": "
          : "";
        return loc + String((item as { msg: unknown }).msg);
      }
      return JSON.stringify(item);
    });
    return parts.join("; ");
  }
  return JSON.stringify(detail);
}

async function raiseForStatus(response: Response): Promise<void> {
  if (response.ok) {
    return;
  }
  let detail: unknown = response.statusText;
  try {
    const body = await response.json();
    if (body && typeof body === "object" && "detail" in body) {
      detail = (body as { detail: unknown }).detail;
    }
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(response.status, formatDetail(detail));
}

export class ServiceClient {
  constructor(private readonly baseUrl: string = "") {}

  async assess(studentKey: string, text: string): Promise<RevisionRecord> {
    const response = await fetch(`${this.baseUrl}/assess`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ student_key: studentKey, text })
    });
    await raiseForStatus(response);
    return response.json();
  }

  async revisions(studentKey: string): Promise<RevisionHistory> {
    const response = await fetch(
      `${this.baseUrl}/revisions/${encodeURIComponent(studentKey)}`
    );
    await raiseForStatus(response);
    return response.json();
  }

  async rubric(): Promise<Rubric> {
    const response = await fetch(`${this.baseUrl}/rubric`);
    await raiseForStatus(response);
    return response.json();
  }

  async health(): Promise<Health> {
    const response = await fetch(`${this.baseUrl}/health`);
    await raiseForStatus(response);
    return response.json();
  }
}
