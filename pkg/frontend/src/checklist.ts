// Checklist rendering: one row per rubric idea, in the order the service
// sent them. A green check means the idea was detected; a gold question mark
// means it was not. Pure presentation: the record is never modified.

import type { Checklist, RevisionRecord } from "./api";

export type Band = "high" | "medium" | "low";

/** Whole-number percentage, so the band below always matches what is shown. */
export function toPercent(confidence: number): number {
  return Math.round(confidence * 100);
}

export function confidenceBand(confidence: number): Band {
  const percent = toPercent(confidence);
  if (percent >= 80) {
    return "high";
  }
  if (percent >= 70) {
    return "medium";
  }
  return "low";
}

/** "2026-08-19T13:05:22.123456+00:00" -> "2026-08-19 13:05:22 UTC" */
export function formatTimestamp(iso: string): string {
  return iso.replace("T", " ").slice(0, 19) + " UTC";
}

export function detectionMark(detected: boolean): HTMLSpanElement {
  const mark = document.createElement("span");
  mark.className = detected ? "mark mark-detected" : "mark mark-missing";
  mark.textContent = detected ? "✓" : "?";
  return mark;
}

function evidenceFor(checklist: Checklist, ideaId: number) {
  return checklist.evidence.find((item) => item.idea_id === ideaId);
}

export function renderChecklist(record: RevisionRecord): HTMLElement {
  const section = document.createElement("section");
  section.className = "checklist";

  const header = document.createElement("div");
  header.className = "checklist-header";
  header.textContent =
    `draft ${record.draft_index} · ` +
    `submitted ${formatTimestamp(record.submitted_at)}`;
  section.appendChild(header);

  const list = document.createElement("ul");
  list.className = "checklist-rows";
  for (const row of record.checklist.rows) {
    const item = document.createElement("li");
    item.className = "checklist-row";
    item.dataset.ideaId = String(row.idea_id);

    item.appendChild(detectionMark(row.detected));

    const idea = document.createElement("span");
    idea.className = "idea-text";
    idea.textContent = row.idea_text;
    item.appendChild(idea);

    const band = confidenceBand(row.confidence);
    const confidence = document.createElement("span");
    confidence.className = `confidence band-${band}`;
    confidence.textContent = `${toPercent(row.confidence)}% (${band})`;
    item.appendChild(confidence);

    const evidence = evidenceFor(record.checklist, row.idea_id);
    if (row.detected && evidence !== undefined) {
      const expander = document.createElement("details");
      expander.className = "evidence";
      const summary = document.createElement("summary");
      summary.textContent = "why?";
      expander.appendChild(summary);
      const clause = document.createElement("p");
      clause.textContent =
        `“${evidence.clause}” (similarity ${evidence.sim.toFixed(2)})`;
      expander.appendChild(clause);
      item.appendChild(expander);
    }

    list.appendChild(item);
  }
  section.appendChild(list);
  return section;
}
