// Draft comparison: set difference over detected idea ids between two drafts
// of the same essay, rendered side by side with a change marker per idea.

import type { Checklist, RevisionRecord } from "./api";
import { detectionMark } from "./checklist";

export type ChangeMarker = "gained" | "lost" | "unchanged";

export function detectedIdeas(checklist: Checklist): Set<number> {
  const ideas = new Set<number>();
  for (const row of checklist.rows) {
    if (row.detected) {
      ideas.add(row.idea_id);
    }
  }
  return ideas;
}

/** Per-idea markers keyed by idea id, in the later draft's row order. */
export function changeMarkers(
  before: Checklist,
  after: Checklist
): Map<number, ChangeMarker> {
  const was = detectedIdeas(before);
  const is = detectedIdeas(after);
  const markers = new Map<number, ChangeMarker>();
  for (const row of after.rows) {
    if (is.has(row.idea_id) && !was.has(row.idea_id)) {
      markers.set(row.idea_id, "gained");
    } else if (was.has(row.idea_id) && !is.has(row.idea_id)) {
      markers.set(row.idea_id, "lost");
    } else {
      markers.set(row.idea_id, "unchanged");
    }
  }
  return markers;
}

function markerLabel(marker: ChangeMarker): string {
  if (marker === "unchanged") {
    return "unchanged";
  }
  return `${marker} ✓`;
}

export function renderComparison(
  before: RevisionRecord,
  after: RevisionRecord
): HTMLElement {
  const markers = changeMarkers(before.checklist, after.checklist);
  const wasDetected = detectedIdeas(before.checklist);

  const table = document.createElement("table");
  table.className = "compare";

  const head = table.createTHead().insertRow();
  for (const label of ["idea",
                       `draft ${before.draft_index}`,
                       `draft ${after.draft_index}`,
                       "change"]) {
    const cell = document.createElement("th");
    cell.textContent = label;
    head.appendChild(cell);
  }

  const body = table.createTBody();
  for (const row of after.checklist.rows) {
    const line = body.insertRow();
    line.className = "compare-row";
    line.dataset.ideaId = String(row.idea_id);

    const idea = line.insertCell();
    idea.className = "idea-text";
    idea.textContent = row.idea_text;

    line.insertCell().appendChild(detectionMark(wasDetected.has(row.idea_id)));
    line.insertCell().appendChild(detectionMark(row.detected));

    const marker = markers.get(row.idea_id) ?? "unchanged";
    const change = line.insertCell();
    change.className = `marker marker-${marker}`;
    change.textContent = markerLabel(marker);
  }

  return table;
}

/** Explanatory empty state for compare requests that name a missing draft. */
export function describeMissingDrafts(
  studentKey: string,
  wanted: number[],
  available: number[]
): string {
  const missing = wanted.filter((index) => !available.includes(index));
  if (available.length === 0) {
    return `no drafts stored for ${studentKey} yet; submit an essay first.`;
  }
  const drafts = missing.length === 1 ? "draft" : "drafts";
  const have =
    available.length === 1
      ? `draft ${available[0]} exists`
      : `drafts ${Math.min(...available)}–${Math.max(...available)} exist`;
  return `${drafts} ${missing.join(" and ")} not found for ${studentKey}; ${have}.`;
}
