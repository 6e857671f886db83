// Page wiring: editor, submit flow, draft history, and draft comparison.
// All state is derived from service responses plus the local editor text;
// responses are rendered as-is and never modified.

import { ApiError, ServiceClient } from "./api";
import type { RevisionRecord } from "./api";
import { renderChecklist } from "./checklist";
import { describeMissingDrafts, detectedIdeas, renderComparison } from "./compare";

export interface App {
  submit(): Promise<void>;
  compare(): Promise<void>;
  refreshHistory(): Promise<void>;
}

function must<T extends HTMLElement>(element: T | null, id: string): T {
  if (element === null) {
    throw new Error(`page is missing #${id}`);
  }
  return element;
}

export function setup(root: Document, baseUrl = ""): App {
  const client = new ServiceClient(baseUrl);

  const find = <T extends HTMLElement>(id: string): T =>
    must(root.getElementById(id) as T | null, id);

  const keyInput = find<HTMLInputElement>("student-key");
  const editor = find<HTMLTextAreaElement>("editor");
  const message = find<HTMLElement>("editor-message");
  const submitButton = find<HTMLButtonElement>("submit");
  const banner = find<HTMLElement>("banner");
  const retryButton = find<HTMLButtonElement>("retry");
  const checklistPanel = find<HTMLElement>("checklist-panel");
  const historyPanel = find<HTMLElement>("history-panel");
  const leftInput = find<HTMLInputElement>("compare-left");
  const rightInput = find<HTMLInputElement>("compare-right");
  const compareButton = find<HTMLButtonElement>("compare");
  const comparePanel = find<HTMLElement>("compare-panel");

  let history: RevisionRecord[] = [];
  let retryAction: () => Promise<void> = async () => {};

  // A fetch rejection means the service never answered; a 5xx usually means
  // a reverse proxy answered for a dead service. Both are "unreachable".
  function isUnreachable(error: unknown): boolean {
    return !(error instanceof ApiError) || error.status >= 500;
  }

  function showMessage(text: string): void {
    message.textContent = text;
    message.hidden = false;
  }

  function clearMessage(): void {
    message.textContent = "";
    message.hidden = true;
  }

  function showRetryBanner(action: () => Promise<void>): void {
    retryAction = action;
    banner.hidden = false;
  }

  function hideBanner(): void {
    banner.hidden = true;
  }

  function renderHistory(): void {
    const ordered = [...history].sort((a, b) => a.draft_index - b.draft_index);
    historyPanel.replaceChildren();
    for (const record of ordered) {
      const item = document.createElement("li");
      item.className = "history-entry";
      item.dataset.draftIndex = String(record.draft_index);
      const open = document.createElement("button");
      const found = detectedIdeas(record.checklist).size;
      open.textContent =
        `draft ${record.draft_index}: ` +
        `${found}/${record.checklist.rows.length} ideas`;
      open.addEventListener("click", () => {
        checklistPanel.replaceChildren(renderChecklist(record));
      });
      item.appendChild(open);
      historyPanel.appendChild(item);
    }
  }

  function remember(record: RevisionRecord): void {
    history = history.filter((known) => known.draft_index !== record.draft_index);
    history.push(record);
    renderHistory();
  }

  async function submit(): Promise<void> {
    const text = editor.value;
    if (text.trim() === "") {
      showMessage("write something first; the checklist needs an essay.");
      return;
    }
    clearMessage();
    submitButton.disabled = true;
    try {
      const record = await client.assess(keyInput.value, text);
      hideBanner();
      checklistPanel.replaceChildren(renderChecklist(record));
      remember(record);
    } catch (error) {
      if (isUnreachable(error)) {
        showRetryBanner(submit);
      } else {
        showMessage((error as ApiError).detail);
      }
    } finally {
      submitButton.disabled = false;
    }
  }

  async function refreshHistory(): Promise<void> {
    try {
      const response = await client.revisions(keyInput.value);
      hideBanner();
      history = response.revisions;
      renderHistory();
    } catch (error) {
      if (isUnreachable(error)) {
        showRetryBanner(refreshHistory);
      } else {
        showMessage((error as ApiError).detail);
      }
    }
  }

  async function compare(): Promise<void> {
    const left = Number(leftInput.value);
    const right = Number(rightInput.value);
    const empty = document.createElement("p");
    empty.className = "empty-state";
    if (!Number.isInteger(left) || !Number.isInteger(right)) {
      empty.textContent = "draft numbers must be whole numbers.";
      comparePanel.replaceChildren(empty);
      return;
    }
    try {
      const response = await client.revisions(keyInput.value);
      hideBanner();
      const drafts = response.revisions;
      const before = drafts.find((record) => record.draft_index === left);
      const after = drafts.find((record) => record.draft_index === right);
      if (before === undefined || after === undefined) {
        empty.textContent = describeMissingDrafts(
          keyInput.value,
          [left, right].filter(
            (index, position, pair) => pair.indexOf(index) === position
          ),
          drafts.map((record) => record.draft_index)
        );
        comparePanel.replaceChildren(empty);
        return;
      }
      comparePanel.replaceChildren(renderComparison(before, after));
    } catch (error) {
      if (isUnreachable(error)) {
        showRetryBanner(compare);
      } else {
        empty.textContent = (error as ApiError).detail;
        comparePanel.replaceChildren(empty);
      }
    }
  }

  submitButton.addEventListener("click", () => {
    void submit();
  });
  retryButton.addEventListener("click", () => {
    hideBanner();
    void retryAction();
  });
  compareButton.addEventListener("click", () => {
    void compare();
  });
  keyInput.addEventListener("change", () => {
    void refreshHistory();
  });

  return { submit, compare, refreshHistory };
}
