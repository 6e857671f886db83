import { describe, expect, it } from "vitest";
import {
  confidenceBand,
  formatTimestamp,
  renderChecklist,
  toPercent
} from "../src/checklist";
import { deepFreeze, IDEA_TEXTS, makeRecord, mountPage } from "./fixtures";

const DETECTED = [true, true, false, true, false, true];

function marks(element: HTMLElement): string[] {
  return [...element.querySelectorAll(".checklist-row .mark")].map(
    (mark) => mark.textContent ?? ""
  );
}

describe("renderChecklist", () => {
  it("renders one row per checklist row with binary marks", () => {
    mountPage();
    const element = renderChecklist(makeRecord("maya", 0, DETECTED));
    expect(element.querySelectorAll(".checklist-row")).toHaveLength(6);
    expect(marks(element)).toEqual(["✓", "✓", "?", "✓", "?", "✓"]);
  });

  it("keeps the rows in the order the service sent them", () => {
    mountPage();
    const element = renderChecklist(makeRecord("maya", 0, DETECTED));
    const texts = [...element.querySelectorAll(".idea-text")].map(
      (idea) => idea.textContent
    );
    expect(texts).toEqual(IDEA_TEXTS);
  });

  it("shows each confidence as a whole percentage", () => {
    mountPage();
    const element = renderChecklist(makeRecord("maya", 0, DETECTED));
    const shown = [...element.querySelectorAll(".confidence")].map(
      (confidence) => confidence.textContent ?? ""
    );
    const percents = ["77%", "82%", "69%", "90%", "72%", "85%"];
    percents.forEach((percent, row) => {
      expect(shown[row]).toContain(percent);
    });
  });

  it("shows the qualitative band next to the number", () => {
    mountPage();
    const element = renderChecklist(makeRecord("maya", 0, DETECTED));
    const shown = [...element.querySelectorAll(".confidence")].map(
      (confidence) => confidence.textContent ?? ""
    );
    expect(shown).toEqual([
      "77% (medium)",
      "82% (high)",
      "69% (low)",
      "90% (high)",
      "72% (medium)",
      "85% (high)"
    ]);
  });

  it("names the draft and its submission time in the header", () => {
    mountPage();
    const element = renderChecklist(makeRecord("maya", 3, DETECTED));
    const header = element.querySelector(".checklist-header");
    expect(header?.textContent).toContain("draft 3");
    expect(header?.textContent).toContain("2026-08-19 13:03:22 UTC");
  });

  it("puts the matched clause behind a why? expander on detected rows only", () => {
    mountPage();
    const element = renderChecklist(makeRecord("maya", 0, DETECTED));
    const rows = [...element.querySelectorAll(".checklist-row")];
    rows.forEach((row, position) => {
      const expander = row.querySelector("details.evidence");
      if (DETECTED[position]) {
        expect(expander?.querySelector("summary")?.textContent).toBe("why?");
        expect(expander?.textContent).toContain(
          `the clause that matched idea ${position + 1}`
        );
      } else {
        expect(expander).toBeNull();
      }
    });
  });

  it("never modifies the record it renders", () => {
    mountPage();
    const record = makeRecord("maya", 0, DETECTED);
    const pristine = JSON.stringify(record);
    renderChecklist(deepFreeze(record));
    expect(JSON.stringify(record)).toBe(pristine);
  });
});

describe("confidence formatting", () => {
  it("rounds to whole percentages", () => {
    expect(toPercent(0.9)).toBe(90);
    expect(toPercent(0.685)).toBe(69);
    expect(toPercent(1)).toBe(100);
  });

  it("bands at 80 and 70 percent", () => {
    expect(confidenceBand(0.9)).toBe("high");
    expect(confidenceBand(0.8)).toBe("high");
    expect(confidenceBand(0.79)).toBe("medium");
    expect(confidenceBand(0.7)).toBe("medium");
    expect(confidenceBand(0.69)).toBe("low");
    expect(confidenceBand(0.1)).toBe("low");
  });

  it("bands on the rounded value it displays", () => {
    expect(toPercent(0.796)).toBe(80);
    expect(confidenceBand(0.796)).toBe("high");
    expect(toPercent(0.695)).toBe(70);
    expect(confidenceBand(0.695)).toBe("medium");
  });
});

describe("formatTimestamp", () => {
  it("trims the wire timestamp to a readable UTC stamp", () => {
    expect(formatTimestamp("2026-08-19T13:05:22.123456+00:00")).toBe(
      "2026-08-19 13:05:22 UTC"
    );
    expect(formatTimestamp("2026-01-02T03:04:05+00:00")).toBe(
      "2026-01-02 03:04:05 UTC"
    );
  });
});
