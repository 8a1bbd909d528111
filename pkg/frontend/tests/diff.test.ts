import { describe, expect, it } from "vitest";

import { tokenDiff } from "../src/diff.js";

describe("tokenDiff", () => {
  it("returns no spans for identical sentences", () => {
    expect(tokenDiff("the movie is great", "the movie is great")).toEqual([]);
  });

  it("marks exactly one inserted span for one inserted token", () => {
    const spans = tokenDiff("the movie is great", "the movie is not great");
    expect(spans).toHaveLength(1);
    expect(spans[0].kind).toBe("inserted");
    expect(spans[0].side).toBe("counterfactual");
    expect("the movie is not great".slice(spans[0].start, spans[0].end)).toBe("not");
  });

  it("marks exactly one deleted span for one removed token", () => {
    const spans = tokenDiff("the movie is not great", "the movie is great");
    expect(spans).toHaveLength(1);
    expect(spans[0].kind).toBe("deleted");
    expect(spans[0].side).toBe("original");
    expect("the movie is not great".slice(spans[0].start, spans[0].end)).toBe("not");
  });

  it("marks a swap as replaced on both sides", () => {
    const spans = tokenDiff("the movie is great", "the movie is boring");
    expect(spans.map((s) => s.kind)).toEqual(["replaced", "replaced"]);
    const original = spans.find((s) => s.side === "original")!;
    const counterfactual = spans.find((s) => s.side === "counterfactual")!;
    expect("the movie is great".slice(original.start, original.end)).toBe("great");
    expect("the movie is boring".slice(counterfactual.start, counterfactual.end)).toBe("boring");
  });

  it("handles multi-word inserted surfaces", () => {
    const spans = tokenDiff("the movie is great", "the movie is supposed to be great");
    expect(spans).toHaveLength(1);
    expect(spans[0].kind).toBe("inserted");
    expect(
      "the movie is supposed to be great".slice(spans[0].start, spans[0].end),
    ).toBe("supposed to be");
  });

  it("handles reordering with separate spans", () => {
    const spans = tokenDiff("honestly the movie is great", "the movie is great honestly");
    for (const span of spans) {
      const text = span.side === "original" ? "honestly the movie is great" : "the movie is great honestly";
      expect(text.slice(span.start, span.end)).toBe("honestly");
    }
    expect(spans.length).toBe(2);
  });

  it("span offsets always index into the displayed strings", () => {
    const a = "frankly the plot was hardly dreadful overall";
    const b = "the plot was very dreadful";
    for (const span of tokenDiff(a, b)) {
      const text = span.side === "original" ? a : b;
      expect(span.start).toBeGreaterThanOrEqual(0);
      expect(span.end).toBeLessThanOrEqual(text.length);
      expect(span.start).toBeLessThan(span.end);
      expect(text.slice(span.start, span.end).trim()).toBe(text.slice(span.start, span.end));
    }
  });
});
