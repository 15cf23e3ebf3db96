import { describe, expect, it } from "vitest";

import { ByteIndex, mergeSpans, renderHighlights } from "../src/highlight.js";

describe("ByteIndex", () => {
  it("is the identity on ASCII text", () => {
    const index = new ByteIndex("pre [x >= 0];");
    expect(index.toChar(0)).toBe(0);
    expect(index.toChar(5)).toBe(5);
    expect(index.toChar(13)).toBe(13);
  });

  it("accounts for multi-byte characters", () => {
    // "é" is two UTF-8 bytes but one UTF-16 code unit
    const index = new ByteIndex("é x");
    expect(index.toChar(0)).toBe(0);
    expect(index.toChar(2)).toBe(1); // first byte after "é"
    expect(index.toChar(3)).toBe(2);
  });

  it("accounts for astral characters (two code units, four bytes)", () => {
    const source = "\u{1f600}x";
    const index = new ByteIndex(source);
    expect(index.toChar(4)).toBe(2); // "x" starts after the 4-byte emoji
  });
});

describe("mergeSpans", () => {
  it("sorts disjoint spans", () => {
    expect(mergeSpans([[10, 12], [0, 3]])).toEqual([
      [0, 3],
      [10, 12],
    ]);
  });

  it("merges overlapping and touching spans", () => {
    expect(mergeSpans([[0, 5], [3, 8], [8, 9]])).toEqual([[0, 9]]);
  });

  it("leaves nested spans as their hull", () => {
    expect(mergeSpans([[0, 10], [2, 4]])).toEqual([[0, 10]]);
  });
});

describe("renderHighlights", () => {
  it("wraps each span in a mark element", () => {
    const html = renderHighlights("abcdef", [[1, 3]]);
    expect(html).toBe("a<mark>bc</mark>def");
  });

  it("escapes markup-significant characters", () => {
    const html = renderHighlights("a < b && c", [[2, 3]]);
    expect(html).toBe("a <mark>&lt;</mark> b &amp;&amp; c");
  });

  it("renders no marks for an empty span list", () => {
    expect(renderHighlights("xyz", [])).toBe("xyz");
  });

  it("merges overlapping spans into one mark", () => {
    const html = renderHighlights("abcdef", [
      [0, 3],
      [2, 5],
    ]);
    expect(html).toBe("<mark>abcde</mark>f");
  });
});
