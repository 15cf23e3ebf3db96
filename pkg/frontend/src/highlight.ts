/** Rendering of served byte spans as editor highlight decorations.
 *
 * The service reports spans as byte offsets into the UTF-8 encoding of the
 * document; JS strings index UTF-16 code units, so the offsets must be
 * translated before slicing.
 */

import type { Span } from "./api.js";

/** Byte-offset → string-index translation table for one document. */
export class ByteIndex {
  /** byte offset at the start of each UTF-16 code unit, plus the total. */
  private readonly bytes: Uint32Array;

  constructor(source: string) {
    const table = new Uint32Array(source.length + 1);
    let byte = 0;
    let i = 0;
    while (i < source.length) {
      table[i] = byte;
      const cp = source.codePointAt(i) as number;
      if (cp > 0xffff) {
        // no character starts at the trailing surrogate: give it the same
        // byte offset as the pair so boundary searches skip past it
        table[i + 1] = byte;
        byte += 4;
        i += 2;
      } else {
        byte += cp <= 0x7f ? 1 : cp <= 0x7ff ? 2 : 3;
        i += 1;
      }
    }
    table[source.length] = byte;
    this.bytes = table;
  }

  /** String index of the first code unit at or after the given byte offset. */
  toChar(byte: number): number {
    let lo = 0;
    let hi = this.bytes.length - 1;
    while (lo < hi) {
      const mid = (lo + hi) >> 1;
      if (this.bytes[mid] < byte) lo = mid + 1;
      else hi = mid;
    }
    return lo;
  }
}

/** Collapse overlapping or touching spans so a flat run of <mark> elements
 * can represent them. Input order is irrelevant; output is sorted. */
export function mergeSpans(spans: readonly Span[]): Span[] {
  const sorted = [...spans].sort((a, b) => a[0] - b[0] || a[1] - b[1]);
  const merged: Span[] = [];
  for (const [start, end] of sorted) {
    const last = merged[merged.length - 1];
    if (last && start <= last[1]) last[1] = Math.max(last[1], end);
    else merged.push([start, end]);
  }
  return merged;
}

function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;");
}

/** HTML for the highlight overlay: the document text with every span wrapped
 * in a <mark> element. */
export function renderHighlights(source: string, spans: readonly Span[]): string {
  const index = new ByteIndex(source);
  let html = "";
  let pos = 0;
  for (const [start, end] of mergeSpans(spans)) {
    const from = index.toChar(start);
    const to = index.toChar(end);
    html += escapeHtml(source.slice(pos, from));
    html += "<mark>" + escapeHtml(source.slice(from, to)) + "</mark>";
    pos = to;
  }
  return html + escapeHtml(source.slice(pos));
}
