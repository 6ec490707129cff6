import { HexToken, parseHexDump } from "./hex.js";

// Hex viewer: 16 bytes per row with an offset gutter; each byte is a span
// addressable by offset so field rows can light up their bytes on hover.
export class HexPane {
  private byteEls = new Map<number, HTMLElement>();
  readonly root: HTMLElement;

  constructor(doc: Document, dump: string) {
    this.root = doc.createElement("div");
    this.root.className = "hexpane";
    for (const row of parseHexDump(dump)) {
      this.root.appendChild(this.renderRow(doc, row));
    }
  }

  private renderRow(doc: Document, row: HexToken[]): HTMLElement {
    const line = doc.createElement("div");
    line.className = "hexrow";
    const gutter = doc.createElement("span");
    gutter.className = "offset";
    gutter.textContent = row.length
      ? row[0].offset.toString(16).padStart(4, "0")
      : "";
    line.appendChild(gutter);
    for (const token of row) {
      const span = doc.createElement("span");
      span.className = token.masked ? "byte masked" : "byte";
      span.textContent = token.text;
      span.dataset.offset = String(token.offset);
      this.byteEls.set(token.offset, span);
      line.appendChild(span);
    }
    return line;
  }

  highlight(offsets: Set<number>): void {
    for (const [offset, el] of this.byteEls) {
      el.classList.toggle("hl", offsets.has(offset));
    }
  }

  clearHighlight(): void {
    this.highlight(new Set());
  }
}
