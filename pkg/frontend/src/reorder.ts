// Drag-to-reorder list of packet summaries. The board's top-to-bottom
// arrangement is the student's claimed chronological order; permutation()
// reports, for each position, the display index the server handed out.
export class ReorderBoard {
  readonly root: HTMLElement;
  private entries: { displayIndex: number; el: HTMLElement }[] = [];
  private dragFrom: number | null = null;
  onChange: (() => void) | null = null;

  constructor(doc: Document, items: string[]) {
    this.root = doc.createElement("ol");
    this.root.className = "reorder-board";
    items.forEach((summary, displayIndex) => {
      const el = this.renderItem(doc, summary, displayIndex);
      this.entries.push({ displayIndex, el });
      this.root.appendChild(el);
    });
  }

  private renderItem(
    doc: Document,
    summary: string,
    displayIndex: number,
  ): HTMLElement {
    const li = doc.createElement("li");
    li.className = "reorder-item";
    li.draggable = true;
    const label = doc.createElement("span");
    label.className = "summary";
    label.textContent = summary;
    const up = doc.createElement("button");
    up.type = "button";
    up.className = "move-up";
    up.textContent = "▲";
    up.addEventListener("click", () => this.move(this.positionOf(li), -1));
    const down = doc.createElement("button");
    down.type = "button";
    down.className = "move-down";
    down.textContent = "▼";
    down.addEventListener("click", () => this.move(this.positionOf(li), 1));
    li.append(label, up, down);

    li.addEventListener("dragstart", (ev) => {
      this.dragFrom = this.positionOf(li);
      ev.dataTransfer?.setData("text/plain", String(displayIndex));
    });
    li.addEventListener("dragover", (ev) => ev.preventDefault());
    li.addEventListener("drop", (ev) => {
      ev.preventDefault();
      if (this.dragFrom === null) return;
      const to = this.positionOf(li);
      this.moveTo(this.dragFrom, to);
      this.dragFrom = null;
    });
    return li;
  }

  private positionOf(el: HTMLElement): number {
    return this.entries.findIndex((e) => e.el === el);
  }

  private move(position: number, delta: number): void {
    this.moveTo(position, position + delta);
  }

  moveTo(from: number, to: number): void {
    if (from < 0 || from >= this.entries.length) return;
    if (to < 0 || to >= this.entries.length || from === to) return;
    const [entry] = this.entries.splice(from, 1);
    this.entries.splice(to, 0, entry);
    this.render();
    this.onChange?.();
  }

  private render(): void {
    for (const entry of this.entries) this.root.appendChild(entry.el);
  }

  permutation(): number[] {
    return this.entries.map((e) => e.displayIndex);
  }
}
