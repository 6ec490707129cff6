// @vitest-environment jsdom
import { describe, expect, it } from "vitest";

import { ReorderBoard } from "../src/reorder.js";

const ITEMS = ["pkt A", "pkt B", "pkt C"];

describe("ReorderBoard", () => {
  it("starts in display order", () => {
    const board = new ReorderBoard(document, ITEMS);
    expect(board.permutation()).toEqual([0, 1, 2]);
  });

  it("moveTo rearranges and reports the permutation", () => {
    const board = new ReorderBoard(document, ITEMS);
    board.moveTo(2, 0); // C to the front
    expect(board.permutation()).toEqual([2, 0, 1]);
    const labels = [...board.root.querySelectorAll(".summary")].map(
      (el) => el.textContent,
    );
    expect(labels).toEqual(["pkt C", "pkt A", "pkt B"]);
  });

  it("up/down buttons move items one slot", () => {
    const board = new ReorderBoard(document, ITEMS);
    document.body.appendChild(board.root);
    const second = board.root.children[1];
    (second.querySelector(".move-up") as HTMLButtonElement).click();
    expect(board.permutation()).toEqual([1, 0, 2]);
    const nowSecond = board.root.children[1];
    (nowSecond.querySelector(".move-down") as HTMLButtonElement).click();
    expect(board.permutation()).toEqual([1, 2, 0]);
  });

  it("ignores out-of-range moves", () => {
    const board = new ReorderBoard(document, ITEMS);
    board.moveTo(0, -1);
    board.moveTo(0, 3);
    board.moveTo(5, 0);
    expect(board.permutation()).toEqual([0, 1, 2]);
  });

  it("notifies on change", () => {
    const board = new ReorderBoard(document, ITEMS);
    let called = 0;
    board.onChange = () => called++;
    board.moveTo(0, 1);
    expect(called).toBe(1);
  });
});
