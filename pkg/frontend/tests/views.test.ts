// @vitest-environment jsdom
import { describe, expect, it } from "vitest";

import { ApiClient, ExerciseInstance } from "../src/api.js";
import { McqView, ShortAnswerView, TraceMaskView } from "../src/views.js";

interface Call {
  url: string;
  init?: RequestInit;
}

function clientWith(
  responses: (call: Call) => { status: number; body: unknown },
): { client: ApiClient; calls: Call[] } {
  const calls: Call[] = [];
  const fetchFn = async (url: string, init?: RequestInit) => {
    const call = { url, init };
    calls.push(call);
    const { status, body } = responses(call);
    return new Response(JSON.stringify(body), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { client: new ApiClient("http://svc", fetchFn), calls };
}

function failingClient(): { client: ApiClient; calls: Call[] } {
  const calls: Call[] = [];
  const fetchFn = async (url: string, init?: RequestInit) => {
    calls.push({ url, init });
    throw new TypeError("network down");
  };
  return { client: new ApiClient("http://svc", fetchFn), calls };
}

const MCQ: ExerciseInstance = {
  id: "q1",
  type: "mcq",
  prompt: "pick",
  attempt: 0,
  answers: ["alpha", "beta", "gamma"],
};

const SHORT: ExerciseInstance = {
  id: "q2",
  type: "short",
  prompt: "stuff it",
  attempt: 0,
};

const MASK: ExerciseInstance = {
  id: "q3",
  type: "trace_mask",
  prompt: "predict",
  attempt: 0,
  masked_paths: ["tcp.seq"],
  hex: "0000  01 02 ?? ??              |....|",
  fields: [
    { path: "tcp.srcport", display: "80", masked: false,
      byte_offset: 0, bit_offset: 0, bit_width: 16 },
    { path: "tcp.seq", display: "????", masked: true,
      byte_offset: 2, bit_offset: 0, bit_width: 16 },
  ],
};

describe("McqView", () => {
  it("shows the server comment inline under the chosen answer", async () => {
    const { client, calls } = clientWith(() => ({
      status: 200,
      body: {
        attempt: 0, correct: false, score: 0,
        feedback: [{ target: "answer:1", comment: "nope, think again" }],
      },
    }));
    const view = new McqView(client, "sess", MCQ, document);
    document.body.appendChild(view.mount());
    const buttons = view.root.querySelectorAll<HTMLButtonElement>(".choice-btn");
    buttons[1].click();
    await new Promise((r) => setTimeout(r, 0));
    expect(calls).toHaveLength(1);
    expect(JSON.parse(String(calls[0].init?.body)).answer).toBe(1);
    const feedback = view.root.querySelector(".feedback");
    expect(feedback?.textContent).toContain("nope, think again");
    expect(feedback?.classList.contains("wrong")).toBe(true);
    // comment sits inside the chosen answer's block
    expect(buttons[1].parentElement?.querySelector(".feedback")).toBe(feedback);
  });

  it("keeps state and offers retry on network failure", async () => {
    const { client, calls } = failingClient();
    const view = new McqView(client, "sess", MCQ, document);
    document.body.appendChild(view.mount());
    view.root.querySelectorAll<HTMLButtonElement>(".choice-btn")[2].click();
    await new Promise((r) => setTimeout(r, 0));
    expect(calls).toHaveLength(1);
    const banner = view.root.querySelector(".banner");
    expect(banner?.textContent).toContain("network");
    expect(banner?.querySelector(".retry")).toBeTruthy();
    // the answers are still there, nothing was cleared
    expect(view.root.querySelectorAll(".choice-btn")).toHaveLength(3);
    (banner?.querySelector(".retry") as HTMLButtonElement).click();
    await new Promise((r) => setTimeout(r, 0));
    expect(calls).toHaveLength(2); // retry resubmits the same answer
  });
});

describe("ShortAnswerView", () => {
  it("does not send empty submissions", async () => {
    const { client, calls } = clientWith(() => ({ status: 200, body: {} }));
    const view = new ShortAnswerView(client, "sess", SHORT, document);
    document.body.appendChild(view.mount());
    view.root.querySelector("form")?.dispatchEvent(
      new Event("submit", { bubbles: true, cancelable: true }),
    );
    await new Promise((r) => setTimeout(r, 0));
    expect(calls).toHaveLength(0);
    expect(view.root.querySelector(".banner")?.textContent).toContain(
      "type an answer",
    );
  });

  it("groups hex with the helper and submits the text", async () => {
    const { client, calls } = clientWith(() => ({
      status: 200,
      body: { attempt: 0, correct: true, score: 1, feedback: [] },
    }));
    const view = new ShortAnswerView(client, "sess", SHORT, document);
    document.body.appendChild(view.mount());
    const input = view.root.querySelector<HTMLInputElement>(".short-input")!;
    input.value = "7e127e";
    (view.root.querySelector(".hex-helper") as HTMLButtonElement).click();
    expect(input.value).toBe("7e 12 7e");
    view.root.querySelector("form")?.dispatchEvent(
      new Event("submit", { bubbles: true, cancelable: true }),
    );
    await new Promise((r) => setTimeout(r, 0));
    expect(JSON.parse(String(calls[0].init?.body)).answer).toBe("7e 12 7e");
    expect(view.root.querySelector(".feedback.ok")).toBeTruthy();
  });
});

describe("TraceMaskView", () => {
  it("renders inputs for masked fields only and colors verdicts", async () => {
    const { client } = clientWith(() => ({
      status: 200,
      body: {
        attempt: 0, correct: false, score: 0,
        feedback: [{ target: "tcp.seq", comment: "look at the next packet" }],
      },
    }));
    const view = new TraceMaskView(client, "sess", MASK, document);
    document.body.appendChild(view.mount());
    const inputs = view.root.querySelectorAll(".field-input");
    expect(inputs).toHaveLength(1);
    (inputs[0] as HTMLInputElement).value = "1234";
    (view.root.querySelector("button.submit") as HTMLButtonElement).click();
    await new Promise((r) => setTimeout(r, 0));
    expect(inputs[0].classList.contains("field-wrong")).toBe(true);
    expect(view.root.textContent).toContain("look at the next packet");
  });

  it("hovering a field highlights its bytes in the hex pane", () => {
    const { client } = clientWith(() => ({ status: 200, body: {} }));
    const view = new TraceMaskView(client, "sess", MASK, document);
    document.body.appendChild(view.mount());
    const row = view.root.querySelector<HTMLElement>(
      '.field-row[data-path="tcp.seq"]',
    )!;
    row.dispatchEvent(new Event("mouseenter"));
    const lit = [...view.root.querySelectorAll(".byte.hl")].map(
      (el) => (el as HTMLElement).dataset.offset,
    );
    expect(lit).toEqual(["2", "3"]);
    row.dispatchEvent(new Event("mouseleave"));
    expect(view.root.querySelectorAll(".byte.hl")).toHaveLength(0);
  });
});
