import {
  ApiClient,
  ApiError,
  ExerciseInstance,
  FieldInfo,
  Submission,
  Verdict,
} from "./api.js";
import { fieldByteOffsets, groupHexInput } from "./hex.js";
import { HexPane } from "./hexpane.js";
import { ReorderBoard } from "./reorder.js";

// Shared mechanics for all exercise views: one in-flight submission at a
// time, verdicts rendered verbatim from the server, and a retry banner on
// network failure that leaves the student's answer untouched.
export abstract class ExerciseView {
  readonly root: HTMLElement;
  protected doc: Document;
  protected pending = false;
  private built = false;
  lastVerdict: Verdict | null = null;
  onAnswered: ((verdict: Verdict) => void) | null = null;

  constructor(
    protected client: ApiClient,
    protected session: string,
    protected instance: ExerciseInstance,
    doc?: Document,
  ) {
    this.doc = doc ?? document;
    this.root = this.doc.createElement("section");
    this.root.className = `exercise exercise-${instance.type}`;
    const prompt = this.doc.createElement("p");
    prompt.className = "prompt";
    prompt.textContent = instance.prompt;
    this.root.appendChild(prompt);
  }

  // build() must not run from the constructor: subclass field definitions
  // land after super() and would wipe whatever build() assigned
  mount(): HTMLElement {
    if (!this.built) {
      this.built = true;
      this.build();
    }
    return this.root;
  }

  protected abstract build(): void;

  protected async submit(answer: Submission): Promise<void> {
    if (this.pending) return;
    this.pending = true;
    this.setBanner(null);
    this.root
      .querySelectorAll("button.submit")
      .forEach((b) => ((b as HTMLButtonElement).disabled = true));
    try {
      const verdict = await this.client.submitAnswer(
        this.instance.id,
        this.session,
        answer,
      );
      this.lastVerdict = verdict;
      this.showVerdict(verdict);
      this.onAnswered?.(verdict);
    } catch (err) {
      if (err instanceof ApiError) {
        this.setBanner(`${err.code}: ${err.message}`, false);
      } else {
        // network failure: keep the answer, offer a retry
        this.setBanner("network error, your answer was kept", true, () =>
          this.submit(answer),
        );
      }
    } finally {
      this.pending = false;
      this.root
        .querySelectorAll("button.submit")
        .forEach((b) => ((b as HTMLButtonElement).disabled = false));
    }
  }

  protected abstract showVerdict(verdict: Verdict): void;

  protected setBanner(
    message: string | null,
    retry = false,
    onRetry?: () => void,
  ): void {
    this.root.querySelector(".banner")?.remove();
    if (message === null) return;
    const banner = this.doc.createElement("div");
    banner.className = "banner";
    banner.textContent = message;
    if (retry && onRetry) {
      const button = this.doc.createElement("button");
      button.type = "button";
      button.className = "retry";
      button.textContent = "Retry";
      button.addEventListener("click", onRetry);
      banner.appendChild(button);
    }
    this.root.appendChild(banner);
  }

  protected feedbackEl(verdict: Verdict): HTMLElement {
    const box = this.doc.createElement("div");
    box.className = verdict.correct ? "feedback ok" : "feedback wrong";
    const headline = this.doc.createElement("p");
    headline.className = "verdict-line";
    headline.textContent = verdict.correct
      ? "Correct!"
      : `Not quite (score ${Math.round(verdict.score * 100)}%)`;
    box.appendChild(headline);
    for (const fb of verdict.feedback) {
      const p = this.doc.createElement("p");
      p.className = "comment";
      p.dataset.target = fb.target;
      p.textContent = fb.comment;
      box.appendChild(p);
    }
    return box;
  }
}

export class McqView extends ExerciseView {
  protected build(): void {
    const list = this.doc.createElement("div");
    list.className = "choices";
    (this.instance.answers ?? []).forEach((text, index) => {
      const wrap = this.doc.createElement("div");
      wrap.className = "choice";
      const button = this.doc.createElement("button");
      button.type = "button";
      button.className = "choice-btn submit";
      button.dataset.index = String(index);
      button.textContent = text;
      button.addEventListener("click", () => {
        this.chosen = wrap;
        void this.submit(index);
      });
      wrap.appendChild(button);
      list.appendChild(wrap);
    });
    this.root.appendChild(list);
  }

  private chosen: HTMLElement | null = null;

  protected showVerdict(verdict: Verdict): void {
    this.root
      .querySelectorAll(".choice .feedback")
      .forEach((el) => el.remove());
    (this.chosen ?? this.root).appendChild(this.feedbackEl(verdict));
    this.chosen
      ?.querySelector(".choice-btn")
      ?.classList.add(verdict.correct ? "chosen-ok" : "chosen-wrong");
  }
}

export class ShortAnswerView extends ExerciseView {
  private input!: HTMLInputElement;

  protected build(): void {
    const form = this.doc.createElement("form");
    form.className = "short-form";
    this.input = this.doc.createElement("input");
    this.input.type = "text";
    this.input.className = "short-input";
    const hexHelp = this.doc.createElement("button");
    hexHelp.type = "button";
    hexHelp.className = "hex-helper";
    hexHelp.title = "group as hex bytes";
    hexHelp.textContent = "0x";
    hexHelp.addEventListener("click", () => {
      this.input.value = groupHexInput(this.input.value);
    });
    const submit = this.doc.createElement("button");
    submit.type = "submit";
    submit.className = "submit";
    submit.textContent = "Check";
    form.append(this.input, hexHelp, submit);
    form.addEventListener("submit", (ev) => {
      ev.preventDefault();
      if (!this.input.value.trim()) {
        this.setBanner("type an answer first", false);
        return; // no request for an empty submission
      }
      void this.submit(this.input.value);
    });
    this.root.appendChild(form);
  }

  protected showVerdict(verdict: Verdict): void {
    this.root.querySelector(".feedback")?.remove();
    this.root.appendChild(this.feedbackEl(verdict));
  }
}

export class TraceMaskView extends ExerciseView {
  private inputs = new Map<string, HTMLInputElement>();
  private pane!: HexPane;

  protected build(): void {
    const layout = this.doc.createElement("div");
    layout.className = "trace-layout";
    this.pane = new HexPane(this.doc, this.instance.hex ?? "");
    layout.appendChild(this.pane.root);

    const tree = this.doc.createElement("div");
    tree.className = "field-tree";
    for (const field of this.instance.fields ?? []) {
      tree.appendChild(this.fieldRow(field));
    }
    layout.appendChild(tree);
    this.root.appendChild(layout);

    const submit = this.doc.createElement("button");
    submit.type = "button";
    submit.className = "submit";
    submit.textContent = "Check fields";
    submit.addEventListener("click", () => {
      const answers: Record<string, string> = {};
      for (const [path, input] of this.inputs) answers[path] = input.value;
      void this.submit(answers);
    });
    this.root.appendChild(submit);
  }

  private fieldRow(field: FieldInfo): HTMLElement {
    const row = this.doc.createElement("div");
    row.className = "field-row";
    row.dataset.path = field.path;
    const name = this.doc.createElement("span");
    name.className = "field-name";
    name.textContent = field.path;
    row.appendChild(name);
    if (field.masked) {
      const input = this.doc.createElement("input");
      input.type = "text";
      input.className = "field-input";
      input.placeholder = "????";
      this.inputs.set(field.path, input);
      row.appendChild(input);
    } else {
      const value = this.doc.createElement("span");
      value.className = "field-value";
      value.textContent = field.display;
      row.appendChild(value);
    }
    const offsets = fieldByteOffsets(field);
    row.addEventListener("mouseenter", () => this.pane.highlight(offsets));
    row.addEventListener("mouseleave", () => this.pane.clearHighlight());
    return row;
  }

  protected showVerdict(verdict: Verdict): void {
    this.root.querySelector(".feedback")?.remove();
    const wrongPaths = new Set(verdict.feedback.map((f) => f.target));
    for (const [path, input] of this.inputs) {
      input.classList.toggle("field-ok", !wrongPaths.has(path));
      input.classList.toggle("field-wrong", wrongPaths.has(path));
    }
    this.root.appendChild(this.feedbackEl(verdict));
  }
}

export class ReorderView extends ExerciseView {
  board!: ReorderBoard;

  protected build(): void {
    this.board = new ReorderBoard(this.doc, this.instance.items ?? []);
    this.root.appendChild(this.board.root);
    const submit = this.doc.createElement("button");
    submit.type = "button";
    submit.className = "submit";
    submit.textContent = "Check order";
    submit.addEventListener("click", () => {
      void this.submit(this.board.permutation());
    });
    this.root.appendChild(submit);
  }

  protected showVerdict(verdict: Verdict): void {
    this.root.querySelector(".feedback")?.remove();
    this.root.appendChild(this.feedbackEl(verdict));
  }
}

export function createView(
  client: ApiClient,
  session: string,
  instance: ExerciseInstance,
  doc?: Document,
): ExerciseView {
  let view: ExerciseView;
  switch (instance.type) {
    case "mcq":
      view = new McqView(client, session, instance, doc);
      break;
    case "short":
      view = new ShortAnswerView(client, session, instance, doc);
      break;
    case "trace_mask":
      view = new TraceMaskView(client, session, instance, doc);
      break;
    case "trace_reorder":
      view = new ReorderView(client, session, instance, doc);
      break;
  }
  view.mount();
  return view;
}
