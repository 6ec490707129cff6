import { ApiClient, ExerciseSummary, Verdict } from "./api.js";
import { createView, ExerciseView } from "./views.js";

// Client-held view state: session token, current exercise and verdict.
// Never holds answer-key data; correctness only ever arrives in verdicts.
export interface ViewState {
  session: string | null;
  currentExercise: string | null;
  attempt: number;
  lastVerdict: Verdict | null;
}

const SESSION_KEY = "netedu-session";

export class App {
  state: ViewState = {
    session: null,
    currentExercise: null,
    attempt: 0,
    lastVerdict: null,
  };
  private view: ExerciseView | null = null;

  constructor(
    private client: ApiClient,
    private root: HTMLElement,
    private doc: Document = document,
  ) {}

  async start(): Promise<void> {
    this.state.session = await this.ensureSession();
    const nav = this.doc.createElement("nav");
    nav.className = "exercise-list";
    const main = this.doc.createElement("main");
    main.className = "exercise-pane";
    this.root.append(nav, main);
    let exercises: ExerciseSummary[];
    try {
      exercises = await this.client.listExercises();
    } catch {
      main.textContent = "cannot reach the exercise service";
      return;
    }
    for (const ex of exercises) {
      const link = this.doc.createElement("button");
      link.type = "button";
      link.className = "exercise-link";
      link.dataset.exercise = ex.id;
      link.textContent = `[${ex.type}] ${ex.id}`;
      link.addEventListener("click", () => void this.open(ex.id, main));
      nav.appendChild(link);
    }
    if (exercises.length) await this.open(exercises[0].id, main);
  }

  private async ensureSession(): Promise<string> {
    const saved = this.storage()?.getItem(SESSION_KEY);
    if (saved) {
      // reuse only if the service still knows it
      try {
        await this.client.getExercise("__probe__", saved);
      } catch (err) {
        const code = (err as { code?: string }).code;
        if (code === "exercise_not_found" || code === "session_required") {
          return saved; // session itself was accepted
        }
      }
    }
    const info = await this.client.createSession();
    this.storage()?.setItem(SESSION_KEY, info.session_id);
    return info.session_id;
  }

  private storage(): Storage | null {
    try {
      return this.doc.defaultView?.sessionStorage ?? null;
    } catch {
      return null;
    }
  }

  async open(id: string, container: HTMLElement): Promise<void> {
    if (!this.state.session) return;
    const instance = await this.client.getExercise(id, this.state.session);
    this.state.currentExercise = id;
    this.state.attempt = instance.attempt;
    this.state.lastVerdict = null;
    container.textContent = "";
    this.view = createView(this.client, this.state.session, instance, this.doc);
    this.view.onAnswered = (verdict) => {
      this.state.lastVerdict = verdict;
      this.addRetryButton(container, id);
    };
    container.appendChild(this.view.root);
  }

  private addRetryButton(container: HTMLElement, id: string): void {
    if (container.querySelector(".try-again")) return;
    const again = this.doc.createElement("button");
    again.type = "button";
    again.className = "try-again";
    again.textContent = "Try a fresh instance";
    again.addEventListener("click", () => void this.open(id, container));
    container.appendChild(again);
  }
}

export function boot(): void {
  const root = document.getElementById("app");
  if (!root) return;
  const app = new App(new ApiClient(""), root);
  void app.start();
}
