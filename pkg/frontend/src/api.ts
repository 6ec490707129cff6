// Typed client for the exercise service. All grading happens server-side;
// this client only carries opaque instances and verdicts.

export type ExerciseType = "mcq" | "short" | "trace_mask" | "trace_reorder";

export interface SessionInfo {
  session_id: string;
  seed: number;
}

export interface ExerciseSummary {
  id: string;
  type: ExerciseType;
  prompt: string;
}

export interface FieldInfo {
  path: string;
  display: string;
  masked: boolean;
  byte_offset: number;
  bit_offset: number;
  bit_width: number;
}

export interface ExerciseInstance {
  id: string;
  type: ExerciseType;
  prompt: string;
  attempt: number;
  answers?: string[]; // mcq
  masked_paths?: string[]; // trace_mask
  fields?: FieldInfo[];
  hex?: string;
  items?: string[]; // trace_reorder
}

export interface Feedback {
  target: string;
  comment: string;
}

export interface Verdict {
  attempt: number;
  correct: boolean;
  score: number;
  feedback: Feedback[];
}

export type Submission = number | string | number[] | Record<string, string>;

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const resp = await this.fetchFn(this.baseUrl + path, init);
    const data = await resp.json();
    if (!resp.ok) {
      throw new ApiError(
        data.status ?? resp.status,
        data.code ?? "error",
        data.message ?? resp.statusText,
      );
    }
    return data as T;
  }

  createSession(seed?: number): Promise<SessionInfo> {
    return this.request("POST", "/api/sessions", seed === undefined ? {} : { seed });
  }

  listExercises(): Promise<ExerciseSummary[]> {
    return this.request("GET", "/api/exercises");
  }

  getExercise(id: string, session: string): Promise<ExerciseInstance> {
    return this.request(
      "GET",
      `/api/exercises/${encodeURIComponent(id)}?session=${encodeURIComponent(session)}`,
    );
  }

  submitAnswer(
    id: string,
    session: string,
    answer: Submission,
  ): Promise<Verdict> {
    return this.request(
      "POST",
      `/api/exercises/${encodeURIComponent(id)}/answer?session=${encodeURIComponent(session)}`,
      { answer },
    );
  }
}
