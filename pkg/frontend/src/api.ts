// Typed client over the survey endpoints.

import type { AssignmentPayload, Choice, SubmitResult } from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    public detail: string,
  ) {
    super(`${code} (${status}): ${detail}`);
  }
}

export class AuthExpired extends ApiError {
  constructor(detail: string) {
    super(401, "AuthExpired", detail);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function parseError(response: Response): Promise<ApiError> {
  let code = "HTTPError";
  let detail = "";
  try {
    const body = await response.json();
    code = body.error ?? body.detail?.error ?? code;
    detail = typeof body.detail === "string" ? body.detail : JSON.stringify(body);
  } catch {
    detail = await response.text().catch(() => "");
  }
  if (response.status === 401) return new AuthExpired(detail);
  return new ApiError(response.status, code, detail);
}

export class SurveyApi {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init: RequestInit = {}): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  register(subjectId?: string): Promise<{ subject_id: string; token: string }> {
    return this.request("/api/subjects", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ subject_id: subjectId ?? null }),
    });
  }

  nextAssignment(token: string): Promise<AssignmentPayload> {
    return this.request("/api/assignments/next", {
      headers: { Authorization: `Bearer ${token}` },
    });
  }

  submit(
    token: string,
    assignmentId: string,
    verdicts: Record<string, Choice>,
  ): Promise<SubmitResult> {
    return this.request("/api/judgments", {
      method: "POST",
      headers: {
        "Content-Type": "application/json",
        Authorization: `Bearer ${token}`,
      },
      body: JSON.stringify({ assignment_id: assignmentId, verdicts }),
    });
  }
}
