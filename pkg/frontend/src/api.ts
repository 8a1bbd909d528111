/** Typed client for the cfaug annotation service. */

export interface ItemPayload {
  item_id: string;
  original_text: string;
  counterfactual_text: string;
  type: string;
  origin_label: number;
}

export type NextResponse =
  | { status: "ok"; item: ItemPayload }
  | { status: "exhausted" }
  | { status: "empty" }
  | { status: "closed" };

export interface Ack {
  remaining_budget: number;
  next_available: boolean;
}

export interface Progress {
  labeled: number;
  budget: number;
  state: string;
}

export class ApiError extends Error {
  constructor(
    public code: string,
    message: string,
    public status: number,
  ) {
    super(message);
  }
}

const PAYLOAD_KEYS = new Set([
  "item_id",
  "original_text",
  "counterfactual_text",
  "type",
  "origin_label",
]);

/** The service must never leak labels beyond the origin's; reject any
 * payload carrying unexpected fields (e.g. an oracle label). */
export function validatePayload(item: Record<string, unknown>): ItemPayload {
  for (const key of Object.keys(item)) {
    if (!PAYLOAD_KEYS.has(key)) {
      throw new ApiError("unexpected_field", `payload carries unexpected field '${key}'`, 0);
    }
  }
  for (const key of PAYLOAD_KEYS) {
    if (!(key in item)) {
      throw new ApiError("missing_field", `payload missing '${key}'`, 0);
    }
  }
  return item as unknown as ItemPayload;
}

export class AnnotationClient {
  constructor(
    private baseUrl: string,
    private fetchFn: typeof fetch = fetch,
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let code = "http_error";
      let message = `${response.status}`;
      try {
        const body = (await response.json()) as { code?: string; message?: string };
        code = body.code ?? code;
        message = body.message ?? message;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(code, message, response.status);
    }
    return response;
  }

  async next(sessionId: string): Promise<NextResponse> {
    const response = await this.request(`/sessions/${sessionId}/next`);
    const body = (await response.json()) as NextResponse;
    if (body.status === "ok") {
      validatePayload(body.item as unknown as Record<string, unknown>);
    }
    return body;
  }

  async submit(sessionId: string, itemId: string, label: 0 | 1): Promise<Ack> {
    const response = await this.request(`/sessions/${sessionId}/labels`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ item_id: itemId, label }),
    });
    return (await response.json()) as Ack;
  }

  async progress(sessionId: string): Promise<Progress> {
    const response = await this.request(`/sessions/${sessionId}/progress`);
    return (await response.json()) as Progress;
  }

  async exportSession(sessionId: string): Promise<string> {
    const response = await this.request(`/sessions/${sessionId}/export`);
    return await response.text();
  }

  exportUrl(sessionId: string): string {
    return `${this.baseUrl}/sessions/${sessionId}/export`;
  }
}
