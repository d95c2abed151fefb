/**
 * Typed client for the session HTTP API.
 *
 * Every mutation in the app goes through these POST endpoints; views never
 * change engine state any other way.
 */

export interface OverviewCellPayload {
  image_id: number;
  row: number;
  col: number;
  correct: boolean;
  ppm_b64?: string;
}

export interface EmbeddingPoint {
  image_id: number;
  x: number;
  y: number;
  correct: boolean;
}

export interface SpmapPayload {
  width: number;
  height: number;
  labels: number[];
  num_segments: number;
}

export interface DetailPayload {
  image_id: number;
  original: { ppm_b64: string };
  lime: { ppm_b64: string };
  boundary_overlay: { ppm_b64: string };
  spmap: SpmapPayload;
  original_probs: number[];
  class_names: string[];
  toggle: number[];
  current_probs: number[];
}

export interface ToggleResponse {
  superpixel_id: number;
  toggle: number[];
  ppm_b64: string;
  current_probs: number[];
}

export interface ResetResponse {
  toggle: number[];
  current_probs: number[];
}

export interface ExecuteResponse {
  session_id: number;
  cells: OverviewCellPayload[];
}

export interface ExecuteConfig {
  segmentation: { algorithm: string };
  positive_only: boolean;
  num_features: number;
  hide_rest: boolean;
  [key: string]: unknown;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public errorCode: string,
    message: string,
  ) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, init);
  if (!response.ok) {
    let code = "http_error";
    let message = `${response.status}`;
    try {
      const body = await response.json();
      code = body.error_code ?? code;
      message = body.message ?? message;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, code, message);
  }
  return (await response.json()) as T;
}

export class ApiClient {
  constructor(private base: string = "") {}

  categories(): Promise<{ categories: string[] }> {
    return request(`${this.base}/api/categories`);
  }

  execute(category: string | number, config: ExecuteConfig): Promise<ExecuteResponse> {
    return request(`${this.base}/api/execute`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ category, config }),
    });
  }

  overview(mode: "original" | "lime"): Promise<{ cells: OverviewCellPayload[] }> {
    return request(`${this.base}/api/overview?mode=${mode}`);
  }

  embedding(): Promise<{ points: EmbeddingPoint[] }> {
    return request(`${this.base}/api/embedding`);
  }

  detail(imageId: number): Promise<DetailPayload> {
    return request(`${this.base}/api/image/${imageId}/detail`);
  }

  toggle(imageId: number, body: { x: number; y: number } | { superpixel_id: number }): Promise<ToggleResponse> {
    return request(`${this.base}/api/image/${imageId}/toggle`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  reset(imageId: number): Promise<ResetResponse> {
    return request(`${this.base}/api/image/${imageId}/reset`, { method: "POST" });
  }
}
