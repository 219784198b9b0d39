/** Typed client for the training service REST API.
 *
 * All color math stays server-side; swatches arrive pre-converted as both
 * Lab triples and sRGB hex. The fetch implementation is injectable so the
 * UI logic can be exercised against a stub service.
 */

import type { Rect } from "./geometry.js";

export interface SwatchDto {
  index: number;
  lab: [number, number, number];
  srgb_hex: string;
  count: number;
  radius: number;
}

export interface ClusterResponse {
  pending_id: string;
  seed: number;
  k: number;
  centroids: SwatchDto[];
}

export interface ClassSummary {
  label: string;
  centroids: number;
}

export interface ModelSummary {
  classes: ClassSummary[];
  total_centroids: number;
  warnings: string[];
}

export interface PlanePreview {
  label: string;
  count: number;
  png: string; // base64 PNG thumbnail
}

export interface PreviewResponse {
  width: number;
  height: number;
  scale: number;
  histogram: Record<string, number>;
  unknown_fraction: number;
  flagged: boolean;
  legend: string[];
  label_map_png: string; // base64 single-channel PNG, 255 = UNKNOWN
  planes: PlanePreview[];
}

export interface UploadResponse {
  document_id: string;
  width: number;
  height: number;
}

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly details?: unknown,
  ) {
    super(message);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function parseError(res: Response): Promise<ServiceError> {
  let code = "http_error";
  let message = `${res.status} ${res.statusText}`;
  let details: unknown;
  try {
    const body = (await res.json()) as { code?: string; message?: string; details?: unknown };
    if (body.code) code = body.code;
    if (body.message) message = body.message;
    details = body.details;
  } catch {
    // non-JSON error body; keep the status line
  }
  return new ServiceError(res.status, code, message, details);
}

export class ServiceClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async requestJson<T>(url: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchImpl(this.baseUrl + url, init);
    if (!res.ok) {
      throw await parseError(res);
    }
    return (await res.json()) as T;
  }

  async createSession(): Promise<string> {
    const body = await this.requestJson<{ session_id: string }>("/sessions", { method: "POST" });
    return body.session_id;
  }

  async uploadDocument(sid: string, data: ArrayBuffer | Uint8Array): Promise<UploadResponse> {
    return this.requestJson<UploadResponse>(`/sessions/${sid}/documents`, {
      method: "POST",
      body: data as BodyInit,
      headers: { "Content-Type": "application/octet-stream" },
    });
  }

  documentImageUrl(sid: string, did: string): string {
    return `${this.baseUrl}/sessions/${sid}/documents/${did}/image`;
  }

  /** Issues the cluster request with the exact integer rect and declared k. */
  async clusterWindow(
    sid: string,
    did: string,
    rect: Rect,
    k: number,
    seed?: number,
  ): Promise<ClusterResponse> {
    const payload: { rect: Rect; k: number; seed?: number } = { rect, k };
    if (seed !== undefined) payload.seed = seed;
    return this.requestJson<ClusterResponse>(`/sessions/${sid}/documents/${did}/cluster`, {
      method: "POST",
      body: JSON.stringify(payload),
      headers: { "Content-Type": "application/json" },
    });
  }

  async commitLabels(
    sid: string,
    pendingId: string,
    assignments: Record<string, string>,
  ): Promise<ModelSummary> {
    return this.requestJson<ModelSummary>(`/sessions/${sid}/pending/${pendingId}/labels`, {
      method: "POST",
      body: JSON.stringify({ assignments }),
      headers: { "Content-Type": "application/json" },
    });
  }

  async preview(sid: string, did: string, full = false): Promise<PreviewResponse> {
    const suffix = full ? "?full=true" : "";
    return this.requestJson<PreviewResponse>(`/sessions/${sid}/preview/${did}${suffix}`);
  }

  async getModelBytes(sid: string): Promise<Blob> {
    const res = await this.fetchImpl(`${this.baseUrl}/sessions/${sid}/model`);
    if (!res.ok) throw await parseError(res);
    return res.blob();
  }

  async putModel(sid: string, data: ArrayBuffer | Uint8Array | string): Promise<ModelSummary> {
    return this.requestJson<ModelSummary>(`/sessions/${sid}/model`, {
      method: "PUT",
      body: data as BodyInit,
      headers: { "Content-Type": "application/json" },
    });
  }
}
