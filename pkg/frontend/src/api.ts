/** Typed client for the segmentation service HTTP API.
 *
 * The studio never computes segmentation itself: every mask it shows is the
 * verbatim byte payload of a service response, and this client is the only
 * place requests are made.
 */

export type Point = [number, number];
export type Label = 0 | 1;

export interface Stroke {
  path: Point[];
  label: Label;
}

export interface SessionInfo {
  id: string;
  width: number;
  height: number;
}

export interface RegionInfo {
  id: number;
  centroid: [number, number];
  pixels: number;
}

export interface SuperpixelPayload {
  width: number;
  height: number;
  n_regions: number;
  polylines: Point[][];
  regions: RegionInfo[];
}

export interface TraceRow {
  iteration: number;
  changed_pixels: number;
  gamma: number;
  energy: number;
  n_seeds: number;
  n_obj_candidates: number;
  n_bkg_candidates: number;
}

export interface MaskResponse {
  /** Base64-encoded PNG, 255 = object. */
  mask: string;
  iterations: number;
  trace: TraceRow[];
}

export interface CandidatePayload {
  p_obj: number[];
  p_bkg: number[];
}

export interface SegmentOptions {
  config?: Record<string, unknown>;
  ncCut0?: boolean;
}

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(`service responded ${status}: ${detail}`);
  }
}

/** Decode base64 into bytes in both browser and node. */
export function decodeBase64(data: string): Uint8Array {
  const globals = globalThis as {
    atob?: (s: string) => string;
    Buffer?: { from(data: string, encoding: string): Iterable<number> };
  };
  if (typeof globals.atob === "function") {
    const binary = globals.atob(data);
    const out = new Uint8Array(binary.length);
    for (let i = 0; i < binary.length; i++) out[i] = binary.charCodeAt(i);
    return out;
  }
  if (globals.Buffer !== undefined) {
    return Uint8Array.from(globals.Buffer.from(data, "base64"));
  }
  throw new Error("no base64 decoder available");
}

async function errorDetail(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (typeof body.detail === "string") return body.detail;
  } catch {
    /* non-JSON error body */
  }
  return response.statusText || "request failed";
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      throw new ApiError(response.status, await errorDetail(response));
    }
    return response;
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.request(path, init);
    return (await response.json()) as T;
  }

  private async bytes(path: string): Promise<Uint8Array> {
    const response = await this.request(path);
    return new Uint8Array(await response.arrayBuffer());
  }

  /** Upload a PNG image; the body is the raw file bytes. */
  createSession(png: BlobPart): Promise<SessionInfo> {
    return this.json<SessionInfo>("/sessions", {
      method: "POST",
      headers: { "Content-Type": "image/png" },
      body: new Blob([png]),
    });
  }

  superpixels(id: string): Promise<SuperpixelPayload> {
    return this.json<SuperpixelPayload>(`/sessions/${id}/superpixels`);
  }

  segment(
    id: string,
    polygon: Point[],
    options: SegmentOptions = {},
  ): Promise<MaskResponse> {
    const payload: Record<string, unknown> = { polygon };
    if (options.config) payload.config = options.config;
    if (options.ncCut0) payload.nc_cut0 = true;
    return this.json<MaskResponse>(`/sessions/${id}/segment`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  edit(id: string, strokes: Stroke[]): Promise<MaskResponse> {
    return this.json<MaskResponse>(`/sessions/${id}/edit`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ strokes }),
    });
  }

  /** Raw PNG bytes of the committed mask (identical to the b64 payload). */
  maskPng(id: string): Promise<Uint8Array> {
    return this.bytes(`/sessions/${id}/mask`);
  }

  ncmapPng(id: string, kind: "truth" | "indeterminacy"): Promise<Uint8Array> {
    return this.bytes(`/sessions/${id}/ncmap?kind=${kind}`);
  }

  candidates(id: string): Promise<CandidatePayload> {
    return this.json<CandidatePayload>(`/sessions/${id}/candidates`);
  }

  async deleteSession(id: string): Promise<void> {
    await this.request(`/sessions/${id}`, { method: "DELETE" });
  }
}
