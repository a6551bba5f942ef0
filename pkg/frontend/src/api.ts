/**
 * Typed client for the classification service. All endpoints live under
 * /api; payload shapes mirror the service responses exactly.
 */

export type Label = 0 | 1 | 2;

export interface Meta {
  n: number;
  grid_shape: number[] | null;
  wave_id: number;
}

export interface Member {
  index: number;
  values: number[];
  label: number;
}

export interface Tally {
  "0": number;
  "1": number;
  "2": number;
}

export interface ClassificationTable {
  n: number;
  labels: number[];
  tally: Tally;
  wave_id: number;
}

export interface LabelResponse {
  index: number;
  label: number;
  tally: Tally;
}

export interface ApiClient {
  meta(): Promise<Meta>;
  member(index: number): Promise<Member>;
  observation(): Promise<{ values: number[] }>;
  classification(): Promise<ClassificationTable>;
  label(index: number, label: Label): Promise<LabelResponse>;
  save(): Promise<{ path: string }>;
}

/** Failed request; `detail` carries the server's reason verbatim. */
export class ApiError extends Error {
  constructor(readonly status: number, readonly detail: string) {
    super(`${status}: ${detail}`);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const res = await fetch(url, init);
  if (!res.ok) {
    let detail = res.statusText;
    try {
      const body = await res.json();
      if (typeof body.detail === "string") detail = body.detail;
      else if (body.detail !== undefined) detail = JSON.stringify(body.detail);
    } catch {
      // keep the status text
    }
    throw new ApiError(res.status, detail);
  }
  return res.json() as Promise<T>;
}

export class HttpApi implements ApiClient {
  constructor(private base: string = "") {}

  meta(): Promise<Meta> {
    return request(`${this.base}/api/meta`);
  }

  member(index: number): Promise<Member> {
    return request(`${this.base}/api/member/${index}`);
  }

  observation(): Promise<{ values: number[] }> {
    return request(`${this.base}/api/observation`);
  }

  classification(): Promise<ClassificationTable> {
    return request(`${this.base}/api/classification`);
  }

  label(index: number, label: Label): Promise<LabelResponse> {
    return request(`${this.base}/api/label`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ index, label }),
    });
  }

  save(): Promise<{ path: string }> {
    return request(`${this.base}/api/save`, { method: "POST" });
  }
}
