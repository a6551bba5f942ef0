/**
 * Labeling session state shared by all three pages.
 *
 * Label writes are optimistic: the local cache changes first, the POST runs
 * in the background, and the server's tally reconciles the cache (a mismatch
 * triggers a full refetch, a failure reverts the write). Single operator
 * assumed; the server stays authoritative.
 */

import { ApiClient, Label, Tally } from "./api.js";

export interface SessionOptions {
  /** At the last member, Next wraps to 0 when true, disables when false. */
  wrapAtEnd?: boolean;
}

export type JumpResult = { ok: true } | { ok: false; message: string };

export interface ScaleBounds {
  min: number;
  max: number;
}

function countLabels(labels: Label[]): Tally {
  const counts = { "0": 0, "1": 0, "2": 0 };
  for (const lab of labels) counts[String(lab) as keyof Tally] += 1;
  return counts;
}

function talliesEqual(a: Tally, b: Tally): boolean {
  return a["0"] === b["0"] && a["1"] === b["1"] && a["2"] === b["2"];
}

export class UiSession {
  index = 0;
  readonly wrapAtEnd: boolean;
  private scaleBounds: ScaleBounds | null = null;

  private constructor(
    private api: ApiClient,
    readonly n: number,
    readonly waveId: number,
    readonly gridShape: number[] | null,
    private labelCache: Label[],
    options: SessionOptions,
  ) {
    this.wrapAtEnd = options.wrapAtEnd ?? false;
  }

  static async connect(api: ApiClient,
                       options: SessionOptions = {}): Promise<UiSession> {
    const meta = await api.meta();
    const table = await api.classification();
    return new UiSession(api, meta.n, meta.wave_id, meta.grid_shape,
      table.labels as Label[], options);
  }

  labels(): readonly Label[] {
    return this.labelCache;
  }

  label(index: number): Label {
    return this.labelCache[index];
  }

  tally(): Tally {
    return countLabels(this.labelCache);
  }

  /**
   * Optimistically record a label, post it, reconcile against the server's
   * tally. Reverts and rethrows when the post fails.
   */
  async setLabel(index: number, label: Label): Promise<void> {
    if (label !== 0 && label !== 1 && label !== 2) {
      throw new Error(`label must be 0, 1 or 2, got ${label}`);
    }
    if (index < 0 || index >= this.n) {
      throw new Error(`no member with index ${index}`);
    }
    const previous = this.labelCache[index];
    this.labelCache[index] = label;
    try {
      const res = await this.api.label(index, label);
      if (!talliesEqual(res.tally, this.tally())) {
        await this.reload();
      }
    } catch (err) {
      this.labelCache[index] = previous;
      throw err;
    }
  }

  async accept(): Promise<void> {
    await this.setLabel(this.index, 1);
    this.advance();
  }

  async reject(): Promise<void> {
    await this.setLabel(this.index, 2);
    this.advance();
  }

  canNext(): boolean {
    return this.wrapAtEnd || this.index < this.n - 1;
  }

  /** Move to the next member; at the end, wrap or stay per the option. */
  advance(): boolean {
    if (this.index < this.n - 1) {
      this.index += 1;
      return true;
    }
    if (this.wrapAtEnd) {
      this.index = 0;
      return true;
    }
    return false;
  }

  back(): boolean {
    if (this.index === 0) return false;
    this.index -= 1;
    return true;
  }

  jump(target: number): JumpResult {
    if (!Number.isInteger(target) || target < 0 || target >= this.n) {
      return {
        ok: false,
        message: `index must be a whole number between 0 and ${this.n - 1}`,
      };
    }
    this.index = target;
    return { ok: true };
  }

  async save(): Promise<string> {
    const res = await this.api.save();
    return res.path;
  }

  /** Replace the cache with the server's table. */
  async reload(): Promise<void> {
    const table = await this.api.classification();
    this.labelCache = table.labels as Label[];
  }

  /**
   * Global color bounds over the observation and every member, fetched once
   * and reused by every page.
   */
  async ensureScaleBounds(): Promise<ScaleBounds> {
    if (this.scaleBounds) return this.scaleBounds;
    const fields: number[][] = [(await this.api.observation()).values];
    for (let i = 0; i < this.n; i++) {
      fields.push((await this.api.member(i)).values);
    }
    let min = Infinity;
    let max = -Infinity;
    for (const field of fields) {
      for (const v of field) {
        if (v < min) min = v;
        if (v > max) max = v;
      }
    }
    this.scaleBounds = { min, max };
    return this.scaleBounds;
  }
}
