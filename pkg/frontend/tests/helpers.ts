/**
 * Test fixtures: tiny PPM builders and a stateful in-memory mock of the
 * session HTTP API, installed as global fetch.
 */

import { DetailPayload, OverviewCellPayload, SpmapPayload } from "../src/api";
import { blackOutPixels, decodePpmBase64, encodePpmBase64 } from "../src/ppm";

export function solidPpm(width: number, height: number, rgb: [number, number, number]): string {
  const bytes = new Uint8Array(width * height * 3);
  for (let p = 0; p < width * height; p++) {
    bytes[p * 3] = rgb[0];
    bytes[p * 3 + 1] = rgb[1];
    bytes[p * 3 + 2] = rgb[2];
  }
  return encodePpmBase64(width, height, bytes);
}

/** 4x4 image split into left/right segments with distinct colors. */
export function halfSplitFixture(): { ppm: string; spmap: SpmapPayload } {
  const width = 4;
  const height = 4;
  const bytes = new Uint8Array(width * height * 3);
  const labels: number[] = [];
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const p = y * width + x;
      const left = x < 2;
      labels.push(left ? 0 : 1);
      bytes[p * 3] = left ? 200 : 40;
      bytes[p * 3 + 1] = left ? 60 : 180;
      bytes[p * 3 + 2] = 90;
    }
  }
  return {
    ppm: encodePpmBase64(width, height, bytes),
    spmap: { width, height, labels, num_segments: 2 },
  };
}

export interface MockOptions {
  categories?: string[];
  cellCount?: number;
  incorrectIds?: number[];
  /** data coordinates per image id; defaults to a 10x10 lattice */
  coords?: Array<[number, number]>;
  detailProbs?: { original: number[]; hidden0: number[]; hidden1: number[]; hiddenBoth: number[] };
  classNames?: string[];
}

/** Stateful fake of the engine API: toggle vectors behave like the server. */
export class MockServer {
  readonly requests: Array<{ url: string; body?: unknown }> = [];
  private toggles = new Map<number, number[]>();
  private fixture = halfSplitFixture();
  private options: Required<MockOptions>;

  constructor(options: MockOptions = {}) {
    this.options = {
      categories: options.categories ?? ["dog", "cat"],
      cellCount: options.cellCount ?? 100,
      incorrectIds: options.incorrectIds ?? [],
      coords:
        options.coords ??
        Array.from({ length: options.cellCount ?? 100 }, (_, i) => [i % 10, Math.floor(i / 10)] as [number, number]),
      detailProbs:
        options.detailProbs ??
        {
          original: [0.7, 0.3],
          hidden0: [0.4, 0.6],
          hidden1: [0.55, 0.45],
          hiddenBoth: [0.5, 0.5],
        },
      classNames: options.classNames ?? ["dog", "cat"],
    };
  }

  install(): void {
    globalThis.fetch = ((url: string, init?: RequestInit) => this.dispatch(String(url), init)) as typeof fetch;
  }

  private json(body: unknown, status = 200): Promise<Response> {
    return Promise.resolve(
      new Response(JSON.stringify(body), {
        status,
        headers: { "Content-Type": "application/json" },
      }),
    );
  }

  private cells(withImages: boolean): OverviewCellPayload[] {
    const incorrect = new Set(this.options.incorrectIds);
    return Array.from({ length: this.options.cellCount }, (_, i) => ({
      image_id: i,
      row: Math.floor(i / 10),
      col: i % 10,
      correct: !incorrect.has(i),
      ...(withImages ? { ppm_b64: this.fixture.ppm } : {}),
    }));
  }

  private toggleVector(imageId: number): number[] {
    let vector = this.toggles.get(imageId);
    if (!vector) {
      vector = new Array(this.fixture.spmap.num_segments).fill(1);
      this.toggles.set(imageId, vector);
    }
    return vector;
  }

  private probsFor(vector: number[]): number[] {
    const p = this.options.detailProbs;
    if (vector[0] === 1 && vector[1] === 1) return p.original;
    if (vector[0] === 0 && vector[1] === 1) return p.hidden0;
    if (vector[0] === 1 && vector[1] === 0) return p.hidden1;
    return p.hiddenBoth;
  }

  private maskedPpm(vector: number[]): string {
    if (vector.every((t) => t === 1)) return this.fixture.ppm;
    const decoded = decodePpmBase64(this.fixture.ppm);
    const hidden: number[] = [];
    this.fixture.spmap.labels.forEach((label, pixel) => {
      if (vector[label] === 0) hidden.push(pixel);
    });
    return encodePpmBase64(decoded.width, decoded.height, blackOutPixels(decoded, hidden));
  }

  private detail(imageId: number): DetailPayload {
    const vector = this.toggleVector(imageId);
    return {
      image_id: imageId,
      original: { ppm_b64: this.fixture.ppm },
      lime: { ppm_b64: this.fixture.ppm },
      boundary_overlay: { ppm_b64: this.fixture.ppm },
      spmap: this.fixture.spmap,
      original_probs: this.options.detailProbs.original,
      class_names: this.options.classNames,
      toggle: [...vector],
      current_probs: this.probsFor(vector),
    };
  }

  private async dispatch(url: string, init?: RequestInit): Promise<Response> {
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    this.requests.push({ url, body });

    if (url.endsWith("/api/categories")) {
      return this.json({ categories: this.options.categories });
    }
    if (url.endsWith("/api/execute")) {
      this.toggles.clear();
      return this.json({ session_id: 1, cells: this.cells(false) });
    }
    if (url.includes("/api/overview")) {
      return this.json({ cells: this.cells(true) });
    }
    if (url.endsWith("/api/embedding")) {
      return this.json({
        points: this.options.coords.map(([x, y], i) => ({
          image_id: i,
          x,
          y,
          correct: !this.options.incorrectIds.includes(i),
        })),
      });
    }
    const detailMatch = url.match(/\/api\/image\/(\d+)\/detail$/);
    if (detailMatch) {
      return this.json(this.detail(Number(detailMatch[1])));
    }
    const toggleMatch = url.match(/\/api\/image\/(\d+)\/toggle$/);
    if (toggleMatch) {
      const imageId = Number(toggleMatch[1]);
      const vector = this.toggleVector(imageId);
      let superpixelId: number;
      if (body && typeof body.superpixel_id === "number") {
        superpixelId = body.superpixel_id;
      } else {
        const { x, y } = body as { x: number; y: number };
        superpixelId = this.fixture.spmap.labels[y * this.fixture.spmap.width + x];
      }
      vector[superpixelId] ^= 1;
      return this.json({
        superpixel_id: superpixelId,
        toggle: [...vector],
        ppm_b64: this.maskedPpm(vector),
        current_probs: this.probsFor(vector),
      });
    }
    const resetMatch = url.match(/\/api\/image\/(\d+)\/reset$/);
    if (resetMatch) {
      const imageId = Number(resetMatch[1]);
      const vector = this.toggleVector(imageId).map(() => 1);
      this.toggles.set(imageId, vector);
      return this.json({ toggle: [...vector], current_probs: this.probsFor(vector) });
    }
    return this.json({ error_code: "not_found", message: url }, 404);
  }
}
