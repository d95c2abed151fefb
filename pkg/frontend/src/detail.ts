/**
 * Detail view: original / LIME / superpixel panels plus the live bar chart.
 *
 * The superpixel panel shows the current masked image with segment borders
 * composited in yellow on the client (the server's toggle responses carry
 * the bare masked image). Clicks map to image coordinates and are posted to
 * the toggle endpoint; the bar chart pairs the original prediction (orange)
 * with the current one (purple).
 */

import { DetailPayload, ResetResponse, SpmapPayload, ToggleResponse } from "./api";
import { paintPpmInto } from "./overview";
import { blackOutPixels, decodePpmBase64, encodePpmBase64 } from "./ppm";

const SVG_NS = "http://www.w3.org/2000/svg";
const CHART_HEIGHT = 120;
const BAR_WIDTH = 14;
export const BOUNDARY_RGBA: [number, number, number] = [255, 255, 0];

/** Pixel indices having a 4-neighbor with a different segment label. */
export function boundaryPixels(spmap: SpmapPayload): Set<number> {
  const { width, height, labels } = spmap;
  const boundary = new Set<number>();
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const here = labels[y * width + x];
      if (
        (x + 1 < width && labels[y * width + x + 1] !== here) ||
        (x > 0 && labels[y * width + x - 1] !== here) ||
        (y + 1 < height && labels[(y + 1) * width + x] !== here) ||
        (y > 0 && labels[(y - 1) * width + x] !== here)
      ) {
        boundary.add(y * width + x);
      }
    }
  }
  return boundary;
}

/** Map a click inside the element onto image pixel coordinates. */
export function clickToImageCoords(
  offsetX: number,
  offsetY: number,
  elementWidth: number,
  elementHeight: number,
  imageWidth: number,
  imageHeight: number,
): { x: number; y: number } {
  const x = Math.min(imageWidth - 1, Math.max(0, Math.floor((offsetX / elementWidth) * imageWidth)));
  const y = Math.min(imageHeight - 1, Math.max(0, Math.floor((offsetY / elementHeight) * imageHeight)));
  return { x, y };
}

function paintComposite(canvas: HTMLCanvasElement, ppmB64: string, boundary: Set<number>): void {
  canvas.dataset.ppm = ppmB64;
  const ctx = canvas.getContext && (canvas.getContext("2d") as CanvasRenderingContext2D | null);
  const decoded = decodePpmBase64(ppmB64);
  canvas.width = decoded.width;
  canvas.height = decoded.height;
  for (const p of boundary) {
    decoded.rgba[p * 4] = BOUNDARY_RGBA[0];
    decoded.rgba[p * 4 + 1] = BOUNDARY_RGBA[1];
    decoded.rgba[p * 4 + 2] = BOUNDARY_RGBA[2];
  }
  if (!ctx || typeof ctx.putImageData !== "function" || typeof ImageData === "undefined") {
    return;
  }
  ctx.putImageData(new ImageData(decoded.rgba, decoded.width, decoded.height), 0, 0);
}

export class DetailView {
  readonly element: HTMLElement;
  private originalCanvas: HTMLCanvasElement;
  private limeCanvas: HTMLCanvasElement;
  private superpixelCanvas: HTMLCanvasElement;
  private chart: SVGSVGElement;
  private banner: HTMLElement;
  private resetButton: HTMLButtonElement;
  private payload: DetailPayload | null = null;
  private boundary: Set<number> = new Set();

  constructor(
    private onToggleClick: (imageId: number, x: number, y: number) => void,
    private onReset: (imageId: number) => void,
  ) {
    this.element = document.createElement("div");
    this.element.className = "detail-view";
    this.element.hidden = true;

    const panels = document.createElement("div");
    panels.className = "detail-panels";
    const makePanel = (title: string, cls: string) => {
      const wrap = document.createElement("figure");
      const canvas = document.createElement("canvas");
      canvas.className = cls;
      const caption = document.createElement("figcaption");
      caption.textContent = title;
      wrap.append(canvas, caption);
      panels.appendChild(wrap);
      return canvas;
    };
    this.originalCanvas = makePanel("Original Image", "panel-original");
    this.limeCanvas = makePanel("LIME Image", "panel-lime");
    this.superpixelCanvas = makePanel("Superpixel Image", "panel-superpixel");
    this.superpixelCanvas.addEventListener("click", (event) => this.handleClick(event as MouseEvent));

    this.resetButton = document.createElement("button");
    this.resetButton.type = "button";
    this.resetButton.className = "reset-button";
    this.resetButton.textContent = "Reset superpixels";
    this.resetButton.addEventListener("click", () => {
      if (this.payload) this.onReset(this.payload.image_id);
    });

    this.banner = document.createElement("div");
    this.banner.className = "error-banner";
    this.banner.hidden = true;
    this.banner.addEventListener("click", () => {
      this.banner.hidden = true;
    });

    this.chart = document.createElementNS(SVG_NS, "svg") as SVGSVGElement;
    this.chart.setAttribute("class", "prob-chart");

    this.element.append(this.banner, panels, this.resetButton, this.chart);
  }

  show(payload: DetailPayload): void {
    this.payload = payload;
    this.boundary = boundaryPixels(payload.spmap);
    this.element.hidden = false;
    this.banner.hidden = true;
    paintPpmInto(this.originalCanvas, payload.original.ppm_b64);
    paintPpmInto(this.limeCanvas, payload.lime.ppm_b64);
    paintComposite(this.superpixelCanvas, this.currentMaskedFromToggle(payload), this.boundary);
    this.renderChart(payload.original_probs, payload.current_probs, payload.class_names);
  }

  private currentMaskedFromToggle(payload: DetailPayload): string {
    // An all-ones toggle means the masked image IS the original. Otherwise
    // reconstruct it (hidden segments black), matching the server's render
    // of the same state byte for byte.
    if (payload.toggle.every((t) => t === 1)) {
      return payload.original.ppm_b64;
    }
    const decoded = decodePpmBase64(payload.original.ppm_b64);
    const hidden: number[] = [];
    payload.spmap.labels.forEach((label, pixel) => {
      if (payload.toggle[label] === 0) hidden.push(pixel);
    });
    return encodePpmBase64(decoded.width, decoded.height, blackOutPixels(decoded, hidden));
  }

  applyToggle(response: ToggleResponse): void {
    if (!this.payload) return;
    paintComposite(this.superpixelCanvas, response.ppm_b64, this.boundary);
    this.renderChart(this.payload.original_probs, response.current_probs, this.payload.class_names);
  }

  applyReset(response: ResetResponse): void {
    if (!this.payload) return;
    paintComposite(this.superpixelCanvas, this.payload.original.ppm_b64, this.boundary);
    this.renderChart(this.payload.original_probs, response.current_probs, this.payload.class_names);
  }

  showError(message: string): void {
    this.banner.textContent = `${message} (click to dismiss)`;
    this.banner.hidden = false;
  }

  /** Current superpixel-panel content (base64 PPM before compositing). */
  panelPpm(): string | undefined {
    return this.superpixelCanvas.dataset.ppm;
  }

  selectedImageId(): number | null {
    return this.payload ? this.payload.image_id : null;
  }

  barValues(kind: "original" | "current"): number[] {
    return Array.from(this.chart.querySelectorAll(`rect.${kind}`)).map((r) =>
      Number((r as SVGRectElement).dataset.prob),
    );
  }

  private handleClick(event: MouseEvent): void {
    if (!this.payload) return;
    const bounds = this.superpixelCanvas.getBoundingClientRect();
    const width = bounds.width || this.payload.spmap.width;
    const height = bounds.height || this.payload.spmap.height;
    const { x, y } = clickToImageCoords(
      event.clientX - bounds.left,
      event.clientY - bounds.top,
      width,
      height,
      this.payload.spmap.width,
      this.payload.spmap.height,
    );
    this.onToggleClick(this.payload.image_id, x, y);
  }

  private renderChart(original: number[], current: number[], names: string[]): void {
    this.chart.replaceChildren();
    const groupWidth = 2 * BAR_WIDTH + 18;
    this.chart.setAttribute(
      "viewBox",
      `0 0 ${names.length * groupWidth} ${CHART_HEIGHT + 18}`,
    );
    names.forEach((name, i) => {
      const x0 = i * groupWidth;
      const bar = (value: number, offset: number, cls: string) => {
        const rect = document.createElementNS(SVG_NS, "rect");
        const h = value * CHART_HEIGHT;
        rect.setAttribute("x", String(x0 + offset));
        rect.setAttribute("y", String(CHART_HEIGHT - h));
        rect.setAttribute("width", String(BAR_WIDTH));
        rect.setAttribute("height", String(h));
        rect.setAttribute("class", cls);
        rect.dataset.prob = String(value);
        rect.dataset.className = name;
        this.chart.appendChild(rect);
      };
      bar(original[i], 0, "original");
      bar(current[i], BAR_WIDTH + 2, "current");
      const label = document.createElementNS(SVG_NS, "text");
      label.setAttribute("x", String(x0));
      label.setAttribute("y", String(CHART_HEIGHT + 13));
      label.setAttribute("class", "bar-label");
      label.textContent = name;
      this.chart.appendChild(label);
    });
  }
}
