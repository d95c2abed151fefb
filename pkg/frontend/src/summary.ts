/**
 * Summary scatter: the 2-D embedding of the session's explanation images.
 *
 * Points are colored like the overview borders. A rectangular brush (drag
 * on the plot) selects the points inside and propagates their image ids to
 * the overview highlight.
 */

import { EmbeddingPoint } from "./api";

const SVG_NS = "http://www.w3.org/2000/svg";
export const PLOT_SIZE = 420;
const MARGIN = 18;

export interface DataRect {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

/** Ids of the points inside the rectangle, bounds inclusive. */
export function pointsInRectangle(points: EmbeddingPoint[], rect: DataRect): number[] {
  const xLo = Math.min(rect.x0, rect.x1);
  const xHi = Math.max(rect.x0, rect.x1);
  const yLo = Math.min(rect.y0, rect.y1);
  const yHi = Math.max(rect.y0, rect.y1);
  return points
    .filter((p) => p.x >= xLo && p.x <= xHi && p.y >= yLo && p.y <= yHi)
    .map((p) => p.image_id);
}

interface Scale {
  toScreenX(x: number): number;
  toScreenY(y: number): number;
  toDataX(sx: number): number;
  toDataY(sy: number): number;
}

function makeScale(points: EmbeddingPoint[]): Scale {
  const xs = points.map((p) => p.x);
  const ys = points.map((p) => p.y);
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const yMin = Math.min(...ys);
  const yMax = Math.max(...ys);
  const span = (lo: number, hi: number) => (hi - lo === 0 ? 1 : hi - lo);
  const inner = PLOT_SIZE - 2 * MARGIN;
  return {
    toScreenX: (x) => MARGIN + ((x - xMin) / span(xMin, xMax)) * inner,
    // screen y grows downward
    toScreenY: (y) => PLOT_SIZE - MARGIN - ((y - yMin) / span(yMin, yMax)) * inner,
    toDataX: (sx) => xMin + ((sx - MARGIN) / inner) * span(xMin, xMax),
    toDataY: (sy) => yMin + ((PLOT_SIZE - MARGIN - sy) / inner) * span(yMin, yMax),
  };
}

export class SummaryScatter {
  readonly element: SVGSVGElement;
  private points: EmbeddingPoint[] = [];
  private scale: Scale | null = null;
  private brushRect: SVGRectElement;
  private dragStart: { x: number; y: number } | null = null;

  constructor(private onBrush: (ids: number[]) => void) {
    this.element = document.createElementNS(SVG_NS, "svg") as SVGSVGElement;
    this.element.setAttribute("viewBox", `0 0 ${PLOT_SIZE} ${PLOT_SIZE}`);
    this.element.setAttribute("class", "summary-scatter");
    this.brushRect = document.createElementNS(SVG_NS, "rect") as SVGRectElement;
    this.brushRect.setAttribute("class", "brush-rect");
    this.brushRect.setAttribute("visibility", "hidden");
    this.element.addEventListener("pointerdown", (e) => this.beginDrag(e as PointerEvent));
    this.element.addEventListener("pointermove", (e) => this.moveDrag(e as PointerEvent));
    this.element.addEventListener("pointerup", (e) => this.endDrag(e as PointerEvent));
  }

  render(points: EmbeddingPoint[]): void {
    this.points = points;
    this.scale = points.length ? makeScale(points) : null;
    this.element.replaceChildren();
    if (this.scale) {
      for (const point of points) {
        const circle = document.createElementNS(SVG_NS, "circle");
        circle.setAttribute("cx", String(this.scale.toScreenX(point.x)));
        circle.setAttribute("cy", String(this.scale.toScreenY(point.y)));
        circle.setAttribute("r", "4");
        circle.setAttribute("class", `point ${point.correct ? "correct" : "incorrect"}`);
        circle.dataset.imageId = String(point.image_id);
        this.element.appendChild(circle);
      }
    }
    this.element.appendChild(this.brushRect);
  }

  /** Apply a brush rectangle in data coordinates (used by drag handlers). */
  applyBrush(rect: DataRect | null): number[] {
    const ids = rect ? pointsInRectangle(this.points, rect) : [];
    const selected = new Set(ids);
    for (const circle of Array.from(this.element.querySelectorAll("circle"))) {
      const id = Number((circle as SVGCircleElement).dataset.imageId);
      circle.classList.toggle("selected", selected.has(id));
    }
    this.onBrush(ids);
    return ids;
  }

  private screenPoint(event: PointerEvent): { x: number; y: number } {
    const bounds = this.element.getBoundingClientRect();
    const width = bounds.width || PLOT_SIZE;
    const height = bounds.height || PLOT_SIZE;
    return {
      x: ((event.clientX - bounds.left) / width) * PLOT_SIZE,
      y: ((event.clientY - bounds.top) / height) * PLOT_SIZE,
    };
  }

  private beginDrag(event: PointerEvent): void {
    this.dragStart = this.screenPoint(event);
  }

  private moveDrag(event: PointerEvent): void {
    if (!this.dragStart) return;
    const now = this.screenPoint(event);
    const x = Math.min(this.dragStart.x, now.x);
    const y = Math.min(this.dragStart.y, now.y);
    this.brushRect.setAttribute("x", String(x));
    this.brushRect.setAttribute("y", String(y));
    this.brushRect.setAttribute("width", String(Math.abs(now.x - this.dragStart.x)));
    this.brushRect.setAttribute("height", String(Math.abs(now.y - this.dragStart.y)));
    this.brushRect.setAttribute("visibility", "visible");
  }

  private endDrag(event: PointerEvent): void {
    if (!this.dragStart || !this.scale) {
      this.dragStart = null;
      return;
    }
    const end = this.screenPoint(event);
    const start = this.dragStart;
    this.dragStart = null;
    this.brushRect.setAttribute("visibility", "hidden");
    if (start.x === end.x && start.y === end.y) {
      this.applyBrush(null); // empty rectangle clears the selection
      return;
    }
    this.applyBrush({
      x0: this.scale.toDataX(start.x),
      y0: this.scale.toDataY(start.y),
      x1: this.scale.toDataX(end.x),
      y1: this.scale.toDataY(end.y),
    });
  }
}
