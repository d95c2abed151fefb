/**
 * Overview grid: up to 100 thumbnails in a 10x10 layout.
 *
 * Border color encodes prediction correctness (blue correct, red not);
 * brushed cells from the summary view get a highlight outline; clicking a
 * cell selects it for the detail view.
 */

import { OverviewCellPayload } from "./api";
import { decodePpmBase64 } from "./ppm";

export type OverviewMode = "original" | "lime";

export function paintPpmInto(canvas: HTMLCanvasElement, ppmB64: string): void {
  const decoded = decodePpmBase64(ppmB64);
  canvas.width = decoded.width;
  canvas.height = decoded.height;
  canvas.dataset.ppm = ppmB64;
  // happy-dom has no 2D context; keep rendering best-effort so tests that
  // assert on structure and dataset state run headless.
  const ctx = canvas.getContext && (canvas.getContext("2d") as CanvasRenderingContext2D | null);
  if (!ctx || typeof ctx.putImageData !== "function" || typeof ImageData === "undefined") {
    return;
  }
  ctx.putImageData(new ImageData(decoded.rgba, decoded.width, decoded.height), 0, 0);
}

export class OverviewGrid {
  readonly element: HTMLElement;
  private cellsById = new Map<number, HTMLElement>();

  constructor(private onSelect: (imageId: number) => void) {
    this.element = document.createElement("div");
    this.element.className = "overview-grid";
  }

  render(cells: OverviewCellPayload[]): void {
    this.element.replaceChildren();
    this.cellsById.clear();
    for (const cell of cells) {
      const div = document.createElement("div");
      div.className = `cell ${cell.correct ? "correct" : "incorrect"}`;
      div.dataset.imageId = String(cell.image_id);
      div.style.gridRow = String(cell.row + 1);
      div.style.gridColumn = String(cell.col + 1);
      if (cell.ppm_b64) {
        const canvas = document.createElement("canvas");
        paintPpmInto(canvas, cell.ppm_b64);
        div.appendChild(canvas);
      }
      div.addEventListener("click", () => this.onSelect(cell.image_id));
      this.element.appendChild(div);
      this.cellsById.set(cell.image_id, div);
    }
  }

  setBrushed(ids: Set<number>): void {
    for (const [imageId, div] of this.cellsById) {
      div.classList.toggle("brushed", ids.has(imageId));
    }
  }

  cellCount(): number {
    return this.cellsById.size;
  }
}
