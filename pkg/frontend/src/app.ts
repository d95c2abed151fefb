/**
 * Wires the four linked views over the session API.
 *
 * Data flows one way: Execute rebuilds everything; brushing in the summary
 * highlights overview cells; clicking a cell opens the detail view; clicks
 * on the superpixel panel queue toggle posts (one in flight per image, in
 * order) whose responses update the panel and the purple bars.
 */

import { ApiClient, ApiError, ExecuteConfig } from "./api";
import { ConfigFormValues, ConfigView } from "./config_view";
import { DetailView } from "./detail";
import { OverviewGrid, OverviewMode } from "./overview";
import { SummaryScatter } from "./summary";

export class App {
  readonly configView: ConfigView;
  readonly overview: OverviewGrid;
  readonly summary: SummaryScatter;
  readonly detail: DetailView;
  private mode: OverviewMode = "original";
  private modeSwitch: HTMLButtonElement;
  private toggleQueues = new Map<number, Promise<void>>();

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
  ) {
    this.configView = new ConfigView((values) => void this.execute(values));
    this.overview = new OverviewGrid((imageId) => void this.select(imageId));
    this.summary = new SummaryScatter((ids) => this.overview.setBrushed(new Set(ids)));
    this.detail = new DetailView(
      (imageId, x, y) => this.queueToggle(imageId, x, y),
      (imageId) => void this.reset(imageId),
    );

    this.modeSwitch = document.createElement("button");
    this.modeSwitch.type = "button";
    this.modeSwitch.className = "mode-switch";
    this.modeSwitch.textContent = "show LIME images";
    this.modeSwitch.addEventListener("click", () => void this.switchMode());

    const left = document.createElement("div");
    left.className = "column";
    left.append(this.configView.element, this.summary.element);
    const right = document.createElement("div");
    right.className = "column";
    right.append(this.modeSwitch, this.overview.element, this.detail.element);
    this.root.append(left, right);
  }

  async init(): Promise<void> {
    const { categories } = await this.api.categories();
    this.configView.setCategories(categories);
  }

  private configPayload(values: ConfigFormValues): ExecuteConfig {
    return {
      segmentation: { algorithm: values.algorithm },
      positive_only: values.positive_only,
      num_features: values.num_features,
      hide_rest: values.hide_rest,
    };
  }

  async execute(values: ConfigFormValues): Promise<void> {
    await this.api.execute(values.category, this.configPayload(values));
    await this.refreshOverview();
    const { points } = await this.api.embedding();
    this.summary.render(points);
  }

  private async refreshOverview(): Promise<void> {
    const { cells } = await this.api.overview(this.mode);
    this.overview.render(cells);
  }

  async switchMode(): Promise<void> {
    this.mode = this.mode === "original" ? "lime" : "original";
    this.modeSwitch.textContent =
      this.mode === "original" ? "show LIME images" : "show original images";
    await this.refreshOverview();
  }

  async select(imageId: number): Promise<void> {
    const payload = await this.api.detail(imageId);
    this.detail.show(payload);
  }

  /** Queue a toggle so at most one request per image is in flight. */
  queueToggle(imageId: number, x: number, y: number): Promise<void> {
    const tail = this.toggleQueues.get(imageId) ?? Promise.resolve();
    const next = tail.then(async () => {
      try {
        const response = await this.api.toggle(imageId, { x, y });
        if (this.detail.selectedImageId() === imageId) {
          this.detail.applyToggle(response);
        }
      } catch (error) {
        this.detail.showError(error instanceof ApiError ? error.message : String(error));
      }
    });
    this.toggleQueues.set(imageId, next);
    return next;
  }

  async reset(imageId: number): Promise<void> {
    try {
      const response = await this.api.reset(imageId);
      if (this.detail.selectedImageId() === imageId) {
        this.detail.applyReset(response);
      }
    } catch (error) {
      this.detail.showError(error instanceof ApiError ? error.message : String(error));
    }
  }
}

export function mount(root: HTMLElement, base = ""): App {
  const app = new App(root, new ApiClient(base));
  void app.init();
  return app;
}
