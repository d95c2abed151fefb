/**
 * Config form: category, segmentation algorithm, and the three rendering
 * knobs (positive_only, num_features, hide_rest), plus the Execute button.
 */

export interface ConfigFormValues {
  category: string;
  algorithm: "slic" | "felzenszwalb" | "quickshift";
  positive_only: boolean;
  num_features: number;
  hide_rest: boolean;
}

const ALGORITHMS: ConfigFormValues["algorithm"][] = ["quickshift", "slic", "felzenszwalb"];

export class ConfigView {
  readonly element: HTMLElement;
  private categorySelect: HTMLSelectElement;
  private algorithmSelect: HTMLSelectElement;
  private positiveOnly: HTMLInputElement;
  private numFeatures: HTMLInputElement;
  private hideRest: HTMLInputElement;
  private executeButton: HTMLButtonElement;
  private message: HTMLElement;

  constructor(private onExecute: (values: ConfigFormValues) => void) {
    this.element = document.createElement("form");
    this.element.className = "config-view";

    this.categorySelect = document.createElement("select");
    this.categorySelect.name = "category";
    this.algorithmSelect = document.createElement("select");
    this.algorithmSelect.name = "segmentation";
    for (const name of ALGORITHMS) {
      const option = document.createElement("option");
      option.value = name;
      option.textContent = name;
      this.algorithmSelect.appendChild(option);
    }

    this.positiveOnly = document.createElement("input");
    this.positiveOnly.type = "checkbox";
    this.positiveOnly.name = "positive_only";
    this.positiveOnly.checked = true;

    this.numFeatures = document.createElement("input");
    this.numFeatures.type = "number";
    this.numFeatures.name = "num_features";
    this.numFeatures.value = "5";
    this.numFeatures.min = "1";
    this.numFeatures.addEventListener("input", () => this.refreshValidity());

    this.hideRest = document.createElement("input");
    this.hideRest.type = "checkbox";
    this.hideRest.name = "hide_rest";

    this.executeButton = document.createElement("button");
    this.executeButton.type = "submit";
    this.executeButton.textContent = "Execute";

    this.message = document.createElement("span");
    this.message.className = "validation-message";

    const row = (label: string, input: HTMLElement) => {
      const wrap = document.createElement("label");
      wrap.append(`${label}: `, input);
      this.element.appendChild(wrap);
    };
    row("category", this.categorySelect);
    row("segmentation", this.algorithmSelect);
    row("positive_only", this.positiveOnly);
    row("num_features", this.numFeatures);
    row("hide_rest", this.hideRest);
    this.element.append(this.executeButton, this.message);

    this.element.addEventListener("submit", (event) => {
      event.preventDefault();
      if (this.validationError() === null) {
        this.onExecute(this.values());
      }
    });
  }

  setCategories(names: string[]): void {
    this.categorySelect.replaceChildren();
    for (const name of names) {
      const option = document.createElement("option");
      option.value = name;
      option.textContent = name;
      this.categorySelect.appendChild(option);
    }
  }

  values(): ConfigFormValues {
    return {
      category: this.categorySelect.value,
      algorithm: this.algorithmSelect.value as ConfigFormValues["algorithm"],
      positive_only: this.positiveOnly.checked,
      num_features: parseInt(this.numFeatures.value, 10),
      hide_rest: this.hideRest.checked,
    };
  }

  validationError(): string | null {
    const count = parseInt(this.numFeatures.value, 10);
    if (!Number.isFinite(count) || count < 1) {
      return "num_features must be at least 1";
    }
    return null;
  }

  private refreshValidity(): void {
    const error = this.validationError();
    this.executeButton.disabled = error !== null;
    this.message.textContent = error ?? "";
  }
}
