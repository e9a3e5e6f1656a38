// Session controller: one comparison per screen, server as source of truth.

import { ApiError, AuthExpired, SurveyApi } from "./api.js";
import {
  alreadySubmitted,
  canSubmit,
  markSubmitted,
  select,
  verdictsOf,
  viewModelFrom,
  type ViewModel,
} from "./core.js";
import {
  renderAssignment,
  renderAuthPrompt,
  renderBanner,
  renderNoneAvailable,
} from "./view.js";
import type { AspectKey, Choice } from "./types.js";

const TOKEN_KEY = "survey-token";

export interface AppOptions {
  root: HTMLElement;
  api: SurveyApi;
  localStore?: Storage;
  sessionStore?: Storage;
}

export class SurveyApp {
  private vm: ViewModel | null = null;
  private submitting = false;
  private readonly root: HTMLElement;
  private readonly api: SurveyApi;
  private readonly localStore: Storage;
  private readonly sessionStore: Storage;

  constructor(options: AppOptions) {
    this.root = options.root;
    this.api = options.api;
    this.localStore = options.localStore ?? window.localStorage;
    this.sessionStore = options.sessionStore ?? window.sessionStorage;
  }

  async start(): Promise<void> {
    const token = this.localStore.getItem(TOKEN_KEY);
    if (!token) {
      renderAuthPrompt(this.root, (value) => void this.useToken(value));
      return;
    }
    await this.loadAssignment();
  }

  private async useToken(token: string): Promise<void> {
    if (!token) return;
    this.localStore.setItem(TOKEN_KEY, token);
    await this.loadAssignment();
  }

  private token(): string {
    return this.localStore.getItem(TOKEN_KEY) ?? "";
  }

  async loadAssignment(): Promise<void> {
    try {
      const payload = await this.api.nextAssignment(this.token());
      const vm = viewModelFrom(payload);
      if (vm === null) {
        this.vm = null;
        renderNoneAvailable(this.root);
        return;
      }
      this.vm = vm;
      this.renderCurrent();
    } catch (err) {
      if (err instanceof AuthExpired) {
        this.localStore.removeItem(TOKEN_KEY);
        renderAuthPrompt(
          this.root,
          (value) => void this.useToken(value),
          "Your session expired. Enter your token again.",
        );
        return;
      }
      throw err;
    }
  }

  private renderCurrent(): void {
    if (!this.vm) return;
    renderAssignment(this.root, this.vm, {
      onSelect: (aspect, choice) => this.onSelect(aspect, choice),
      onSubmit: () => void this.onSubmit(),
    });
  }

  private onSelect(aspect: AspectKey, choice: Choice): void {
    if (!this.vm) return;
    this.vm = select(this.vm, aspect, choice);
    this.renderCurrent();
  }

  private async onSubmit(): Promise<void> {
    if (!this.vm || !canSubmit(this.vm) || this.submitting) return;
    this.submitting = true;
    try {
      await this.doSubmit();
    } finally {
      this.submitting = false;
    }
  }

  private async doSubmit(): Promise<void> {
    if (!this.vm) return;
    const assignmentId = this.vm.assignmentId;
    if (alreadySubmitted(this.sessionStore, assignmentId)) {
      renderBanner(this.root, "Already submitted; loading the next comparison.", "info");
      await this.loadAssignment();
      return;
    }
    try {
      const result = await this.api.submit(this.token(), assignmentId, verdictsOf(this.vm));
      markSubmitted(this.sessionStore, assignmentId);
      renderBanner(
        this.root,
        result.duplicate ? "Verdicts were already recorded." : "Verdicts recorded. Thank you!",
        "info",
      );
      await this.loadAssignment();
    } catch (err) {
      if (err instanceof ApiError && err.code === "DuplicateSubmission") {
        markSubmitted(this.sessionStore, assignmentId);
        renderBanner(this.root, "This comparison was already submitted.", "error");
        await this.loadAssignment();
        return;
      }
      if (err instanceof ApiError && err.code === "IncompleteAspects") {
        renderBanner(this.root, "Select a verdict for all four aspects first.", "error");
        return;
      }
      if (err instanceof AuthExpired) {
        this.localStore.removeItem(TOKEN_KEY);
        renderAuthPrompt(
          this.root,
          (value) => void this.useToken(value),
          "Your session expired. Enter your token again.",
        );
        return;
      }
      renderBanner(this.root, String(err), "error");
    }
  }
}

export function bootstrap(): void {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");
  const app = new SurveyApp({ root, api: new SurveyApi("") });
  void app.start();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  bootstrap();
}
