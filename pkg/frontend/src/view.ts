// DOM rendering. The two plans are only ever labelled "Plan A" and
// "Plan B"; which arm or model produced a side is never present in the
// payload, so it cannot leak here.

import type { ViewModel } from "./core.js";
import { canSubmit } from "./core.js";
import type { AspectKey, Choice, SidePayload } from "./types.js";
import { ASPECTS } from "./types.js";

type Handlers = {
  onSelect: (aspect: AspectKey, choice: Choice) => void;
  onSubmit: () => void;
};

function el(
  tag: string,
  attrs: Record<string, string | boolean | ((e: Event) => void)> = {},
  ...children: Array<string | Node>
): HTMLElement {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (typeof value === "function") {
      node.addEventListener(key.slice(2).toLowerCase(), value as EventListener);
    } else if (typeof value === "boolean") {
      if (value) node.setAttribute(key, "");
      if (key === "disabled") (node as HTMLButtonElement).disabled = value;
    } else if (key === "className") {
      node.className = value;
    } else {
      node.setAttribute(key, value);
    }
  }
  for (const child of children) {
    node.append(typeof child === "string" ? document.createTextNode(child) : child);
  }
  return node;
}

function renderStep(step: SidePayload["steps"][number]): HTMLElement {
  const media = step.video_uri
    ? el("video", {
        className: "step-video",
        controls: true,
        preload: "none",
        src: step.video_uri,
      })
    : el("div", { className: "video-missing" }, "video unavailable");
  return el(
    "li",
    { className: "step" },
    el("p", { className: "step-text" }, `${step.index}. ${step.text}`),
    el("p", { className: "step-context" }, step.context),
    media,
  );
}

function renderSide(label: string, side: SidePayload): HTMLElement {
  return el(
    "section",
    { className: "plan-column" },
    el("h2", {}, label),
    el("ol", { className: "steps" }, ...side.steps.map(renderStep)),
  );
}

function renderAspectRow(
  vm: ViewModel,
  aspect: (typeof ASPECTS)[number],
  handlers: Handlers,
): HTMLElement {
  const choices: Choice[] = ["Left", "Tie", "Right"];
  const buttons = choices.map((choice) => {
    const selected = vm.selections[aspect.key] === choice;
    const label = choice === "Left" ? "Plan A" : choice === "Right" ? "Plan B" : "Tie";
    return el(
      "button",
      {
        className: selected ? "choice selected" : "choice",
        "data-aspect": aspect.key,
        "data-choice": choice,
        onClick: () => handlers.onSelect(aspect.key, choice),
      },
      label,
    );
  });
  return el(
    "div",
    { className: "aspect-row" },
    el("span", { className: "aspect-label", title: aspect.tooltip }, aspect.label),
    el("div", { className: "choices" }, ...buttons),
  );
}

export function renderNoneAvailable(root: HTMLElement): void {
  root.replaceChildren(
    el(
      "div",
      { className: "notice", id: "none-available" },
      "No more comparisons are available for you. Thank you for participating!",
    ),
  );
}

export function renderAuthPrompt(
  root: HTMLElement,
  onToken: (token: string) => void,
  message = "Enter your evaluator token to begin.",
): void {
  const input = el("input", {
    id: "token-input",
    type: "password",
    placeholder: "evaluator token",
  }) as HTMLInputElement;
  root.replaceChildren(
    el(
      "div",
      { className: "auth-box" },
      el("p", { className: "notice" }, message),
      input,
      el("button", { id: "token-go", onClick: () => onToken(input.value.trim()) }, "Start"),
    ),
  );
}

export function renderBanner(root: HTMLElement, text: string, kind: "info" | "error"): void {
  const banner = root.querySelector("#banner");
  if (banner) {
    banner.textContent = text;
    banner.className = `banner ${kind}`;
  }
}

export function renderAssignment(root: HTMLElement, vm: ViewModel, handlers: Handlers): void {
  const submitEnabled = canSubmit(vm);
  root.replaceChildren(
    el("div", { id: "banner", className: "banner" }),
    el(
      "div",
      { className: "columns" },
      renderSide("Plan A", vm.left),
      renderSide("Plan B", vm.right),
    ),
    el(
      "div",
      { className: "verdicts" },
      ...ASPECTS.map((aspect) => renderAspectRow(vm, aspect, handlers)),
    ),
    el(
      "button",
      {
        id: "submit",
        className: "submit",
        disabled: !submitEnabled,
        onClick: () => handlers.onSubmit(),
      },
      "Submit verdicts",
    ),
  );
}
