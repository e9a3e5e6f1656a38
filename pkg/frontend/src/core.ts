// Pure view-model logic: selection state and the submit gate.

import type { AspectKey, AssignmentPayload, Choice, SidePayload } from "./types.js";
import { ASPECTS } from "./types.js";

export interface ViewModel {
  assignmentId: string;
  comparisonId: string;
  taskId: string;
  left: SidePayload;
  right: SidePayload;
  selections: Partial<Record<AspectKey, Choice>>;
}

export function viewModelFrom(payload: AssignmentPayload): ViewModel | null {
  if (!payload.available) return null;
  if (!payload.assignment_id || !payload.left || !payload.right) {
    throw new Error("malformed assignment payload");
  }
  return {
    assignmentId: payload.assignment_id,
    comparisonId: payload.comparison_id ?? "",
    taskId: payload.task_id ?? "",
    left: payload.left,
    right: payload.right,
    selections: {},
  };
}

export function select(vm: ViewModel, aspect: AspectKey, choice: Choice): ViewModel {
  return { ...vm, selections: { ...vm.selections, [aspect]: choice } };
}

// Submit is enabled exactly when all four aspects carry a verdict.
export function canSubmit(vm: ViewModel): boolean {
  return ASPECTS.every((a) => vm.selections[a.key] !== undefined);
}

export function verdictsOf(vm: ViewModel): Record<string, Choice> {
  if (!canSubmit(vm)) {
    throw new Error("all four aspects must be selected before submitting");
  }
  const out: Record<string, Choice> = {};
  for (const aspect of ASPECTS) {
    out[aspect.key] = vm.selections[aspect.key] as Choice;
  }
  return out;
}

const SUBMITTED_PREFIX = "survey-submitted:";

// Reload protection: a submission is keyed to its assignment id, so a page
// that comes back after the POST landed will not fire it again.
export function markSubmitted(storage: Storage, assignmentId: string): void {
  storage.setItem(SUBMITTED_PREFIX + assignmentId, "1");
}

export function alreadySubmitted(storage: Storage, assignmentId: string): boolean {
  return storage.getItem(SUBMITTED_PREFIX + assignmentId) !== null;
}
