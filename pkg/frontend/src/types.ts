// Wire types mirroring the survey service endpoints.

export interface StepView {
  index: number;
  text: string;
  context: string;
  video_uri: string | null;
}

export interface SidePayload {
  steps: StepView[];
}

export interface AssignmentPayload {
  available: boolean;
  assignment_id?: string;
  comparison_id?: string;
  task_id?: string;
  left?: SidePayload;
  right?: SidePayload;
}

export interface SubmitResult {
  accepted: boolean;
  duplicate: boolean;
}

export type AspectKey =
  | "TextualInformative"
  | "VisualInformative"
  | "TemporalCoherence"
  | "PlanAccuracy";

export type Choice = "Left" | "Tie" | "Right";

export interface AspectSpec {
  key: AspectKey;
  label: string;
  tooltip: string;
}

// Tooltip wording mirrors the scoring rubric so evaluators share one
// criteria vocabulary with the automated judge.
export const ASPECTS: readonly AspectSpec[] = [
  {
    key: "TextualInformative",
    label: "Textual informativeness",
    tooltip:
      "Clarity, comprehensiveness, detail, and overall quality of the instructional text.",
  },
  {
    key: "VisualInformative",
    label: "Visual informativeness",
    tooltip:
      "How effectively the visual descriptions and clips convey the steps and elements.",
  },
  {
    key: "TemporalCoherence",
    label: "Temporal coherence",
    tooltip:
      "Logical sequencing and timing information: steps in order, overlaps handled well.",
  },
  {
    key: "PlanAccuracy",
    label: "Plan accuracy",
    tooltip:
      "Accuracy and practicality of the instructions in completing the task correctly.",
  },
] as const;
