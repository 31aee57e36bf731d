export interface UiTask {
  task_id: string;
  sample_id: string;
  patch_url: string;
  proposed_label: string;
  class_menu: string[];
  guideline_id: string;
  remaining: number;
}

export interface DecisionAck {
  resolved: boolean;
  resolved_label: string | null;
  unlabelable: boolean;
}

export interface Progress {
  iteration_index: number;
  tasks_total: number;
  tasks_resolved: number;
  consistent_count: number;
  inconsistent_count: number;
  labor_saved_so_far: number;
  excluded_count: number;
  complete: boolean;
}

export interface IterationSummary {
  iteration_index: number;
  status: string;
  batch_size: number;
  consistent_count: number;
  inconsistent_count: number;
}

/** Full class menu in digit-key order; unlabelable is bound to "u". */
export const CLASS_MENU = [
  "forest",
  "shrubland",
  "grassland",
  "cropland",
  "impervious",
  "water",
  "bare",
  "other",
] as const;

export const UNLABELABLE = "unlabelable";
