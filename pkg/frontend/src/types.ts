/** JSON shapes of the /v1 annotation service. */

export interface Circle {
  cx: number;
  cy: number;
  r: number;
}

export interface PatchRaster {
  side: number;
  intensities_b64: string;
  supervoxel_ids: number[][];
  circle: Circle;
  predicted: Record<string, number>;
  member_uv: Record<string, [number, number]>;
}

export interface QueryResponse {
  status: "awaiting_annotation" | "training" | "done";
  inputs_spent: number;
  budget: number;
  metric: { kind: string; value: number };
  query_id?: number;
  center?: [number, number, number];
  plane?: { phi: number; gamma: number };
  radius?: number;
  member_ids?: number[];
  raster?: PatchRaster;
  n_classes?: number;
}

export interface LineAnnotation {
  a: [number, number];
  b: [number, number];
  side_a_class: number;
  side_b_class: number;
}

export interface Correction {
  supervoxel_id: number;
  cls: number;
}

export interface AnnotateBody {
  query_id: number;
  line?: LineAnnotation;
  corrections?: Correction[];
}

export interface AnnotateResponse {
  accepted: boolean;
  newly_labeled: number;
  inputs_spent: number;
  status: string;
}

export interface MetricsResponse {
  metric: string;
  budget: number;
  inputs_spent: number;
  curve: { inputs: number; value: number }[];
}
