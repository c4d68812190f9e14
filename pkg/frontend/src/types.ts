// Shapes mirror the advisor service JSON field for field.  Every numeric
// value displayed anywhere in the UI is carried by one of these records.

export interface FeatureInfo {
  name: string;
  cost: number;
  group: string[] | null;
}

export interface Meta {
  features: FeatureInfo[];
  models: string[];
  n_clusters: number;
  k: number;
  mode: string;
}

export interface RevealedEntry {
  feature: string;
  value: number;
  charged: number;
}

export type Suggestion =
  | { action: 'reveal'; feature: string; cost: number }
  | { action: 'terminate' };

export interface PredictedCluster {
  kind: 'leaf' | 'centroid';
  id: number;
  size: number;
}

export interface Neighbor {
  id: number;
  distance: number;
}

export interface Advice {
  session_id: string;
  model: string;
  budget: number;
  remaining_budget: number;
  revealed: RevealedEntry[];
  awaiting_value: string[];
  suggestion: Suggestion;
  cluster_ranking: number[];
  predicted_cluster: PredictedCluster;
  neighbors: Neighbor[];
  done: boolean;
}

// POST /sessions additionally returns the feature catalog so one response
// is enough to draw the whole grid
export interface SessionCreated extends Advice {
  features: FeatureInfo[];
}

export interface ErrorBody {
  code: string;
  message: string;
}
