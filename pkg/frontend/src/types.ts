export interface SessionInfo {
  session_id: string;
  graph: GraphConfig;
  num_blocks: number;
  num_classes: number;
}

export interface GraphConfig {
  name: string;
  latent_dim: number;
  num_classes: number;
  num_blocks: number;
  [key: string]: unknown;
}

export interface PlanRequest {
  mode: 'multiplicative' | 'block_randomize';
  seed: number;
  alpha?: number;
  blocks?: string[];
}

export interface RenderParams {
  classes: number[];
  latent_seed: number;
  count: number;
  compare_base: boolean;
}

export interface GridInfo {
  grid_id: string;
  rows: number;
  cols: number;
  tile_size: number;
  columns: string[];
}

export interface VariantProvenance {
  label: string;
  plan: string | null;
  source: string | null;
}

export interface Provenance {
  graph: GraphConfig;
  latent_seed: number;
  latent_count: number;
  latent_index: number | null;
  classes: number[];
  variants: VariantProvenance[];
  rows: number;
  cols: number;
  tile_size: number;
}

export interface Pick {
  pick_id: string;
  grid_id: string;
  tile: [number, number];
  provenance: Provenance;
}

export interface ApiError {
  code: string;
  message: string;
  detail: string;
}
