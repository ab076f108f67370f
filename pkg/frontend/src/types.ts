// Mirrors of the JSON documents the HTTP API serves.  The UI renders these
// verbatim — it never derives narrative quantities on its own.

export interface GalleryRecord {
  id: string;
  date: string | null;
  category: string | null;
  location: string;
  expert_labeled: boolean;
  thumbnail: string | null;
}

export interface ImagesPage {
  page: number;
  page_size: number;
  total: number;
  records: GalleryRecord[];
}

export interface ClustersDoc {
  categories: string[];
  counts: Record<string, number>;
  images: { id: string; top_category: string; top_probability: number }[];
}

export interface GraphEdge {
  source: string;
  target: string;
  coherence: number;
  raw_similarity: number;
  topic_similarity: number;
}

export interface GraphDoc {
  space: string;
  itf_applied: boolean;
  node_order: string[];
  edges: GraphEdge[];
}

export interface ExtractionRequest {
  source_id: string;
  target_id: string;
  K: number;
  mincover: number;
  space_name: string;
  itf: boolean;
}

// params echoed inside responses use "space"; the request body uses "space_name"
export interface ExtractionParamsDoc {
  source_id: string;
  target_id: string;
  K: number;
  mincover: number;
  space: string;
  itf: boolean;
}

export interface NarrativeMapDoc {
  params: ExtractionParamsDoc;
  nodes: string[];
  edges: GraphEdge[];
  main_route: string[];
  mu_star: number;
  covered_clusters: string[];
  solver_stats: {
    num_nodes: number;
    num_edges: number;
    num_binaries: number;
    optimal: boolean;
    status: string;
  };
}

export interface FeasibilityDoc {
  feasible: boolean;
  k_feasible: boolean;
  coverage_feasible: boolean;
  max_path_length: number;
  required_coverage: number;
  coverage_upper_bound: string[];
  detail: { interval_size: number; interval_edges: number; K: number };
}

// detail payload of a 422 infeasible response
export interface InfeasibleDetail {
  failed_families: string[];
  reason?: string;
  max_path_length?: number;
  required_coverage?: number;
  coverage_upper_bound?: string[];
}

export interface AlignmentDoc {
  path: [number, number][];
  distance: number;
  mean_similarity: number;
}

export interface HistoryDoc {
  extractions: {
    params: ExtractionParamsDoc;
    route: string[];
    mu_star: number;
    covered_clusters: string[];
  }[];
}
