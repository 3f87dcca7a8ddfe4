// Payload shapes for the /api/v1 surface. Every field the UI renders comes
// from one of these; the client never derives analytic values itself.

export interface EdgePayload {
  guarantor: string;
  borrower: string;
  amount: number;
  contract_id: string;
  valid_from: string;
  valid_to: string | null;
}

export interface SnapshotPayload {
  as_of: string;
  nodes: string[];
  edges: EdgePayload[];
  fingerprint: string;
}

export interface MetricsPayload {
  kind: string | null;
  metrics: Record<string, number | Record<string, number>>;
  fingerprint: string;
}

export interface CommunityStats {
  label: number;
  firms: number;
  default_firms: number;
  ratio_default_firms: number;
  ratio_default_amount: number | null;
  spanners: string[];
  neighbour_communities: number[];
  total_loan_amount: number;
  total_default_amount: number;
}

export interface CommunitiesPayload {
  labels: Record<string, number>;
  communities: Record<string, CommunityStats>;
  revision: number;
  fingerprint: string;
}

export interface TreemapPayload {
  size_measure: string;
  rects: Record<string, [number, number, number, number]>;
  rates: Record<string, number>;
  fingerprint: string;
}

export interface SessionPayload {
  session_id: string;
  date: string;
  revision: number;
  session_fingerprint: string;
  fingerprint: string;
}

export interface SessionView {
  session_id: string;
  revision: number;
  session_fingerprint: string;
  communities: Record<string, CommunityStats>;
  treemap: Record<string, [number, number, number, number]>;
  cuts: string[][];
  motif: { k: number; edges: [number, number][] } | null;
  fingerprint: string;
}

export interface PropagationPayload {
  seed: string;
  paths: string[][];
  truncated: boolean;
  occurrences: Record<string, number>;
  importance: Record<string, number>;
  fingerprint: string;
}

export interface SankeyLink {
  source: string;
  target: string;
  value: number;
}

export interface SankeyPayload {
  focus: string;
  nodes: string[];
  links: SankeyLink[];
  provided: Record<string, number>;
  received: Record<string, number>;
  fingerprint: string;
}

export interface ApiError {
  code: string;
  message: string;
  detail: Record<string, unknown>;
}

export type EditOp =
  | { op: 'merge'; a: number; b: number }
  | { op: 'reassign'; node: string; target: number }
  | { op: 'split'; community: number; cut_edges: string[][] }
  | { op: 'cut'; edge: [string, string] }
  | { op: 'revert'; edge: [string, string] };

// Analyst gestures, as captured from the views. The documented mapping:
// block click selects, spanner single-click reassigns, spanner double-click
// merges, edge double-click splits, propagation edge click cuts.
export type Gesture =
  | { kind: 'select'; community: number }
  | { kind: 'merge'; node: string }
  | { kind: 'reassign'; node: string }
  | { kind: 'split'; edge: [string, string] }
  | { kind: 'cut'; edge: [string, string] };
