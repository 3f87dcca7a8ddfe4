import { ApiClient, ApiRejection } from './api';
import type { EditOp, Gesture, SessionView, SnapshotPayload } from './types';

export class AmbiguousGesture extends Error {}

type Adjacency = Map<string, Set<string>>;

export function buildAdjacency(snapshot: SnapshotPayload): Adjacency {
  const adj: Adjacency = new Map();
  const touch = (a: string, b: string) => {
    if (!adj.has(a)) adj.set(a, new Set());
    adj.get(a)!.add(b);
  };
  for (const e of snapshot.edges) {
    touch(e.guarantor, e.borrower);
    touch(e.borrower, e.guarantor);
  }
  return adj;
}

function soleNeighbourCommunity(
  adj: Adjacency,
  labels: Record<string, number>,
  node: string,
): { own: number; other: number } {
  const own = labels[node];
  if (own === undefined) throw new AmbiguousGesture(`unknown node ${node}`);
  const others = new Set<number>();
  for (const m of adj.get(node) ?? []) {
    const l = labels[m];
    if (l !== undefined && l !== own) others.add(l);
  }
  if (others.size !== 1) {
    throw new AmbiguousGesture(`${node} borders ${others.size} communities`);
  }
  return { own, other: [...others][0]! };
}

/**
 * Map an analyst gesture to the single edit request it must emit.
 *
 * Spanner double-click merges the spanner's community with the one it
 * borders; spanner single-click moves the spanner there; edge double-click
 * splits the shared community along that edge; propagation edge click cuts.
 */
export function gestureToEdit(
  gesture: Gesture,
  labels: Record<string, number>,
  adj: Adjacency,
): EditOp {
  switch (gesture.kind) {
    case 'merge': {
      const { own, other } = soleNeighbourCommunity(adj, labels, gesture.node);
      return { op: 'merge', a: own, b: other };
    }
    case 'reassign': {
      const { other } = soleNeighbourCommunity(adj, labels, gesture.node);
      return { op: 'reassign', node: gesture.node, target: other };
    }
    case 'split': {
      const [u, v] = gesture.edge;
      const cu = labels[u];
      if (cu === undefined || cu !== labels[v]) {
        throw new AmbiguousGesture(`${u}-${v} does not sit inside one community`);
      }
      return { op: 'split', community: cu, cut_edges: [[u, v]] };
    }
    case 'cut':
      return { op: 'cut', edge: gesture.edge };
    case 'select':
      throw new AmbiguousGesture('selection emits no edit');
  }
}

export interface EditorState {
  view: SessionView | null;
  labels: Record<string, number>;
  selected: number | null;
  error: string | null;
}

/**
 * Treemap community editor. Every edit gesture emits exactly one POST to
 * the session's edit endpoint, then refreshes the node labels; rejected
 * edits keep the previous layout and surface the error inline.
 */
export class TreemapEditor {
  readonly state: EditorState = { view: null, labels: {}, selected: null, error: null };
  private readonly adj: Adjacency;

  constructor(
    private readonly client: ApiClient,
    private readonly sessionId: string,
    snapshot: SnapshotPayload,
    initialLabels: Record<string, number>,
  ) {
    this.adj = buildAdjacency(snapshot);
    this.state.labels = { ...initialLabels };
  }

  highlightedNeighbours(): number[] {
    if (this.state.selected === null || this.state.view === null) return [];
    const stats = this.state.view.communities[String(this.state.selected)];
    return stats ? stats.neighbour_communities : [];
  }

  async apply(gesture: Gesture): Promise<EditorState> {
    this.state.error = null;
    if (gesture.kind === 'select') {
      this.state.selected = gesture.community;
      return this.state;
    }
    const edit = gestureToEdit(gesture, this.state.labels, this.adj);
    try {
      this.state.view = await this.client.edit(this.sessionId, edit);
    } catch (err) {
      if (err instanceof ApiRejection) {
        this.state.error = `${err.error.code}: ${err.error.message}`;
        return this.state;
      }
      throw err;
    }
    const refreshed = await this.client.communities(this.sessionId);
    this.state.labels = refreshed.labels;
    return this.state;
  }
}
