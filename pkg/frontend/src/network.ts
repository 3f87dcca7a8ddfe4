import type { MetricsPayload, SnapshotPayload } from './types';

export interface RenderedNode {
  id: string;
  radius: number;
  classes: string[];
}

export interface RenderedGraph {
  nodes: RenderedNode[];
  empty: boolean;
  message: string | null;
}

const MIN_RADIUS = 4;
const MAX_RADIUS = 24;

/**
 * Size nodes by the selected metric: radius strictly increasing in the
 * metric value, defaulted enterprises carrying a red-ring style class.
 */
export function renderNetwork(
  snapshot: SnapshotPayload,
  metrics: MetricsPayload,
  defaulted: Set<string>,
): RenderedGraph {
  if (snapshot.nodes.length === 0) {
    return { nodes: [], empty: true, message: 'no enterprises active at this date' };
  }
  const values = new Map<string, number>();
  for (const id of snapshot.nodes) {
    const raw = metrics.metrics[id];
    values.set(id, typeof raw === 'number' ? raw : 0);
  }
  const vs = [...values.values()];
  const lo = Math.min(...vs);
  const hi = Math.max(...vs);
  const span = hi - lo;
  const nodes = snapshot.nodes.map((id) => {
    const v = values.get(id) ?? 0;
    const t = span > 0 ? (v - lo) / span : 0.5;
    const classes = ['node'];
    if (defaulted.has(id)) classes.push('red-ring');
    return { id, radius: MIN_RADIUS + t * (MAX_RADIUS - MIN_RADIUS), classes };
  });
  return { nodes, empty: false, message: null };
}
