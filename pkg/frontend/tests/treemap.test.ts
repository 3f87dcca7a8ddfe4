import { describe, expect, it } from 'vitest';
import { ApiClient } from '../src/api';
import { TreemapEditor, buildAdjacency, gestureToEdit } from '../src/treemap';
import type { Gesture, SessionPayload, SnapshotPayload } from '../src/types';
import { asRequests, constantTransport, loadFixture, recordedTransport } from './helpers';
import type { RecordedStep } from './helpers';

interface ReplayFixture {
  session: SessionPayload;
  snapshot: SnapshotPayload;
  initial_labels: Record<string, number>;
  gestures: Gesture[];
  steps: RecordedStep[];
  final_revision: number;
  final_fingerprint: string;
}

const fixture = loadFixture<ReplayFixture>('replay.json');

describe('treemap edit gestures', () => {
  it('emits exactly the recorded requests for the scripted gestures', async () => {
    const client = new ApiClient(recordedTransport(fixture.steps));
    const editor = new TreemapEditor(
      client,
      fixture.session.session_id,
      fixture.snapshot,
      fixture.initial_labels,
    );
    for (const gesture of fixture.gestures) {
      const state = await editor.apply(gesture);
      expect(state.error).toBeNull();
    }
    expect(client.log).toEqual(asRequests(fixture.steps));
  });

  it('maps a spanner double-click to the recorded merge body', () => {
    const adj = buildAdjacency(fixture.snapshot);
    const edit = gestureToEdit(fixture.gestures[0]!, fixture.initial_labels, adj);
    expect(edit).toEqual(fixture.steps[0]!.body);
  });

  it('selection highlights neighbours without emitting an edit', async () => {
    const client = new ApiClient(recordedTransport([]));
    const editor = new TreemapEditor(
      client,
      fixture.session.session_id,
      fixture.snapshot,
      fixture.initial_labels,
    );
    const state = await editor.apply({ kind: 'select', community: 0 });
    expect(state.selected).toBe(0);
    expect(client.log).toHaveLength(0);
  });

  it('keeps the layout and surfaces the error inline on a rejected edit', async () => {
    const rejection = loadFixture<{ status: number; body: unknown }>('edit_rejection.json');
    const client = new ApiClient(constantTransport(rejection.status, rejection.body));
    const labels = { A: 1, B: 0 };
    const snapshot = {
      ...fixture.snapshot,
      edges: fixture.snapshot.edges.filter((e) => e.guarantor === 'B' && e.borrower === 'A'),
    };
    const editor = new TreemapEditor(client, 'sid', snapshot, labels);
    const state = await editor.apply({ kind: 'reassign', node: 'A' });
    expect(state.error).toContain('not_a_spanner');
    expect(state.view).toBeNull();
    expect(state.labels).toEqual(labels);
    expect(client.log).toHaveLength(1);
  });
});
