import { ApiClient } from './api';
import { TreemapEditor } from './treemap';
import type { Gesture, SnapshotPayload } from './types';

export interface ReplayOutcome {
  revision: number;
  sessionFingerprint: string;
}

/**
 * Drive a scripted gesture sequence against a fresh editor and report the
 * final session revision and fingerprint; the sequence is deterministic, so
 * two runs over the same dataset must agree.
 */
export async function replayGestures(
  client: ApiClient,
  sessionId: string,
  snapshot: SnapshotPayload,
  initialLabels: Record<string, number>,
  gestures: Gesture[],
): Promise<ReplayOutcome> {
  const editor = new TreemapEditor(client, sessionId, snapshot, initialLabels);
  for (const gesture of gestures) {
    const state = await editor.apply(gesture);
    if (state.error !== null) {
      throw new Error(`gesture ${gesture.kind} rejected: ${state.error}`);
    }
  }
  const view = editor.state.view;
  if (view === null) throw new Error('no edits applied');
  return { revision: view.revision, sessionFingerprint: view.session_fingerprint };
}
