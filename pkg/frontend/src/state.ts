// Central view state: all async fetches pass through a request-version
// guard so an out-of-order response can never overwrite newer state.

export interface ViewState {
  sessionId: string | null;
  date: string | null;
  sizingMetric: string;
  selectedCommunity: number | null;
  selectedNode: string | null;
}

export function initialViewState(): ViewState {
  return {
    sessionId: null,
    date: null,
    sizingMetric: 'authority',
    selectedCommunity: null,
    selectedNode: null,
  };
}

export class VersionedSlot<T> {
  private version = 0;
  private value: T | null = null;

  current(): T | null {
    return this.value;
  }

  /** Start a fetch; the returned commit is a no-op if a newer one began. */
  begin(): (value: T) => boolean {
    const ticket = ++this.version;
    return (value: T) => {
      if (ticket !== this.version) return false;
      this.value = value;
      return true;
    };
  }
}
