// Client-side session state: which case is open, which consultations were
// started in this tab, and which pollers still run. The engine owns all
// persistence; this state is deliberately rebuildable from the API.

export interface TranscriptRef {
  transcriptId: string;
  mode: string;
  parentTranscriptId: string | null;
}

export interface Cancellable {
  cancel(): void;
}

export class ConsoleSession {
  caseId: string | null = null;
  private refs: TranscriptRef[] = [];
  private pollers = new Map<string, Cancellable>();

  openCase(caseId: string): void {
    if (caseId !== this.caseId) {
      this.caseId = caseId;
      this.refs = [];
      this.cancelAll();
    }
  }

  addTranscript(ref: TranscriptRef): void {
    if (!this.refs.some((existing) => existing.transcriptId === ref.transcriptId)) {
      this.refs.push(ref);
    }
  }

  // Root consultation first, then follow-ups in the order they chain off it.
  chain(rootId: string): TranscriptRef[] {
    const out: TranscriptRef[] = [];
    const queue = [rootId];
    while (queue.length) {
      const id = queue.shift();
      if (id === undefined) break;
      const ref = this.refs.find((r) => r.transcriptId === id);
      if (ref) out.push(ref);
      for (const child of this.refs) {
        if (child.parentTranscriptId === id) queue.push(child.transcriptId);
      }
    }
    return out;
  }

  transcripts(): readonly TranscriptRef[] {
    return this.refs;
  }

  trackPoller(transcriptId: string, poller: Cancellable): void {
    this.pollers.get(transcriptId)?.cancel();
    this.pollers.set(transcriptId, poller);
  }

  releasePoller(transcriptId: string): void {
    this.pollers.delete(transcriptId);
  }

  cancelAll(): void {
    for (const poller of this.pollers.values()) poller.cancel();
    this.pollers.clear();
  }
}
