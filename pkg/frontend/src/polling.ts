// Polling state machine for pending consultations. One poller per pending
// transcript: fetch, then reschedule with backoff until the job reaches a
// terminal status, the client cap elapses, or the caller cancels. No timer
// may survive any of those three exits.

import type { ConsultationJob } from "./types.js";

export interface PollerTimers {
  setTimer: (fn: () => void, ms: number) => unknown;
  clearTimer: (handle: unknown) => void;
  now: () => number;
}

export interface PollerOptions {
  initialIntervalMs?: number;
  backoffFactor?: number;
  maxIntervalMs?: number;
  capMs?: number;
  timers?: PollerTimers;
}

export type PollOutcome =
  | { kind: "terminal"; job: ConsultationJob }
  | { kind: "timeout"; elapsedMs: number }
  | { kind: "error"; error: unknown }
  | { kind: "cancelled" };

export interface PollHandle {
  done: Promise<PollOutcome>;
  cancel: () => void;
}

const DEFAULTS = {
  initialIntervalMs: 2_000,
  backoffFactor: 1.5,
  maxIntervalMs: 15_000,
  capMs: 5 * 60_000,
};

const REAL_TIMERS: PollerTimers = {
  setTimer: (fn, ms) => setTimeout(fn, ms),
  clearTimer: (handle) => clearTimeout(handle as Parameters<typeof clearTimeout>[0]),
  now: () => Date.now(),
};

export function isTerminal(status: ConsultationJob["status"]): boolean {
  return status === "complete" || status === "failed";
}

export function pollConsultation(
  fetchJob: (transcriptId: string) => Promise<ConsultationJob>,
  transcriptId: string,
  onUpdate: (job: ConsultationJob) => void,
  options: PollerOptions = {},
): PollHandle {
  const { initialIntervalMs, backoffFactor, maxIntervalMs, capMs } = {
    ...DEFAULTS,
    ...options,
  };
  const timers = options.timers ?? REAL_TIMERS;

  let timer: unknown = null;
  let settled = false;
  let interval = initialIntervalMs;
  const startedAt = timers.now();

  let resolveDone: (outcome: PollOutcome) => void;
  const done = new Promise<PollOutcome>((resolve) => {
    resolveDone = resolve;
  });

  const settle = (outcome: PollOutcome) => {
    if (settled) return;
    settled = true;
    if (timer !== null) {
      timers.clearTimer(timer);
      timer = null;
    }
    resolveDone(outcome);
  };

  const tick = async () => {
    timer = null;
    let job: ConsultationJob;
    try {
      job = await fetchJob(transcriptId);
    } catch (error) {
      settle({ kind: "error", error });
      return;
    }
    if (settled) return; // cancelled while the request was in flight
    onUpdate(job);
    if (isTerminal(job.status)) {
      settle({ kind: "terminal", job });
      return;
    }
    const elapsed = timers.now() - startedAt;
    if (elapsed >= capMs) {
      settle({ kind: "timeout", elapsedMs: elapsed });
      return;
    }
    timer = timers.setTimer(tick, interval);
    interval = Math.min(Math.round(interval * backoffFactor), maxIntervalMs);
  };

  void tick(); // first fetch is immediate; the 202 poll URL is already known

  return {
    done,
    cancel: () => settle({ kind: "cancelled" }),
  };
}
