/** Serialization helpers for viewport traffic: at most one request in
 * flight, newer intents replace queued ones, stale responses are dropped. */

export type Task<T> = (signal: AbortSignal) => Promise<T>;

export class InFlightGate<T> {
  private controller: AbortController | null = null;
  private pending: Task<T> | null = null;
  private running = false;
  /** count of requests actually dispatched, for tests of the debounce contract */
  dispatched = 0;

  constructor(private readonly onResult: (value: T) => void,
              private readonly onError: (err: unknown) => void = () => {}) {}

  /** Replace whatever is queued with `task`; run it as soon as the slot frees. */
  request(task: Task<T>): void {
    this.pending = task;
    if (!this.running) void this.drain();
  }

  /** Abort the in-flight request and drop anything queued. */
  cancel(): void {
    this.pending = null;
    this.controller?.abort();
  }

  get inFlight(): boolean {
    return this.running;
  }

  private async drain(): Promise<void> {
    this.running = true;
    try {
      while (this.pending) {
        const task = this.pending;
        this.pending = null;
        this.controller = new AbortController();
        this.dispatched += 1;
        try {
          const value = await task(this.controller.signal);
          // a newer request queued during the await supersedes this result
          if (!this.pending) this.onResult(value);
        } catch (err) {
          if (!(err instanceof DOMException && err.name === "AbortError")) {
            this.onError(err);
          }
        }
      }
    } finally {
      this.running = false;
      this.controller = null;
    }
  }
}

/** Trailing-edge debounce that forwards into a gate-friendly callback. */
export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  waitMs: number,
): (...args: A) => void {
  let timer: ReturnType<typeof setTimeout> | null = null;
  return (...args: A) => {
    if (timer !== null) clearTimeout(timer);
    timer = setTimeout(() => {
      timer = null;
      fn(...args);
    }, waitMs);
  };
}
