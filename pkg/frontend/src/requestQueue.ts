/** Debounced single-in-flight request scheduling.
 *
 * Rapid what-if slider drags collapse into one request per quiet period,
 * and a new request never starts while one is outstanding; the newest
 * pending payload wins once the in-flight call settles.
 */

export class DebouncedRequestQueue<TArg, TResult> {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private inFlight = false;
  private pending: TArg | null = null;

  constructor(
    private readonly send: (arg: TArg) => Promise<TResult>,
    private readonly onResult: (result: TResult, arg: TArg) => void,
    private readonly onError: (error: unknown) => void,
    private readonly debounceMs = 250,
  ) {}

  schedule(arg: TArg): void {
    this.pending = arg;
    if (this.timer !== null) {
      clearTimeout(this.timer);
    }
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.flush();
    }, this.debounceMs);
  }

  private async flush(): Promise<void> {
    if (this.inFlight || this.pending === null) {
      return;
    }
    const arg = this.pending;
    this.pending = null;
    this.inFlight = true;
    try {
      const result = await this.send(arg);
      this.onResult(result, arg);
    } catch (error) {
      this.onError(error);
    } finally {
      this.inFlight = false;
      if (this.pending !== null && this.timer === null) {
        void this.flush();
      }
    }
  }
}
