/** Latest-wins dispatch: one request in flight, one pending slot.
 *
 * While a request is running, new submissions overwrite the single
 * pending slot; when the running request settles, the latest pending
 * submission (if any) is dispatched. Intermediate submissions are
 * dropped, which is what an impatient clicker wants.
 */

export class LatestWins<A, R> {
  private running = false;
  private pending: A | null = null;

  constructor(
    private readonly worker: (arg: A) => Promise<R>,
    private readonly onResult: (arg: A, result: R) => void,
    private readonly onError: (arg: A, error: unknown) => void = () => {},
  ) {}

  get busy(): boolean {
    return this.running;
  }

  get hasPending(): boolean {
    return this.pending !== null;
  }

  submit(arg: A): void {
    if (this.running) {
      this.pending = arg;
      return;
    }
    void this.dispatch(arg);
  }

  private async dispatch(arg: A): Promise<void> {
    this.running = true;
    try {
      const result = await this.worker(arg);
      this.onResult(arg, result);
    } catch (error) {
      this.onError(arg, error);
    } finally {
      this.running = false;
      const next = this.pending;
      this.pending = null;
      if (next !== null) {
        void this.dispatch(next);
      }
    }
  }
}
