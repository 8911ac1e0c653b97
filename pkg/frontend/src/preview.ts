/** Debounced preview requests with a stale-response guard.
 *
 * Slider movement schedules a preview after a quiet period (150 ms); at most
 * one request is in flight at a time, and responses carry a monotonically
 * increasing sequence number so an out-of-order arrival can never overwrite
 * a newer preview. Requests issued during a drag use a reduced resolution;
 * the release flush renders full size.
 */

import type { PreviewRequest, ServiceClient } from './api.js';

export const DEBOUNCE_MS = 150;

export interface PreviewUpdate {
  seq: number;
  blob: Blob;
  request: PreviewRequest;
}

export class PreviewScheduler {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private nextSeq = 1;
  private appliedSeq = 0;
  private inFlightSeq: number | null = null;
  private pending: PreviewRequest | null = null;
  /** Requests actually sent; exposed for tests and diagnostics. */
  sent = 0;

  constructor(
    private client: ServiceClient,
    private sessionId: string,
    private onUpdate: (update: PreviewUpdate) => void,
    private onError: (err: unknown) => void = () => {},
    private debounceMs: number = DEBOUNCE_MS,
    public previewResolution: number | null = null,
  ) {}

  get inFlight(): boolean {
    return this.inFlightSeq !== null;
  }

  /** Schedule a preview after the debounce window (drag updates). */
  schedule(request: PreviewRequest): void {
    this.pending = this.withResolution(request);
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      this.dispatch();
    }, this.debounceMs);
  }

  /** Bypass the debounce (slider release): full-resolution render. */
  flush(request: PreviewRequest): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.pending = request;
    this.dispatch();
  }

  private withResolution(request: PreviewRequest): PreviewRequest {
    if (this.previewResolution === null) return request;
    return { ...request, resolution: this.previewResolution };
  }

  private dispatch(): void {
    if (this.pending === null) return;
    if (this.inFlightSeq !== null) return; // picked up on completion
    const request = this.pending;
    this.pending = null;
    const seq = this.nextSeq++;
    this.inFlightSeq = seq;
    this.sent += 1;
    this.client
      .preview(this.sessionId, request)
      .then((blob) => this.complete(seq, { seq, blob, request }))
      .catch((err) => {
        this.complete(seq, null);
        this.onError(err);
      });
  }

  private complete(seq: number, update: PreviewUpdate | null): void {
    if (this.inFlightSeq === seq) this.inFlightSeq = null;
    if (update !== null && seq > this.appliedSeq) {
      this.appliedSeq = seq;
      this.onUpdate(update);
    }
    // A newer pending request queued during flight goes out now.
    if (this.pending !== null) this.dispatch();
  }

  /** Inject a completion out of band (tests exercise the ordering guard). */
  applyIfFresh(update: PreviewUpdate): boolean {
    if (update.seq <= this.appliedSeq) return false;
    this.appliedSeq = update.seq;
    this.onUpdate(update);
    return true;
  }
}
