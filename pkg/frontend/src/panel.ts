/** DOM wiring for the edit panel: sliders, scrubber, preview, commit. */

import type { DirectionInfo, PreviewRequest, ServiceClient } from './api.js';
import { PreviewScheduler } from './preview.js';
import { pollJob } from './poll.js';
import { EditPanelState } from './state.js';

export interface PanelElements {
  sliders: HTMLElement;
  preview: HTMLImageElement;
  scrubber: HTMLInputElement;
  commitButton: HTMLButtonElement;
  toast: HTMLElement;
}

export class EditPanel {
  readonly state: EditPanelState;
  readonly scheduler: PreviewScheduler;
  private revoke: (() => void) | null = null;

  constructor(
    private client: ServiceClient,
    state: EditPanelState,
    private els: PanelElements,
    debounceMs?: number,
  ) {
    this.state = state;
    this.scheduler = new PreviewScheduler(
      client,
      state.sessionId,
      (update) => this.swapPreview(update.blob),
      (err) => this.showToast(err instanceof Error ? err.message : String(err)),
      debounceMs,
    );
  }

  static async mount(
    client: ServiceClient,
    sessionId: string,
    els: PanelElements,
    debounceMs?: number,
  ): Promise<EditPanel> {
    const [directions, status] = await Promise.all([
      client.directions(),
      client.status(sessionId),
    ]);
    const state = new EditPanelState(sessionId, directions);
    state.frameCount = Math.max(status.frames, 1);
    const panel = new EditPanel(client, state, els, debounceMs);
    panel.renderSliders(directions);
    els.scrubber.max = String(state.frameCount - 1);
    els.scrubber.addEventListener('input', () => {
      panel.selectFrame(Number(els.scrubber.value));
    });
    els.commitButton.addEventListener('click', () => void panel.commit());
    await panel.requestPreview(true);
    return panel;
  }

  renderSliders(directions: DirectionInfo[]): void {
    for (const d of directions) {
      const range = this.state.stepRange(d.name);
      const label = document.createElement('label');
      label.textContent = `${d.name} (${d.space})`;
      const input = document.createElement('input');
      input.type = 'range';
      input.min = String(range[0]);
      input.max = String(range[1]);
      input.step = '0.05';
      input.value = '0';
      input.dataset.direction = d.name;
      input.addEventListener('input', () => {
        this.setSlider(d.name, Number(input.value));
      });
      input.addEventListener('change', () => {
        this.setSlider(d.name, Number(input.value), true);
      });
      label.appendChild(input);
      this.els.sliders.appendChild(label);
    }
    const transforms: Array<[keyof typeof this.state.transform, number, number, number]> = [
      ['r', -45, 45, 0.5],
      ['tx', -0.3, 0.3, 0.01],
      ['ty', -0.3, 0.3, 0.01],
    ];
    for (const [key, min, max, step] of transforms) {
      const label = document.createElement('label');
      label.textContent = key;
      const input = document.createElement('input');
      input.type = 'range';
      input.min = String(min);
      input.max = String(max);
      input.step = String(step);
      input.value = '0';
      input.dataset.transform = key;
      input.addEventListener('input', () => {
        this.state.setTransform({ [key]: Number(input.value) });
        this.scheduler.schedule(this.previewRequest());
      });
      label.appendChild(input);
      this.els.sliders.appendChild(label);
    }
  }

  setSlider(name: string, value: number, release = false): void {
    this.state.setSlider(name, value);
    if (release) {
      this.scheduler.flush(this.previewRequest());
    } else {
      this.scheduler.schedule(this.previewRequest());
    }
  }

  selectFrame(index: number): void {
    this.state.selectFrame(index);
    this.scheduler.schedule(this.previewRequest());
  }

  previewRequest(): PreviewRequest {
    const entries = this.state.editSpec();
    const request: PreviewRequest = { frame_index: this.state.frameIndex };
    // Preview renders one direction at a time; the first active slider wins
    // the live preview, commit persists them all.
    if (entries.length > 0) {
      request.direction_name = entries[0].name;
      request.step = entries[0].step;
    }
    if (this.state.hasTransformOverride()) {
      request.params = this.state.transform;
    }
    return request;
  }

  async requestPreview(immediate = false): Promise<void> {
    const req = this.previewRequest();
    if (immediate) {
      this.scheduler.flush(req);
    } else {
      this.scheduler.schedule(req);
    }
  }

  private swapPreview(blob: Blob): void {
    const url = URL.createObjectURL(blob);
    if (this.revoke) this.revoke();
    this.revoke = () => URL.revokeObjectURL(url);
    this.els.preview.src = url;
    this.state.previewUrl = url;
  }

  /** Persist exactly the displayed slider values as the session edit spec. */
  async commit(): Promise<void> {
    try {
      const entries = this.state.editSpec();
      await this.client.commitEdit(this.state.sessionId, entries);
      this.state.markCommitted();
      this.showToast('edit spec committed');
    } catch (err) {
      this.showToast(err instanceof Error ? err.message : String(err));
    }
  }

  async runStage(stage: 'invert' | 'smooth' | 'pti' | 'render' | 'expand'): Promise<void> {
    try {
      const job = await this.client.startStage(this.state.sessionId, stage);
      this.showToast(`${stage} started`);
      await pollJob(this.client, job.id);
      this.showToast(`${stage} finished`);
    } catch (err) {
      this.showToast(err instanceof Error ? err.message : String(err));
    }
  }

  private showToast(message: string): void {
    this.els.toast.textContent = message;
    this.els.toast.classList.add('visible');
    setTimeout(() => this.els.toast.classList.remove('visible'), 4000);
  }
}

/** Entry point: session id comes from the URL; all truth is server-side. */
export async function mountFromLocation(
  client: ServiceClient,
  els: PanelElements,
): Promise<EditPanel> {
  const params = new URLSearchParams(window.location.search);
  const sessionId = params.get('session');
  if (!sessionId) throw new Error('missing ?session=<id> in the URL');
  return EditPanel.mount(client, sessionId, els);
}
