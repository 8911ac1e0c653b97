/** Panel state: slider values, selected frame, preview bookkeeping.
 *
 * All truth lives in the service; this state only mirrors the controls and
 * the last acknowledged preview. Slider values are clamped to each
 * direction's recommended range, transform sliders to configured bounds.
 */

import type { DirectionInfo, EditSpecEntry, TransformParams } from './api.js';

export interface TransformBounds {
  r: [number, number];
  tx: [number, number];
  ty: [number, number];
}

export const DEFAULT_TRANSFORM_BOUNDS: TransformBounds = {
  r: [-45, 45],
  tx: [-0.3, 0.3],
  ty: [-0.3, 0.3],
};

const DEFAULT_STEP_RANGE: [number, number] = [-5, 5];

function clamp(value: number, range: [number, number]): number {
  return Math.min(Math.max(value, range[0]), range[1]);
}

export class EditPanelState {
  readonly sliders = new Map<string, number>();
  transform: TransformParams = { r: 0, tx: 0, ty: 0 };
  frameIndex = 0;
  frameCount = 1;
  previewUrl: string | null = null;
  dirty = false;
  private ranges = new Map<string, [number, number]>();

  constructor(
    public readonly sessionId: string,
    directions: DirectionInfo[],
    private bounds: TransformBounds = DEFAULT_TRANSFORM_BOUNDS,
  ) {
    for (const d of directions) {
      const range = d.metadata.recommended_step_range ?? DEFAULT_STEP_RANGE;
      this.ranges.set(d.name, [range[0], range[1]]);
      this.sliders.set(d.name, 0);
    }
  }

  stepRange(name: string): [number, number] {
    return this.ranges.get(name) ?? DEFAULT_STEP_RANGE;
  }

  setSlider(name: string, value: number): number {
    if (!this.sliders.has(name)) throw new Error(`unknown direction ${name}`);
    const clamped = clamp(value, this.stepRange(name));
    this.sliders.set(name, clamped);
    this.dirty = true;
    return clamped;
  }

  setTransform(partial: Partial<TransformParams>): TransformParams {
    this.transform = {
      r: clamp(partial.r ?? this.transform.r, this.bounds.r),
      tx: clamp(partial.tx ?? this.transform.tx, this.bounds.tx),
      ty: clamp(partial.ty ?? this.transform.ty, this.bounds.ty),
    };
    this.dirty = true;
    return this.transform;
  }

  selectFrame(index: number): number {
    this.frameIndex = Math.min(Math.max(index, 0), this.frameCount - 1);
    return this.frameIndex;
  }

  /** Active slider values, in catalog order, zeros dropped. */
  editSpec(): EditSpecEntry[] {
    const entries: EditSpecEntry[] = [];
    for (const [name, step] of this.sliders) {
      if (step !== 0) entries.push({ name, step });
    }
    return entries;
  }

  hasTransformOverride(): boolean {
    const { r, tx, ty } = this.transform;
    return r !== 0 || tx !== 0 || ty !== 0;
  }

  markCommitted(): void {
    this.dirty = false;
  }
}
