// @vitest-environment happy-dom
import { afterEach, beforeEach, describe, expect, it, vi } from 'vitest';

import type { PreviewRequest, ServiceClient } from '../src/api.js';
import { EditPanel, PanelElements } from '../src/panel.js';

const RECONSTRUCTION = 'reconstruction-fixture-bytes';

class MockService {
  committed: unknown[] = [];

  async directions() {
    return [
      { name: 'age', space: 'W' as const, dim: 8, metadata: { recommended_step_range: [-3, 3] as [number, number] } },
    ];
  }

  async status(_id: string) {
    return {
      id: 'sess',
      kind: 'video' as const,
      frames: 4,
      stages: { preprocess: true, invert: true },
      edit_spec: [],
      jobs: [],
      locked: false,
    };
  }

  /** step 0 / no direction returns the stored reconstruction bytes; any
   * edit or frame change watermarks the payload. */
  async preview(_id: string, req: PreviewRequest): Promise<Blob> {
    if ((req.step ?? 0) === 0 && !req.params && req.frame_index === 0) {
      return new Blob([RECONSTRUCTION]);
    }
    return new Blob([`frame-${req.frame_index};step-${req.step ?? 0}`]);
  }

  async commitEdit(_id: string, entries: unknown[]) {
    this.committed.push(JSON.stringify(entries));
    return entries as never;
  }
}

function makeElements(): PanelElements {
  document.body.innerHTML = `
    <div id="sliders"></div>
    <img id="preview" />
    <input id="scrubber" type="range" min="0" max="0" value="0" />
    <button id="commit"></button>
    <div id="toast"></div>`;
  return {
    sliders: document.getElementById('sliders') as HTMLElement,
    preview: document.getElementById('preview') as HTMLImageElement,
    scrubber: document.getElementById('scrubber') as HTMLInputElement,
    commitButton: document.getElementById('commit') as HTMLButtonElement,
    toast: document.getElementById('toast') as HTMLElement,
  };
}

const blobUrls = new Map<string, Blob>();

beforeEach(() => {
  let counter = 0;
  vi.stubGlobal('URL', {
    ...URL,
    createObjectURL: (blob: Blob) => {
      const url = `blob:mock-${counter++}`;
      blobUrls.set(url, blob);
      return url;
    },
    revokeObjectURL: (url: string) => void blobUrls.delete(url),
  });
});

afterEach(() => {
  vi.unstubAllGlobals();
  blobUrls.clear();
});

async function previewText(panel: EditPanel): Promise<string> {
  const url = panel.state.previewUrl;
  expect(url).not.toBeNull();
  const blob = blobUrls.get(url as string);
  expect(blob).toBeDefined();
  return await (blob as Blob).text();
}

describe('EditPanel', () => {
  it('all sliders at zero shows exactly the reconstruction fixture', async () => {
    const service = new MockService();
    const panel = await EditPanel.mount(
      service as unknown as ServiceClient, 'sess', makeElements(), 1,
    );
    await vi.waitFor(async () => {
      expect(await previewText(panel)).toBe(RECONSTRUCTION);
    });
  });

  it('scrubbing updates the frame watermark', async () => {
    const service = new MockService();
    const panel = await EditPanel.mount(
      service as unknown as ServiceClient, 'sess', makeElements(), 1,
    );
    panel.selectFrame(2);
    await vi.waitFor(async () => {
      expect(await previewText(panel)).toContain('frame-2');
    });
  });

  it('slider edits watermark the step and commit persists displayed values', async () => {
    const service = new MockService();
    const panel = await EditPanel.mount(
      service as unknown as ServiceClient, 'sess', makeElements(), 1,
    );
    panel.setSlider('age', 1.5, true);
    await vi.waitFor(async () => {
      expect(await previewText(panel)).toContain('step-1.5');
    });
    await panel.commit();
    expect(service.committed).toEqual([JSON.stringify([{ name: 'age', step: 1.5 }])]);
    expect(panel.state.dirty).toBe(false);
    // Re-committing identical state persists an identical spec.
    await panel.commit();
    expect(service.committed[1]).toBe(service.committed[0]);
  });

  it('slider DOM elements carry the catalog ranges', async () => {
    const service = new MockService();
    const els = makeElements();
    await EditPanel.mount(service as unknown as ServiceClient, 'sess', els, 1);
    const slider = els.sliders.querySelector('input[data-direction="age"]') as HTMLInputElement;
    expect(slider.min).toBe('-3');
    expect(slider.max).toBe('3');
    const scrub = els.scrubber;
    expect(scrub.max).toBe('3');
  });
});
