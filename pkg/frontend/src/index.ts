import { ServiceClient } from './api.js';
import { mountFromLocation, PanelElements } from './panel.js';

function requireEl<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
}

export async function bootstrap(baseUrl = ''): Promise<void> {
  const els: PanelElements = {
    sliders: requireEl('sliders'),
    preview: requireEl<HTMLImageElement>('preview'),
    scrubber: requireEl<HTMLInputElement>('scrubber'),
    commitButton: requireEl<HTMLButtonElement>('commit'),
    toast: requireEl('toast'),
  };
  await mountFromLocation(new ServiceClient(baseUrl), els);
}

if (typeof document !== 'undefined' && document.readyState !== 'loading') {
  void bootstrap();
} else if (typeof document !== 'undefined') {
  document.addEventListener('DOMContentLoaded', () => void bootstrap());
}
