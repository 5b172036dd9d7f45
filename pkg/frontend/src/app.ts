// Browser bootstrap for the analyst console.
//
// URL parameters:
//   ?images=imgA,imgB,...  review queue
//   &stage=1|2             QC stage (default 1)
//   &api=<base url>        QC service base (default: same origin)
//
// Mouse: drag pans, wheel zooms at the cursor, click selects a clue.
// Keys: Enter convert, Delete dismiss, Space next image, d toggles
// polygon-draw mode (click vertices, Enter to finish).

import { QcApiClient } from './api.js';
import { makeKeyHandler } from './keyboard.js';
import { clueAt, renderOverlay } from './overlay.js';
import { ReviewController, type QcStage } from './session.js';
import { ViewTransform } from './transform.js';
import type { Point } from './types.js';

interface AppElements {
  canvas: HTMLCanvasElement;
  image: HTMLImageElement;
  status: HTMLElement;
  toast: HTMLElement;
}

function getElements(): AppElements {
  return {
    canvas: document.getElementById('overlay') as HTMLCanvasElement,
    image: document.getElementById('picture') as HTMLImageElement,
    status: document.getElementById('status') as HTMLElement,
    toast: document.getElementById('toast') as HTMLElement,
  };
}

export async function startApp(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const queue = (params.get('images') ?? '').split(',').filter(Boolean);
  const stage = (Number(params.get('stage') ?? '1') === 2 ? 2 : 1) as QcStage;
  const baseUrl = params.get('api') ?? '';
  const els = getElements();
  const ctx = els.canvas.getContext('2d');
  if (!ctx) throw new Error('canvas 2d context unavailable');

  const view = new ViewTransform();
  const api = new QcApiClient(baseUrl, { actor: params.get('actor') ?? 'analyst' });
  const controller = new ReviewController(api, {
    onToast: (message) => {
      els.toast.textContent = message;
      els.toast.classList.add('visible');
      setTimeout(() => els.toast.classList.remove('visible'), 2500);
    },
    imageLoader: (imageId) =>
      new Promise((resolve, reject) => {
        els.image.onload = () => resolve(undefined);
        els.image.onerror = () => reject(new Error('unfetchable'));
        // picture bytes never pass through the QC service; a reverse proxy
        // maps this path onto the job's blob store (file_ref)
        els.image.src = `${params.get('blobs') ?? baseUrl + '/blobs'}/${encodeURIComponent(imageId)}`;
      }),
  });
  await controller.loadTransitions().catch(() => undefined);

  let cursor = 0;
  let drawMode = false;
  let pendingVertices: Point[] = [];

  function redraw(): void {
    renderOverlay(ctx as unknown as import('./overlay.js').Draw2D, view, {
      clues: controller.clues,
      annotations: controller.annotations,
      selectedClueId: controller.selectedClueId,
      viewWidth: els.canvas.width,
      viewHeight: els.canvas.height,
    });
    const open = controller.session;
    els.status.textContent = controller.imageError
      ? controller.imageError
      : open
        ? `${open.imageId} — QC${open.stage} — ${controller.clues.filter((c) => c.status === 'proposed').length} clues open`
        : 'no image open';
  }

  async function show(index: number): Promise<void> {
    cursor = index;
    const imageId = queue[cursor];
    if (!imageId) return;
    await controller.openImage(imageId, stage);
    if (!controller.imageError) {
      view.fit(els.image.naturalWidth || 1, els.image.naturalHeight || 1, els.canvas.width, els.canvas.height);
    }
    redraw();
  }

  const onKey = makeKeyHandler({
    controller,
    nextImage: async () => {
      if (cursor + 1 < queue.length) await show(cursor + 1);
    },
  });

  window.addEventListener('keydown', (event) => {
    if (event.key === 'd') {
      drawMode = !drawMode;
      pendingVertices = [];
      return;
    }
    if (drawMode && event.key === 'Enter') {
      if (pendingVertices.length >= 3) {
        const flat = pendingVertices.flatMap((p) => [p.x, p.y]);
        void controller.drawAnnotation(flat).then(redraw);
      }
      drawMode = false;
      pendingVertices = [];
      return;
    }
    void onKey(event.key).then((handled) => {
      if (handled) redraw();
    });
  });

  let dragging = false;
  let last: Point = { x: 0, y: 0 };
  els.canvas.addEventListener('pointerdown', (event) => {
    dragging = true;
    last = { x: event.offsetX, y: event.offsetY };
  });
  els.canvas.addEventListener('pointermove', (event) => {
    if (!dragging) return;
    view.panBy(event.offsetX - last.x, event.offsetY - last.y);
    last = { x: event.offsetX, y: event.offsetY };
    redraw();
  });
  els.canvas.addEventListener('pointerup', (event) => {
    dragging = false;
    const imagePoint = view.toImage({ x: event.offsetX, y: event.offsetY });
    if (drawMode) {
      pendingVertices.push(imagePoint);
      return;
    }
    const hit = clueAt(controller.clues, imagePoint);
    if (hit) {
      controller.selectedClueId = hit.id;
      redraw();
    }
  });
  els.canvas.addEventListener('wheel', (event) => {
    event.preventDefault();
    const factor = event.deltaY < 0 ? 1.15 : 1 / 1.15;
    view.zoomAt({ x: event.offsetX, y: event.offsetY }, factor);
    redraw();
  });

  if (queue.length > 0) {
    await show(0);
  } else {
    els.status.textContent = 'no images in queue (use ?images=...)';
  }
}

if (typeof document !== 'undefined' && document.getElementById('overlay')) {
  void startApp();
}
