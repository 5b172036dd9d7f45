// Canvas overlay rendering: clues as blue rotated rectangles, approved and
// drawn annotations as green polygons. Drawing goes through a minimal 2D
// interface so it can be exercised without a browser canvas.

import { ViewTransform } from './transform.js';
import { polygonPoints, type AnnotationWire, type ClueWire } from './types.js';

export const CLUE_COLOR = '#2f7bf5';
export const CLUE_SELECTED_COLOR = '#8fb8ff';
export const ANNOTATION_COLOR = '#1faa4e';

export interface Draw2D {
  strokeStyle: string;
  fillStyle: string;
  lineWidth: number;
  globalAlpha: number;
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
  stroke(): void;
}

export interface OverlayState {
  clues: ClueWire[];
  annotations: AnnotationWire[];
  selectedClueId: string | null;
  viewWidth: number;
  viewHeight: number;
}

function tracePath(ctx: Draw2D, view: ViewTransform, flat: number[]): void {
  const pts = polygonPoints(flat).map((p) => view.toScreen(p));
  if (pts.length === 0) return;
  ctx.beginPath();
  ctx.moveTo(pts[0]!.x, pts[0]!.y);
  for (const p of pts.slice(1)) ctx.lineTo(p.x, p.y);
  ctx.closePath();
  ctx.stroke();
}

/** Redraws the full overlay. Only clues still awaiting a verdict are shown
 *  as clues; converted ones live on as green annotations. */
export function renderOverlay(ctx: Draw2D, view: ViewTransform, state: OverlayState): void {
  ctx.clearRect(0, 0, state.viewWidth, state.viewHeight);
  ctx.globalAlpha = 1;

  ctx.lineWidth = 2;
  for (const clue of state.clues) {
    if (clue.status !== 'proposed') continue;
    ctx.strokeStyle = clue.id === state.selectedClueId ? CLUE_SELECTED_COLOR : CLUE_COLOR;
    tracePath(ctx, view, clue.corners);
  }

  ctx.strokeStyle = ANNOTATION_COLOR;
  for (const annotation of state.annotations) {
    tracePath(ctx, view, annotation.polygon);
  }
}

/** Hit test in native coordinates: inside the clue's (convex) rectangle. */
export function clueAt(clues: ClueWire[], p: { x: number; y: number }): ClueWire | null {
  for (const clue of clues) {
    if (clue.status !== 'proposed') continue;
    const pts = polygonPoints(clue.corners);
    let inside = true;
    for (let i = 0; i < pts.length; i++) {
      const a = pts[i]!;
      const b = pts[(i + 1) % pts.length]!;
      const cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
      if (cross < 0) {
        inside = false;
        break;
      }
    }
    if (inside) return clue;
  }
  return null;
}
