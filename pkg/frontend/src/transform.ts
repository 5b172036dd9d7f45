// Pan/zoom view transform between native image pixels and screen pixels.
// Pure and invertible: overlay geometry is always derived from the native
// coordinates, never accumulated in screen space, so corners keep tracking
// image pixels at any zoom.

import type { Point } from './types.js';

export class ViewTransform {
  constructor(
    public scale = 1,
    public offsetX = 0,
    public offsetY = 0,
  ) {}

  toScreen(p: Point): Point {
    return { x: p.x * this.scale + this.offsetX, y: p.y * this.scale + this.offsetY };
  }

  toImage(p: Point): Point {
    return { x: (p.x - this.offsetX) / this.scale, y: (p.y - this.offsetY) / this.scale };
  }

  /** Zoom by `factor` keeping the screen point `anchor` fixed. */
  zoomAt(anchor: Point, factor: number): void {
    const before = this.toImage(anchor);
    this.scale *= factor;
    this.offsetX = anchor.x - before.x * this.scale;
    this.offsetY = anchor.y - before.y * this.scale;
  }

  panBy(dx: number, dy: number): void {
    this.offsetX += dx;
    this.offsetY += dy;
  }

  /** Fit the whole image into the viewport, centered. Damage at the very
   *  blade tip must be reachable, so nothing is ever cropped at fit. */
  fit(imageW: number, imageH: number, viewW: number, viewH: number): void {
    this.scale = Math.min(viewW / imageW, viewH / imageH);
    this.offsetX = (viewW - imageW * this.scale) / 2;
    this.offsetY = (viewH - imageH * this.scale) / 2;
  }
}
