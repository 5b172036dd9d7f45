import { describe, expect, it } from 'vitest';

import { ViewTransform } from '../src/transform.js';

describe('ViewTransform', () => {
  it('round-trips points within one screen pixel after arbitrary pan/zoom', () => {
    const view = new ViewTransform();
    view.fit(5456, 3632, 1600, 1000);
    let seed = 42;
    const rand = () => {
      seed = (seed * 1103515245 + 12345) % 2 ** 31;
      return seed / 2 ** 31;
    };
    for (let step = 0; step < 200; step++) {
      if (rand() < 0.5) {
        view.zoomAt({ x: rand() * 1600, y: rand() * 1000 }, rand() < 0.5 ? 1.25 : 0.8);
      } else {
        view.panBy(rand() * 80 - 40, rand() * 80 - 40);
      }
      const imagePoint = { x: rand() * 5456, y: rand() * 3632 };
      const back = view.toImage(view.toScreen(imagePoint));
      const screenError = Math.hypot(
        (back.x - imagePoint.x) * view.scale,
        (back.y - imagePoint.y) * view.scale,
      );
      expect(screenError).toBeLessThan(1);
    }
  });

  it('zoomAt keeps the anchor fixed', () => {
    const view = new ViewTransform(0.3, 25, 40);
    const anchor = { x: 321, y: 654 };
    const before = view.toImage(anchor);
    view.zoomAt(anchor, 2.5);
    const after = view.toImage(anchor);
    expect(after.x).toBeCloseTo(before.x, 9);
    expect(after.y).toBeCloseTo(before.y, 9);
  });

  it('fit centers the image in the viewport', () => {
    const view = new ViewTransform();
    view.fit(1000, 500, 800, 800);
    const topLeft = view.toScreen({ x: 0, y: 0 });
    const bottomRight = view.toScreen({ x: 1000, y: 500 });
    expect(topLeft.x).toBe(0);
    expect(bottomRight.x).toBe(800);
    expect(topLeft.y).toBeCloseTo(800 - bottomRight.y, 9); // vertically centered
  });
});
