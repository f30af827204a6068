/** Canvas rendering and the zoom/pan transform. Boxes stay in image
 * pixels; only this layer converts to screen space. */

import type { EditBox } from "./boxes.js";
import { FLAG_THRESHOLD } from "./types.js";

export interface Viewport {
  scale: number;
  offsetX: number;
  offsetY: number;
}

export function screenFromImage(v: Viewport, x: number, y: number): [number, number] {
  return [x * v.scale + v.offsetX, y * v.scale + v.offsetY];
}

export function imageFromScreen(v: Viewport, sx: number, sy: number): [number, number] {
  return [(sx - v.offsetX) / v.scale, (sy - v.offsetY) / v.scale];
}

/** Viewport that letterboxes the image into the canvas. */
export function fitViewport(
  imageW: number,
  imageH: number,
  canvasW: number,
  canvasH: number,
): Viewport {
  const scale = Math.min(canvasW / imageW, canvasH / imageH);
  return {
    scale,
    offsetX: (canvasW - imageW * scale) / 2,
    offsetY: (canvasH - imageH * scale) / 2,
  };
}

export function zoomAt(v: Viewport, sx: number, sy: number, factor: number): Viewport {
  const scale = Math.min(Math.max(v.scale * factor, 0.1), 20);
  const ratio = scale / v.scale;
  return {
    scale,
    offsetX: sx - (sx - v.offsetX) * ratio,
    offsetY: sy - (sy - v.offsetY) * ratio,
  };
}

const COLOR_CONFIDENT = "#3fb950";
const COLOR_FLAGGED = "#f85149";
const COLOR_ADDED = "#58a6ff";
const COLOR_SELECTED = "#f2cc60";

function boxColor(box: EditBox): string {
  if (box.source === "added") return COLOR_ADDED;
  if (box.confidence !== null && box.confidence < FLAG_THRESHOLD) return COLOR_FLAGGED;
  return COLOR_CONFIDENT;
}

export function drawScene(
  ctx: CanvasRenderingContext2D,
  image: CanvasImageSource | null,
  imageSize: { width: number; height: number },
  boxes: EditBox[],
  selectedId: number | null,
  v: Viewport,
): void {
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  ctx.save();
  ctx.translate(v.offsetX, v.offsetY);
  ctx.scale(v.scale, v.scale);
  if (image) {
    ctx.drawImage(image, 0, 0, imageSize.width, imageSize.height);
  } else {
    ctx.fillStyle = "#161b22";
    ctx.fillRect(0, 0, imageSize.width, imageSize.height);
  }

  for (const box of boxes) {
    const selected = box.id === selectedId;
    ctx.lineWidth = (selected ? 3 : 1.5) / v.scale;
    ctx.strokeStyle = selected ? COLOR_SELECTED : boxColor(box);
    ctx.strokeRect(box.x, box.y, box.w, box.h);

    const label = box.confidence === null ? "new" : box.confidence.toFixed(2);
    ctx.font = `${12 / v.scale}px sans-serif`;
    const pad = 2 / v.scale;
    const width = ctx.measureText(label).width + 2 * pad;
    ctx.fillStyle = selected ? COLOR_SELECTED : boxColor(box);
    ctx.fillRect(box.x, box.y - 14 / v.scale, width, 14 / v.scale);
    ctx.fillStyle = "#0d1117";
    ctx.fillText(label, box.x + pad, box.y - 3.5 / v.scale);

    if (selected) {
      const r = 4 / v.scale;
      ctx.fillStyle = COLOR_SELECTED;
      for (const [cx, cy] of [
        [box.x, box.y],
        [box.x + box.w, box.y],
        [box.x, box.y + box.h],
        [box.x + box.w, box.y + box.h],
      ]) {
        ctx.fillRect(cx - r, cy - r, 2 * r, 2 * r);
      }
    }
  }
  ctx.restore();
}
