/** Box geometry in intrinsic image pixels. The view layer owns all
 * zoom/pan math; nothing here knows about screens. */

export interface EditBox {
  id: number;
  x: number;
  y: number;
  w: number;
  h: number;
  /** null for boxes the annotator drew from scratch */
  confidence: number | null;
  source: "proposed" | "added";
}

export interface Bounds {
  width: number;
  height: number;
}

export const MIN_BOX_SIZE = 4;

/** Clamp a box so it stays inside the image with a sane minimum size. */
export function clampBox(
  box: { x: number; y: number; w: number; h: number },
  bounds: Bounds,
): { x: number; y: number; w: number; h: number } {
  const w = Math.min(Math.max(box.w, MIN_BOX_SIZE), bounds.width);
  const h = Math.min(Math.max(box.h, MIN_BOX_SIZE), bounds.height);
  const x = Math.min(Math.max(box.x, 0), bounds.width - w);
  const y = Math.min(Math.max(box.y, 0), bounds.height - h);
  return { x, y, w, h };
}

export function hitTest(boxes: EditBox[], px: number, py: number): EditBox | null {
  // topmost (last drawn) wins
  for (let i = boxes.length - 1; i >= 0; i--) {
    const b = boxes[i];
    if (px >= b.x && px <= b.x + b.w && py >= b.y && py <= b.y + b.h) return b;
  }
  return null;
}

export type Handle = "nw" | "ne" | "sw" | "se";

export function handleAt(box: EditBox, px: number, py: number, radius: number): Handle | null {
  const corners: [Handle, number, number][] = [
    ["nw", box.x, box.y],
    ["ne", box.x + box.w, box.y],
    ["sw", box.x, box.y + box.h],
    ["se", box.x + box.w, box.y + box.h],
  ];
  for (const [handle, cx, cy] of corners) {
    if (Math.abs(px - cx) <= radius && Math.abs(py - cy) <= radius) return handle;
  }
  return null;
}

/** Resize by dragging a corner handle to (px, py), normalizing negatives. */
export function resizeToHandle(
  box: { x: number; y: number; w: number; h: number },
  handle: Handle,
  px: number,
  py: number,
): { x: number; y: number; w: number; h: number } {
  let x1 = box.x;
  let y1 = box.y;
  let x2 = box.x + box.w;
  let y2 = box.y + box.h;
  if (handle === "nw" || handle === "sw") x1 = px;
  else x2 = px;
  if (handle === "nw" || handle === "ne") y1 = py;
  else y2 = py;
  return {
    x: Math.min(x1, x2),
    y: Math.min(y1, y2),
    w: Math.abs(x2 - x1),
    h: Math.abs(y2 - y1),
  };
}
