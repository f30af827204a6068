/** Review session state machine: one leased item, its edited boxes, an
 * undo stack that replays back to the served state, and submission.
 *
 * Box coordinates live in intrinsic image pixels from load to submit, so
 * verdicts are exact regardless of how the canvas is zoomed. */

import type { QueueClient } from "./api.js";
import { clampBox, EditBox, Bounds } from "./boxes.js";
import type { ReviewItem, ReviewVerdict } from "./types.js";

export type SessionPhase = "idle" | "reviewing" | "submitting";

export interface SessionEvents {
  onItem?: (item: ReviewItem) => void;
  onIdle?: () => void;
  onLeaseExpired?: (item: ReviewItem) => void;
  onConflict?: (item: ReviewItem) => void;
}

export class ReviewSession {
  phase: SessionPhase = "idle";
  item: ReviewItem | null = null;
  selectedId: number | null = null;

  private boxes: EditBox[] = [];
  private undoStack: EditBox[][] = [];
  private bounds: Bounds = { width: 640, height: 640 };
  private nextId = 1;
  private leaseDeadline: number | null = null;

  constructor(
    private client: QueueClient,
    private annotatorId: string,
    private leaseSeconds: number | null = null,
    private events: SessionEvents = {},
    private now: () => number = () => Date.now(),
  ) {}

  /** Lease the next item and reset edit state; false when queue is empty. */
  async loadNext(): Promise<boolean> {
    const item = await this.client.next();
    if (item === null) {
      this.phase = "idle";
      this.item = null;
      this.boxes = [];
      this.undoStack = [];
      this.events.onIdle?.();
      return false;
    }
    this.item = item;
    this.phase = "reviewing";
    this.selectedId = null;
    this.nextId = 1;
    this.boxes = item.proposed.map((p) => ({
      id: this.nextId++,
      x: p.x,
      y: p.y,
      w: p.w,
      h: p.h,
      confidence: p.confidence,
      source: "proposed" as const,
    }));
    this.undoStack = [];
    this.leaseDeadline =
      this.leaseSeconds === null ? null : this.now() + this.leaseSeconds * 1000;
    this.events.onItem?.(item);
    return true;
  }

  /** The image's intrinsic size, once known (after the <img> loads). */
  setImageBounds(width: number, height: number): void {
    this.bounds = { width, height };
  }

  leaseExpired(): boolean {
    return this.leaseDeadline !== null && this.now() > this.leaseDeadline;
  }

  /** Edited boxes in image pixels (copies; mutate via session methods). */
  currentBoxes(): EditBox[] {
    return this.boxes.map((b) => ({ ...b }));
  }

  private checkpoint(): void {
    this.undoStack.push(this.boxes.map((b) => ({ ...b })));
  }

  private warnIfExpired(): void {
    if (this.item && this.leaseExpired()) {
      this.events.onLeaseExpired?.(this.item);
    }
  }

  deleteBox(id: number): void {
    this.warnIfExpired();
    if (!this.boxes.some((b) => b.id === id)) return;
    this.checkpoint();
    this.boxes = this.boxes.filter((b) => b.id !== id);
    if (this.selectedId === id) this.selectedId = null;
  }

  /** Replace a box's geometry (resize or move), clamped to the image. */
  setBoxGeometry(id: number, rect: { x: number; y: number; w: number; h: number }): void {
    this.warnIfExpired();
    const box = this.boxes.find((b) => b.id === id);
    if (!box) return;
    this.checkpoint();
    Object.assign(box, clampBox(rect, this.bounds));
  }

  addBox(rect: { x: number; y: number; w: number; h: number }): EditBox {
    this.warnIfExpired();
    this.checkpoint();
    const clamped = clampBox(rect, this.bounds);
    const box: EditBox = {
      id: this.nextId++,
      ...clamped,
      confidence: null,
      source: "added",
    };
    this.boxes.push(box);
    this.selectedId = box.id;
    return box;
  }

  /** One undo step; replaying the whole stack restores the served state. */
  undo(): boolean {
    const prev = this.undoStack.pop();
    if (!prev) return false;
    this.boxes = prev;
    if (this.selectedId !== null && !this.boxes.some((b) => b.id === this.selectedId)) {
      this.selectedId = null;
    }
    return true;
  }

  undoAll(): void {
    while (this.undo()) {
      /* replay to served state */
    }
  }

  /** Verdict for the current edit state, in intrinsic pixel coordinates. */
  toVerdict(): ReviewVerdict {
    if (!this.item) throw new Error("no item under review");
    const keptProposed = new Set(
      this.boxes.filter((b) => b.source === "proposed").map((b) => b.id),
    );
    const discarded = this.item.proposed.length - keptProposed.size;
    return {
      image_id: this.item.image_id,
      kept: this.boxes.map((b) => [b.x, b.y, b.w, b.h]),
      discarded_count: discarded,
      annotator_id: this.annotatorId,
      round: this.item.round,
    };
  }

  /** Submit the verdict; on ack auto-load the next item. A conflict
   * (expired/unknown lease) resets the session and reloads. */
  async submit(): Promise<"ok" | "conflict" | "empty"> {
    if (!this.item) return "empty";
    const item = this.item;
    this.phase = "submitting";
    const result = await this.client.submit(this.toVerdict());
    if (result === "conflict") {
      this.events.onConflict?.(item);
      await this.loadNext();
      return "conflict";
    }
    await this.loadNext();
    return "ok";
  }
}
