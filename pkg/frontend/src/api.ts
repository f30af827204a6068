/** Thin client for the review queue endpoints. */

import type { ReviewItem, ReviewVerdict } from "./types.js";

export type SubmitResult = "ok" | "conflict";

export class QueueClient {
  constructor(private baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  /** Lease the next review item; null when the queue is drained. */
  async next(): Promise<ReviewItem | null> {
    const resp = await fetch(`${this.baseUrl}/queue/next`);
    if (resp.status === 204) return null;
    if (!resp.ok) throw new Error(`queue/next -> ${resp.status}`);
    return (await resp.json()) as ReviewItem;
  }

  async submit(verdict: ReviewVerdict): Promise<SubmitResult> {
    const resp = await fetch(`${this.baseUrl}/queue/verdict`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(verdict),
    });
    if (resp.status === 409) return "conflict";
    if (!resp.ok) throw new Error(`queue/verdict -> ${resp.status}`);
    return "ok";
  }
}
