/** Wire types, mirroring the review service JSON schemas exactly. */

export interface ProposedBox {
  x: number;
  y: number;
  w: number;
  h: number;
  confidence: number;
}

export interface ReviewItem {
  image_id: string;
  proposed: ProposedBox[];
  reason: string;
  round: number;
}

export interface ReviewVerdict {
  image_id: string;
  /** kept boxes as [x, y, w, h] in intrinsic image pixels */
  kept: [number, number, number, number][];
  discarded_count: number;
  annotator_id: string;
  round: number;
}

/** Proposals below this confidence are the reason the image was flagged. */
export const FLAG_THRESHOLD = 0.5;
