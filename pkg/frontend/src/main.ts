/** Browser bootstrap: wires the session to a canvas, pointer and
 * keyboard input, and an idle poll loop. Base URL is the one setting. */

import { QueueClient } from "./api.js";
import { handleAt, hitTest, resizeToHandle, Handle } from "./boxes.js";
import { dispatchKey } from "./keyboard.js";
import { ReviewSession } from "./session.js";
import { drawScene, fitViewport, imageFromScreen, Viewport, zoomAt } from "./view.js";

const POLL_MS = 3000;
const HANDLE_RADIUS_PX = 6;

function param(name: string, fallback: string): string {
  return new URLSearchParams(window.location.search).get(name) ?? fallback;
}

function setStatus(text: string, tone: "info" | "warn" = "info"): void {
  const el = document.getElementById("status")!;
  el.textContent = text;
  el.className = tone;
}

export function start(): void {
  const baseUrl = param("service", "http://127.0.0.1:8000");
  const annotator = param("annotator", "browser");
  const leaseSeconds = Number(param("lease", "300"));

  const canvas = document.getElementById("scene") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  const client = new QueueClient(baseUrl);

  let image: HTMLImageElement | null = null;
  let imageSize = { width: 640, height: 640 };
  let viewport: Viewport = fitViewport(640, 640, canvas.width, canvas.height);
  let pollTimer: number | null = null;

  const session = new ReviewSession(client, annotator, leaseSeconds, {
    onItem: (item) => {
      setStatus(
        `${item.image_id}: ${item.proposed.length} proposals ` +
          `(${item.reason}, round ${item.round})`,
      );
      image = new Image();
      image.onload = () => {
        imageSize = { width: image!.naturalWidth, height: image!.naturalHeight };
        session.setImageBounds(imageSize.width, imageSize.height);
        viewport = fitViewport(imageSize.width, imageSize.height, canvas.width, canvas.height);
        render();
      };
      image.onerror = () => {
        image = null;
        session.setImageBounds(imageSize.width, imageSize.height);
        render();
      };
      image.src = `${baseUrl}/images/${encodeURIComponent(item.image_id)}`;
      render();
    },
    onIdle: () => {
      setStatus("queue drained; polling for more work");
      render();
      if (pollTimer === null) {
        pollTimer = window.setInterval(async () => {
          if (await session.loadNext()) {
            window.clearInterval(pollTimer!);
            pollTimer = null;
          }
        }, POLL_MS);
      }
    },
    onLeaseExpired: () => {
      setStatus("lease expired: this item may be re-served; submit will conflict", "warn");
    },
    onConflict: (item) => {
      setStatus(`verdict for ${item.image_id} rejected (lease lost); reloading`, "warn");
    },
  });

  function render(): void {
    drawScene(ctx, image, imageSize, session.currentBoxes(), session.selectedId, viewport);
  }

  // -- pointer interactions: select, move, resize, draw ------------------

  type Drag =
    | { kind: "move"; id: number; dx: number; dy: number }
    | { kind: "resize"; id: number; handle: Handle }
    | { kind: "draw"; startX: number; startY: number; id: number | null };
  let drag: Drag | null = null;

  canvas.addEventListener("pointerdown", (ev) => {
    const [ix, iy] = imageFromScreen(viewport, ev.offsetX, ev.offsetY);
    const boxes = session.currentBoxes();
    const selected = boxes.find((b) => b.id === session.selectedId);
    const radius = HANDLE_RADIUS_PX / viewport.scale;

    if (selected) {
      const handle = handleAt(selected, ix, iy, radius);
      if (handle) {
        drag = { kind: "resize", id: selected.id, handle };
        return;
      }
    }
    const hit = hitTest(boxes, ix, iy);
    if (hit) {
      session.selectedId = hit.id;
      drag = { kind: "move", id: hit.id, dx: ix - hit.x, dy: iy - hit.y };
    } else {
      drag = { kind: "draw", startX: ix, startY: iy, id: null };
      session.selectedId = null;
    }
    render();
  });

  canvas.addEventListener("pointermove", (ev) => {
    if (!drag) return;
    const [ix, iy] = imageFromScreen(viewport, ev.offsetX, ev.offsetY);
    if (drag.kind === "move") {
      const box = session.currentBoxes().find((b) => b.id === drag!.id);
      if (box) {
        session.setBoxGeometry(drag.id, {
          x: ix - drag.dx,
          y: iy - drag.dy,
          w: box.w,
          h: box.h,
        });
        session.undo(); // collapse intermediate drag states
        session.setBoxGeometry(drag.id, { x: ix - drag.dx, y: iy - drag.dy, w: box.w, h: box.h });
      }
    } else if (drag.kind === "resize") {
      const box = session.currentBoxes().find((b) => b.id === drag!.id);
      if (box) {
        session.setBoxGeometry(drag.id, resizeToHandle(box, drag.handle, ix, iy));
        session.undo();
        session.setBoxGeometry(drag.id, resizeToHandle(box, drag.handle, ix, iy));
      }
    } else {
      const rect = {
        x: Math.min(drag.startX, ix),
        y: Math.min(drag.startY, iy),
        w: Math.abs(ix - drag.startX),
        h: Math.abs(iy - drag.startY),
      };
      if (drag.id === null) {
        drag.id = session.addBox(rect).id;
      } else {
        session.setBoxGeometry(drag.id, rect);
        session.undo();
        session.setBoxGeometry(drag.id, rect);
      }
    }
    render();
  });

  canvas.addEventListener("pointerup", () => {
    drag = null;
    render();
  });

  canvas.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    viewport = zoomAt(viewport, ev.offsetX, ev.offsetY, ev.deltaY < 0 ? 1.15 : 1 / 1.15);
    render();
  });

  window.addEventListener("keydown", (ev) => {
    if (ev.key === "Tab") ev.preventDefault();
    if (ev.ctrlKey && ev.key === "z") {
      session.undo();
      render();
      return;
    }
    if (dispatchKey(session, ev.key)) {
      window.setTimeout(render, 0);
    }
  });

  document.getElementById("accept-all")!.addEventListener("click", () => void session.submit());
  document.getElementById("undo")!.addEventListener("click", () => {
    session.undo();
    render();
  });

  void session.loadNext();
}

if (typeof document !== "undefined" && document.getElementById("scene")) {
  start();
}
