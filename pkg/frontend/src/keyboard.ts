/** Keyboard bindings. The whole accept/delete/submit flow works without
 * a pointer. */

import type { ReviewSession } from "./session.js";

export interface KeyCommand {
  keys: string[];
  description: string;
  run: (session: ReviewSession) => Promise<void> | void;
}

export const COMMANDS: KeyCommand[] = [
  {
    keys: ["Enter"],
    description: "submit verdict (confirm current boxes)",
    run: (s) => s.submit().then(() => undefined),
  },
  {
    keys: ["Delete", "Backspace", "d"],
    description: "delete selected box",
    run: (s) => {
      if (s.selectedId !== null) s.deleteBox(s.selectedId);
    },
  },
  {
    keys: ["u"],
    description: "undo last edit",
    run: (s) => {
      s.undo();
    },
  },
  {
    keys: ["Tab"],
    description: "select next box",
    run: (s) => {
      const boxes = s.currentBoxes();
      if (boxes.length === 0) return;
      const idx = boxes.findIndex((b) => b.id === s.selectedId);
      s.selectedId = boxes[(idx + 1) % boxes.length].id;
    },
  },
  {
    keys: ["Escape"],
    description: "clear selection",
    run: (s) => {
      s.selectedId = null;
    },
  },
];

export function dispatchKey(session: ReviewSession, key: string): boolean {
  for (const command of COMMANDS) {
    if (command.keys.includes(key)) {
      void command.run(session);
      return true;
    }
  }
  return false;
}
