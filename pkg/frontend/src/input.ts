/**
 * Keyboard state -> per-frame intent. Movement keys act in the avatar's
 * body frame (forward = +x) and are rotated by the latest snapshot heading
 * into the world-frame vector the protocol expects; the interact key fires
 * on its key-down edge only.
 */

import { HumanCommand } from './protocol.js';

const FORWARD = ['KeyW', 'ArrowUp'];
const BACK = ['KeyS', 'ArrowDown'];
const LEFT = ['KeyA', 'ArrowLeft'];
const RIGHT = ['KeyD', 'ArrowRight'];
const HEAD_LEFT = ['KeyQ'];
const HEAD_RIGHT = ['KeyE'];
const HEAD_UP = ['KeyR'];
const HEAD_DOWN = ['KeyF'];
const INTERACT = ['Space'];

const HEAD_STEP = 0.045; // rad per frame while held

export class InputTracker {
  private held = new Set<string>();
  private interactPending = false;

  keyDown(code: string): void {
    if (INTERACT.includes(code) && !this.held.has(code)) {
      this.interactPending = true; // edge, not level
    }
    this.held.add(code);
  }

  keyUp(code: string): void {
    this.held.delete(code);
  }

  clear(): void {
    this.held.clear();
    this.interactPending = false;
  }

  private axis(pos: string[], neg: string[]): number {
    const on = (codes: string[]) => codes.some((c) => this.held.has(c));
    return (on(pos) ? 1 : 0) - (on(neg) ? 1 : 0);
  }

  /**
   * Consume one frame of intent. Returns null when there is nothing to
   * send, so idle hands produce no traffic.
   */
  sample(heading: number): HumanCommand | null {
    const fwd = this.axis(FORWARD, BACK);
    const left = this.axis(LEFT, RIGHT);
    let move: [number, number] | undefined;
    if (fwd !== 0 || left !== 0) {
      const norm = Math.hypot(fwd, left);
      const bx = fwd / norm;
      const by = left / norm;
      const c = Math.cos(heading);
      const s = Math.sin(heading);
      move = [bx * c - by * s, bx * s + by * c];
    }
    const yaw = this.axis(HEAD_LEFT, HEAD_RIGHT) * HEAD_STEP;
    const pitch = this.axis(HEAD_UP, HEAD_DOWN) * HEAD_STEP;
    const interact = this.interactPending;
    this.interactPending = false;
    if (!move && !yaw && !pitch && !interact) {
      return null;
    }
    const cmd: HumanCommand = {};
    if (move) cmd.move = move;
    if (yaw) cmd.head_yaw_delta = yaw;
    if (pitch) cmd.head_pitch_delta = pitch;
    if (interact) cmd.interact = true;
    return cmd;
  }
}
