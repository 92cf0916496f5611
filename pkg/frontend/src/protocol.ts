/**
 * Wire protocol v1 types and frame helpers (mirror of protocol/v1.md).
 * The client never invents world state; everything renders from Snapshots.
 */

export const PROTOCOL_VERSION = 1;

export type MessageType =
  | 'ClientHello'
  | 'ServerWelcome'
  | 'Snapshot'
  | 'HumanCommand'
  | 'Control'
  | 'Event'
  | 'Error';

export interface Envelope<P = Record<string, unknown>> {
  v: number;
  type: MessageType;
  seq: number;
  time: number;
  payload: P;
}

export type Region = 'Focusing' | 'Transition' | 'Blocked';
export type HoloStatus = 'free' | 'carried' | 'delivered';
export type Role = 'human_controller' | 'observer';

export interface Assessment {
  angle: number;
  cost: number;
  occluded: boolean;
  region: Region;
}

export interface HologramView {
  id: number;
  label: string;
  status: HoloStatus;
  carried_by: string | null;
  position: [number, number, number];
  circle_radius: number;
  color: [number, number, number];
  assessment: Assessment | null;
}

export interface Snapshot {
  time: number;
  bounds: [number, number, number, number];
  goal_zone: { center: [number, number]; radius: number };
  human: {
    position: [number, number];
    heading: number;
    head_yaw: number;
    head_pitch: number;
    fov_h: number;
    fov_v: number;
    footprint_radius?: number;
    carried: number | null;
  };
  robot: {
    position: [number, number];
    heading: number;
    footprint_radius: number;
    carried: number | null;
    enabled: boolean;
  };
  holograms: HologramView[];
  plan: { queue: number[]; path: [number, number][] };
  delivered_count: number;
  complete: boolean;
  paused: boolean;
}

export interface Welcome {
  scenario: {
    name: string;
    bounds: [number, number, number, number];
    goal_zone: { center: [number, number]; radius: number };
    hologram_count: number;
  };
  role: Role;
  snapshot_rate_hz: number;
}

export interface HumanCommand {
  move?: [number, number];
  head_yaw_delta?: number;
  head_pitch_delta?: number;
  interact?: boolean;
}

export interface ErrorPayload {
  code: string;
  message: string;
  supported_versions?: number[];
}

const clamp = (v: number, lo: number, hi: number) => Math.min(hi, Math.max(lo, v));

/** Outbound frame builder; one instance per connection keeps seq strict. */
export class FrameWriter {
  private seq = 0;

  frame<P>(type: MessageType, payload: P, time = 0): string {
    const env: Envelope<P> = { v: PROTOCOL_VERSION, type, seq: this.seq, time, payload };
    this.seq += 1;
    return JSON.stringify(env);
  }

  hello(role?: Role): string {
    return this.frame('ClientHello', role ? { role, client: 'web-ui' } : { client: 'web-ui' });
  }

  command(cmd: HumanCommand): string {
    const payload: HumanCommand = {};
    if (cmd.move && (cmd.move[0] !== 0 || cmd.move[1] !== 0)) {
      payload.move = [clamp(cmd.move[0], -1, 1), clamp(cmd.move[1], -1, 1)];
    }
    if (cmd.head_yaw_delta) payload.head_yaw_delta = cmd.head_yaw_delta;
    if (cmd.head_pitch_delta) payload.head_pitch_delta = cmd.head_pitch_delta;
    if (cmd.interact) payload.interact = true;
    return this.frame('HumanCommand', payload);
  }
}

/** Parse one inbound frame; returns null for frames we cannot use. */
export function parseFrame(raw: string): Envelope | null {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof doc !== 'object' || doc === null) return null;
  const env = doc as Envelope;
  if (env.v !== PROTOCOL_VERSION) return null;
  if (typeof env.type !== 'string' || typeof env.seq !== 'number') return null;
  if (typeof env.payload !== 'object' || env.payload === null) return null;
  return env;
}

/** True when a command frame carries any actual intent. */
export function commandIsEmpty(cmd: HumanCommand): boolean {
  const moving = cmd.move !== undefined && (cmd.move[0] !== 0 || cmd.move[1] !== 0);
  return !moving && !cmd.head_yaw_delta && !cmd.head_pitch_delta && !cmd.interact;
}
