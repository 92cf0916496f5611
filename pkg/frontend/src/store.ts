/**
 * Single state store for the client. All network and input events funnel
 * through here; the render loop only ever reads the latest complete
 * snapshot, so a reopened tab reproduces the same scene from the next one.
 */

import { Envelope, ErrorPayload, Role, Snapshot, Welcome } from './protocol.js';

export type ConnectionState = 'connecting' | 'connected' | 'reconnecting' | 'failed';

export interface Banner {
  kind: 'observer' | 'stale' | 'error' | 'complete';
  text: string;
}

export interface ClientState {
  connection: ConnectionState;
  role: Role | null;
  scenarioName: string | null;
  snapshot: Snapshot | null;
  /** Wall-clock ms when the last snapshot arrived (for staleness). */
  snapshotAtMs: number | null;
  lastError: ErrorPayload | null;
  controllerTaken: boolean;
}

export const STALE_AFTER_MS = 1000;

export function initialState(): ClientState {
  return {
    connection: 'connecting',
    role: null,
    scenarioName: null,
    snapshot: null,
    snapshotAtMs: null,
    lastError: null,
    controllerTaken: false,
  };
}

export function onSocketOpen(s: ClientState): ClientState {
  return { ...s, connection: 'connecting', lastError: null };
}

export function onSocketClosed(s: ClientState, willRetry: boolean): ClientState {
  return { ...s, connection: willRetry ? 'reconnecting' : 'failed', role: null };
}

export function onMessage(s: ClientState, env: Envelope, nowMs: number): ClientState {
  switch (env.type) {
    case 'ServerWelcome': {
      const w = env.payload as unknown as Welcome;
      return {
        ...s,
        connection: 'connected',
        role: w.role,
        scenarioName: w.scenario.name,
      };
    }
    case 'Snapshot':
      // Only complete, parsed snapshots land here; stale ones cannot
      // regress because server snapshot times are nondecreasing.
      return { ...s, snapshot: env.payload as unknown as Snapshot, snapshotAtMs: nowMs };
    case 'Error': {
      const e = env.payload as unknown as ErrorPayload;
      const taken = e.code === 'controller_taken';
      return { ...s, lastError: e, controllerTaken: s.controllerTaken || taken };
    }
    default:
      return s;
  }
}

/** Banners to show, in priority order. */
export function banners(s: ClientState, nowMs: number): Banner[] {
  const out: Banner[] = [];
  if (s.connection === 'reconnecting' || s.connection === 'failed') {
    out.push({
      kind: 'error',
      text: s.connection === 'reconnecting' ? 'connection lost, retrying…' : 'connection failed',
    });
  } else if (
    s.snapshotAtMs !== null &&
    nowMs - s.snapshotAtMs > STALE_AFTER_MS
  ) {
    out.push({ kind: 'stale', text: 'no fresh state from server' });
  }
  if (s.controllerTaken || s.role === 'observer') {
    out.push({
      kind: 'observer',
      text: s.controllerTaken
        ? 'controller taken — you are observing; inputs are ignored'
        : 'observer mode — inputs are ignored',
    });
  }
  if (s.snapshot?.complete) {
    out.push({ kind: 'complete', text: `all holograms delivered at t=${s.snapshot.time.toFixed(1)}s` });
  }
  return out;
}

export function isController(s: ClientState): boolean {
  return s.role === 'human_controller';
}
