/**
 * Pure snapshot -> draw-op list. No clocks, no DOM: the same snapshot and
 * canvas size always yield the same ops, which is what the golden test
 * pins. Region colors come straight from the snapshot's region fields;
 * the client never recomputes any robot-side inference.
 */

import { HologramView, Snapshot } from './protocol.js';

export const REGION_COLORS: Record<string, string> = {
  Focusing: '#ffd60a', // yellow
  Transition: '#8ecae6', // light blue
  Blocked: '#1d3557', // dark blue
};

export const STATUS_COLORS: Record<string, string> = {
  delivered: '#6c757d',
  carried: '#f77f00',
};

export type DrawOp =
  | { op: 'clear'; color: string }
  | { op: 'circle'; x: number; y: number; r: number; fill: string | null; stroke: string | null }
  | { op: 'poly'; points: [number, number][]; fill: string | null; stroke: string | null; close: boolean }
  | { op: 'wedge'; x: number; y: number; r: number; from: number; to: number; fill: string }
  | { op: 'text'; x: number; y: number; text: string; color: string; size: number };

export interface ViewSize {
  width: number;
  height: number;
}

export interface CostRow {
  id: number;
  label: string;
  status: string;
  angleDeg: number | null;
  cost: number | null;
  occluded: boolean | null;
  region: string | null;
}

/** World(+y up) -> screen(+y down) mapper with uniform scale and margin. */
export function worldToScreen(bounds: [number, number, number, number], size: ViewSize) {
  const [x0, y0, x1, y1] = bounds;
  const margin = 20;
  const sx = (size.width - 2 * margin) / (x1 - x0);
  const sy = (size.height - 2 * margin) / (y1 - y0);
  const s = Math.min(sx, sy);
  const cx = (x0 + x1) / 2;
  const cy = (y0 + y1) / 2;
  return {
    scale: s,
    point(p: [number, number]): [number, number] {
      return [
        size.width / 2 + (p[0] - cx) * s,
        size.height / 2 - (p[1] - cy) * s,
      ];
    },
  };
}

function hologramFill(h: HologramView): string {
  if (h.status === 'delivered') return STATUS_COLORS.delivered;
  if (h.status === 'carried') return STATUS_COLORS.carried;
  if (h.assessment) return REGION_COLORS[h.assessment.region];
  return '#adb5bd';
}

const round2 = (v: number) => Math.round(v * 100) / 100;

export function buildScene(snapshot: Snapshot, size: ViewSize): DrawOp[] {
  const view = worldToScreen(snapshot.bounds, size);
  const ops: DrawOp[] = [{ op: 'clear', color: '#f8f9fa' }];

  // Floor outline and goal zone.
  const [x0, y0, x1, y1] = snapshot.bounds;
  const corners: [number, number][] = [
    view.point([x0, y0]), view.point([x1, y0]), view.point([x1, y1]), view.point([x0, y1]),
  ];
  ops.push({ op: 'poly', points: corners, fill: '#ffffff', stroke: '#343a40', close: true });
  const [gx, gy] = view.point(snapshot.goal_zone.center);
  ops.push({
    op: 'circle', x: round2(gx), y: round2(gy),
    r: round2(snapshot.goal_zone.radius * view.scale),
    fill: '#d8f3dc', stroke: '#2d6a4f',
  });

  // Robot plan: remaining path polyline.
  if (snapshot.plan.path.length > 1) {
    ops.push({
      op: 'poly',
      points: snapshot.plan.path.map((p) => {
        const [px, py] = view.point(p);
        return [round2(px), round2(py)] as [number, number];
      }),
      fill: null, stroke: '#c1121f', close: false,
    });
  }

  // Human frustum wedge (top-down horizontal FOV around facing direction).
  const facing = snapshot.human.heading + snapshot.human.head_yaw;
  const [hx, hy] = view.point(snapshot.human.position);
  ops.push({
    op: 'wedge', x: round2(hx), y: round2(hy), r: round2(1.8 * view.scale),
    from: round2(-(facing + snapshot.human.fov_h / 2)),
    to: round2(-(facing - snapshot.human.fov_h / 2)),
    fill: 'rgba(255, 214, 10, 0.25)',
  });

  // Holograms: free ones sit in the scene; carried ones ride their carrier.
  for (const h of snapshot.holograms) {
    let center: [number, number];
    if (h.status === 'carried' && h.carried_by === 'robot') {
      center = snapshot.robot.position;
    } else if (h.status === 'carried' && h.carried_by === 'human') {
      center = snapshot.human.position;
    } else {
      center = [h.position[0], h.position[1]];
    }
    const [px, py] = view.point(center);
    ops.push({
      op: 'circle', x: round2(px), y: round2(py),
      r: round2(Math.max(0.04, h.circle_radius) * view.scale),
      fill: hologramFill(h), stroke: '#212529',
    });
    ops.push({
      op: 'text', x: round2(px), y: round2(py - Math.max(0.04, h.circle_radius) * view.scale - 4),
      text: `${h.id}`, color: '#212529', size: 12,
    });
  }

  // Agents.
  ops.push({
    op: 'circle', x: round2(hx), y: round2(hy),
    r: round2((snapshot.human.footprint_radius ?? 0.25) * view.scale),
    fill: '#e63946', stroke: '#212529',
  });
  const [rx, ry] = view.point(snapshot.robot.position);
  ops.push({
    op: 'circle', x: round2(rx), y: round2(ry),
    r: round2(snapshot.robot.footprint_radius * view.scale),
    fill: snapshot.robot.enabled ? '#2a9d8f' : '#ced4da', stroke: '#212529',
  });
  // Heading ticks.
  const tick = (cx: number, cy: number, heading: number, len: number): DrawOp => ({
    op: 'poly',
    points: [
      [round2(cx), round2(cy)],
      [round2(cx + Math.cos(heading) * len), round2(cy - Math.sin(heading) * len)],
    ],
    fill: null, stroke: '#212529', close: false,
  });
  ops.push(tick(hx, hy, facing, 0.45 * view.scale));
  ops.push(tick(rx, ry, snapshot.robot.heading, 0.35 * view.scale));

  return ops;
}

/** Side-panel rows: the robot's live cost table, ordered by id. */
export function costTable(snapshot: Snapshot): CostRow[] {
  return [...snapshot.holograms]
    .sort((a, b) => a.id - b.id)
    .map((h) => ({
      id: h.id,
      label: h.label,
      status: h.status,
      angleDeg: h.assessment ? round2((h.assessment.angle * 180) / Math.PI) : null,
      cost: h.assessment ? round2(h.assessment.cost) : null,
      occluded: h.assessment ? h.assessment.occluded : null,
      region: h.assessment ? h.assessment.region : null,
    }));
}
