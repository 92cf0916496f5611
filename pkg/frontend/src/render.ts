/** Paint a draw-op list onto a 2D canvas context. */

import { DrawOp } from './scene.js';

export function paint(ctx: CanvasRenderingContext2D, ops: DrawOp[], width: number,
                      height: number): void {
  for (const op of ops) {
    switch (op.op) {
      case 'clear':
        ctx.fillStyle = op.color;
        ctx.fillRect(0, 0, width, height);
        break;
      case 'circle':
        ctx.beginPath();
        ctx.arc(op.x, op.y, op.r, 0, 2 * Math.PI);
        if (op.fill) {
          ctx.fillStyle = op.fill;
          ctx.fill();
        }
        if (op.stroke) {
          ctx.strokeStyle = op.stroke;
          ctx.stroke();
        }
        break;
      case 'poly':
        ctx.beginPath();
        op.points.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
        if (op.close) ctx.closePath();
        if (op.fill) {
          ctx.fillStyle = op.fill;
          ctx.fill();
        }
        if (op.stroke) {
          ctx.strokeStyle = op.stroke;
          ctx.stroke();
        }
        break;
      case 'wedge':
        ctx.beginPath();
        ctx.moveTo(op.x, op.y);
        ctx.arc(op.x, op.y, op.r, op.from, op.to);
        ctx.closePath();
        ctx.fillStyle = op.fill;
        ctx.fill();
        break;
      case 'text':
        ctx.fillStyle = op.color;
        ctx.font = `${op.size}px system-ui, sans-serif`;
        ctx.textAlign = 'center';
        ctx.fillText(op.text, op.x, op.y);
        break;
    }
  }
}
