import { describe, expect, it } from 'vitest';

import { Backoff } from '../src/net.js';
import { FrameWriter, commandIsEmpty, parseFrame } from '../src/protocol.js';

describe('frame writer', () => {
  it('seq is strictly increasing from zero', () => {
    const w = new FrameWriter();
    const seqs = [w.hello(), w.command({ interact: true }), w.command({ move: [1, 0] })]
      .map((raw) => JSON.parse(raw).seq);
    expect(seqs).toEqual([0, 1, 2]);
  });

  it('command magnitudes are clamped to [-1, 1]', () => {
    const w = new FrameWriter();
    const doc = JSON.parse(w.command({ move: [5, -3] }));
    expect(doc.payload.move).toEqual([1, -1]);
  });

  it('zero movement is omitted from the payload', () => {
    const w = new FrameWriter();
    const doc = JSON.parse(w.command({ move: [0, 0], interact: true }));
    expect(doc.payload.move).toBeUndefined();
    expect(doc.payload.interact).toBe(true);
  });

  it('all frames carry protocol version 1', () => {
    const w = new FrameWriter();
    expect(JSON.parse(w.hello('human_controller')).v).toBe(1);
  });
});

describe('frame parsing', () => {
  it('round-trips a valid envelope', () => {
    const raw = JSON.stringify({ v: 1, type: 'Event', seq: 3, time: 1.5,
                                 payload: { kind: 'attach', time: 1.5, data: {} } });
    const env = parseFrame(raw);
    expect(env?.type).toBe('Event');
    expect(env?.seq).toBe(3);
  });

  it('rejects wrong versions and junk', () => {
    expect(parseFrame(JSON.stringify({ v: 2, type: 'Snapshot', seq: 0, time: 0, payload: {} })))
      .toBeNull();
    expect(parseFrame('{nope')).toBeNull();
    expect(parseFrame('42')).toBeNull();
  });
});

describe('command emptiness', () => {
  it('detects idle commands so idle frames are never sent', () => {
    expect(commandIsEmpty({})).toBe(true);
    expect(commandIsEmpty({ move: [0, 0] })).toBe(true);
    expect(commandIsEmpty({ move: [0.5, 0] })).toBe(false);
    expect(commandIsEmpty({ interact: true })).toBe(false);
  });
});

describe('reconnect backoff', () => {
  it('grows toward the cap and resets on success', () => {
    const b = new Backoff(100, 1000, 5);
    const delays = [b.nextDelay(), b.nextDelay(), b.nextDelay(), b.nextDelay(), b.nextDelay()];
    expect(delays).toEqual([100, 200, 400, 800, 1000]);
    expect(b.nextDelay()).toBeNull(); // retries exhausted
    b.reset();
    expect(b.nextDelay()).toBe(100);
  });
});
