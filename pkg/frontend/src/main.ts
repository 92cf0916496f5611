/**
 * Entry point: one state store, one socket, one rAF loop. At most one
 * HumanCommand leaves per animation frame, and only when there is intent.
 */

import { InputTracker } from './input.js';
import { SyncClient } from './net.js';
import { REGION_COLORS, buildScene, costTable } from './scene.js';
import { paint } from './render.js';
import {
  ClientState,
  banners,
  initialState,
  isController,
  onMessage,
  onSocketClosed,
  onSocketOpen,
} from './store.js';

const params = new URLSearchParams(window.location.search);
const endpoint = params.get('ws') ?? `ws://${window.location.hostname || '127.0.0.1'}:8765/ws`;

const canvas = document.getElementById('scene') as HTMLCanvasElement;
const ctx = canvas.getContext('2d')!;
const bannerBox = document.getElementById('banners')!;
const tableBox = document.getElementById('cost-table')!;
const statusBox = document.getElementById('status')!;

let state: ClientState = initialState();
const input = new InputTracker();

const client = new SyncClient(endpoint, {
  onOpen: () => {
    state = onSocketOpen(state);
  },
  onMessage: (env) => {
    state = onMessage(state, env, performance.now());
  },
  onClose: (willRetry) => {
    state = onSocketClosed(state, willRetry);
    input.clear();
  },
});
client.connect();

window.addEventListener('keydown', (ev) => {
  if (ev.code === 'Space') ev.preventDefault();
  input.keyDown(ev.code);
});
window.addEventListener('keyup', (ev) => input.keyUp(ev.code));
window.addEventListener('blur', () => input.clear());

function renderBanners(now: number): void {
  bannerBox.replaceChildren(
    ...banners(state, now).map((b) => {
      const div = document.createElement('div');
      div.className = `banner banner-${b.kind}`;
      div.textContent = b.text;
      return div;
    }),
  );
}

function renderTable(): void {
  if (!state.snapshot) return;
  const rows = costTable(state.snapshot)
    .map((r) => {
      const swatch = r.region
        ? `<span class="swatch" style="background:${REGION_COLORS[r.region]}"></span>`
        : '<span class="swatch"></span>';
      const cost = r.cost === null ? '—' : r.cost.toFixed(2);
      const angle = r.angleDeg === null ? '—' : `${r.angleDeg.toFixed(0)}°`;
      return `<tr><td>${r.id}</td><td>${r.label}</td><td>${r.status}</td>` +
        `<td>${angle}</td><td>${cost}</td><td>${swatch}${r.region ?? ''}</td></tr>`;
    })
    .join('');
  tableBox.innerHTML =
    '<tr><th>#</th><th>label</th><th>status</th><th>angle</th><th>cost</th><th>region</th></tr>' +
    rows;
}

function frame(now: number): void {
  if (isController(state) && state.snapshot) {
    const cmd = input.sample(state.snapshot.human.heading);
    if (cmd) client.sendCommand(cmd);
  }
  if (state.snapshot) {
    paint(ctx, buildScene(state.snapshot, { width: canvas.width, height: canvas.height }),
          canvas.width, canvas.height);
    renderTable();
  }
  renderBanners(now);
  statusBox.textContent =
    `${state.scenarioName ?? '…'} | ${state.connection}` +
    (state.role ? ` as ${state.role}` : '') +
    (state.snapshot ? ` | t=${state.snapshot.time.toFixed(1)}s` +
      ` | delivered ${state.snapshot.delivered_count}/${state.snapshot.holograms.length}` : '');
  requestAnimationFrame(frame);
}

requestAnimationFrame(frame);
