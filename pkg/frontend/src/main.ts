// Wires the dashboard: status header, live event panel, rule controls.
// Stateless beyond the server's config version: a reload rebuilds the whole
// view from GET /state + GET /config.

import { ControlApi } from './api.js';
import { ControlPanel } from './controls.js';
import { EventPanel } from './panel.js';
import { EventStream } from './stream.js';

function el(id: string): HTMLElement {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing #${id}`);
  return found;
}

async function refreshHeader(api: ControlApi): Promise<void> {
  const state = await api.getState();
  el('hdr-window').textContent = String(state.window_index);
  el('hdr-flows').textContent = `${state.ip_flow_count} ip / ${state.traffic_flow_count} traffic`;
  el('hdr-sounds').textContent = state.last_sounds.join(', ') || '(quiet)';
  el('hdr-version').textContent = `v${state.config_version}` +
    (state.applied_version === state.config_version ? '' : ` (v${state.applied_version} live)`);
  el('hdr-health').textContent =
    `drops ${state.drop_count} · malformed ${state.malformed_count}` +
    (state.log_degraded ? ' · LOGGING DEGRADED' : '');
}

export async function boot(base = ''): Promise<void> {
  const api = new ControlApi(base);
  const events = new EventPanel(el('events'));
  const controls = new ControlPanel(el('controls'), api);

  await controls.refresh();
  await refreshHeader(api);
  setInterval(() => refreshHeader(api).catch(() => {}), 2000);

  const stream = new EventStream(base, {
    onFrame: (frame) => events.addFrame(frame),
    onGap: (from, to) => events.addGap(from, to),
    onConnection: (connected) => events.setConnected(connected),
    onServerClose: () => events.setConnected(false),
  });
  void stream.start();
}

if (typeof document !== 'undefined' && document.getElementById('events')) {
  boot().catch((err) => {
    document.body.insertAdjacentText('afterbegin', `failed to start: ${err}`);
  });
}
