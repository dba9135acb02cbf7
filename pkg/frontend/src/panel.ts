// Live event panel: renders exactly the rows present in the /events feed,
// colour-coded by category, with gap markers for missed windows and a
// prominent connection banner.

import { CATEGORY_ICONS, gapRow, isGap, rowsForFrame } from './rows.js';
import type { PanelRow, StreamFrame, UiEventRow } from './types.js';

export class EventPanel {
  rows: PanelRow[] = [];
  private table: HTMLElement;
  private banner: HTMLElement;

  constructor(
    private container: HTMLElement,
    private maxRows = 500,
  ) {
    this.banner = document.createElement('div');
    this.banner.className = 'conn-banner hidden';
    this.banner.textContent = 'connection lost — reconnecting…';
    this.table = document.createElement('div');
    this.table.className = 'event-rows';
    container.appendChild(this.banner);
    container.appendChild(this.table);
  }

  addFrame(frame: StreamFrame): void {
    for (const row of rowsForFrame(frame)) this.append(row);
    if (frame.events.length === 0) this.appendQuiet(frame.window);
  }

  addGap(fromWindow: number, toWindow: number): void {
    this.append(gapRow(fromWindow, toWindow));
  }

  setConnected(connected: boolean): void {
    this.banner.classList.toggle('hidden', connected);
    this.container.classList.toggle('disconnected', !connected);
  }

  private append(row: PanelRow): void {
    this.rows.push(row);
    this.table.appendChild(this.renderRow(row));
    while (this.rows.length > this.maxRows && this.table.firstChild) {
      this.rows.shift();
      this.table.removeChild(this.table.firstChild);
    }
    this.table.scrollTop = this.table.scrollHeight;
  }

  private appendQuiet(window: number): void {
    const el = document.createElement('div');
    el.className = 'row quiet';
    el.textContent = `window ${window}: quiet`;
    this.table.appendChild(el);
  }

  private renderRow(row: PanelRow): HTMLElement {
    const el = document.createElement('div');
    if (isGap(row)) {
      el.className = 'row gap';
      const span = row.toWindow - row.fromWindow + 1;
      el.textContent =
        span === 1
          ? `missed window ${row.fromWindow}`
          : `missed windows ${row.fromWindow}–${row.toWindow} (${span})`;
      return el;
    }
    const ev = row as UiEventRow;
    el.className = 'row event';
    el.dataset.rule = ev.rule;
    el.dataset.category = ev.category;

    const swatch = document.createElement('span');
    swatch.className = 'swatch';
    swatch.style.backgroundColor = ev.color;
    swatch.textContent = CATEGORY_ICONS[ev.category] ?? '';

    const text = document.createElement('span');
    text.className = 'row-text';
    text.textContent = `w${ev.window}  ${pretty(ev.sound)} — ${ev.rule} — ${ev.flow} — ${ev.headline}`;

    el.appendChild(swatch);
    el.appendChild(text);
    return el;
  }
}

export function pretty(soundId: string): string {
  return soundId.replace(/_/g, ' ').replace(/^./, (c) => c.toUpperCase());
}
