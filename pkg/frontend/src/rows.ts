// Stream frames -> panel rows, with the category colour legend.

import type { Category, GapRow, PanelRow, StreamFrame, UiEventRow } from './types.js';

export const CATEGORY_COLORS: Record<Category, string> = {
  SYN_WEATHER: '#2e6fd8', // weather and water: blue
  FIN_ANIMAL: '#2f9e44', // animal calls: green
  RST_WIND: '#868e96', // wind: grey
  COUNTER_FIRE: '#e03131', // fire: red
  NORMAL_BIRD: '#adb5bd', // confirmed-normal birds: neutral
  PING: '#e8890c', // ping knocks: amber
};

export const CATEGORY_ICONS: Record<Category, string> = {
  SYN_WEATHER: '🌧',
  FIN_ANIMAL: '🐾',
  RST_WIND: '🌬',
  COUNTER_FIRE: '🔥',
  NORMAL_BIRD: '🐦',
  PING: '📯',
};

export function colorFor(category: Category): string {
  return CATEGORY_COLORS[category] ?? CATEGORY_COLORS.FIN_ANIMAL;
}

export function headlineText(features: Record<string, number>): string {
  return Object.keys(features)
    .sort()
    .map((name) => `${name}=${features[name]}`)
    .join(' ');
}

export function rowsForFrame(frame: StreamFrame): UiEventRow[] {
  // one row per stream event, in stream order: the panel mirrors the feed
  return frame.events.map((ev) => ({
    window: frame.window,
    rule: ev.rule,
    sound: ev.sound,
    category: ev.category,
    color: colorFor(ev.category),
    flow: ev.flow,
    headline: headlineText(ev.features),
  }));
}

export function gapRow(fromWindow: number, toWindow: number): GapRow {
  return { gap: true, fromWindow, toWindow };
}

export function isGap(row: PanelRow): row is GapRow {
  return (row as GapRow).gap === true;
}
