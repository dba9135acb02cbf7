import { describe, expect, it } from 'vitest';

import { CATEGORY_COLORS, colorFor, headlineText, rowsForFrame } from '../src/rows.js';
import type { StreamFrame } from '../src/types.js';

const frame: StreamFrame = {
  window: 7,
  start_us: 123,
  events: [
    {
      rule: 'rule4',
      sound: 'thunder',
      category: 'SYN_WEATHER',
      flow: '10.0.0.7~203.0.113.66~TCP',
      features: { 'SYN-in-IP': 400, 'SYN-ACK-out-IP': 8 },
    },
    {
      rule: 'rule24',
      sound: 'wind_on_grass',
      category: 'RST_WIND',
      flow: '10.0.0.7~203.0.113.66~TCP',
      features: { 'RST-out-IP': 392, 'ACK-out-IP': 0 },
    },
  ],
  sounds: ['thunder', 'wind_on_grass'],
  stats: { ip_flows: 1 },
};

describe('category colours', () => {
  it('follows the legend: weather blue, animal green, wind grey, fire red, birds neutral', () => {
    expect(colorFor('SYN_WEATHER')).toBe('#2e6fd8');
    expect(colorFor('FIN_ANIMAL')).toBe('#2f9e44');
    expect(colorFor('RST_WIND')).toBe('#868e96');
    expect(colorFor('COUNTER_FIRE')).toBe('#e03131');
    expect(colorFor('NORMAL_BIRD')).toBe('#adb5bd');
  });

  it('covers every category', () => {
    expect(Object.keys(CATEGORY_COLORS).sort()).toEqual([
      'COUNTER_FIRE', 'FIN_ANIMAL', 'NORMAL_BIRD', 'PING', 'RST_WIND', 'SYN_WEATHER',
    ]);
  });
});

describe('rowsForFrame', () => {
  it('produces one row per stream event, in order', () => {
    const rows = rowsForFrame(frame);
    expect(rows).toHaveLength(2);
    expect(rows[0].rule).toBe('rule4');
    expect(rows[0].window).toBe(7);
    expect(rows[0].color).toBe('#2e6fd8');
    expect(rows[1].sound).toBe('wind_on_grass');
    expect(rows[1].color).toBe('#868e96');
  });

  it('renders headline feature values deterministically sorted', () => {
    expect(headlineText({ 'SYN-in-IP': 400, 'FC-2': 392 })).toBe('FC-2=392 SYN-in-IP=400');
    const rows = rowsForFrame(frame);
    expect(rows[0].headline).toBe('SYN-ACK-out-IP=8 SYN-in-IP=400');
  });
});
