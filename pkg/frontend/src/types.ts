// Wire types mirrored from the engine's control plane.

export type Category =
  | 'SYN_WEATHER'
  | 'FIN_ANIMAL'
  | 'RST_WIND'
  | 'COUNTER_FIRE'
  | 'NORMAL_BIRD'
  | 'PING';

export interface StreamEvent {
  rule: string;
  sound: string;
  category: Category;
  flow: string;
  features: Record<string, number>;
}

export interface StreamFrame {
  window: number;
  start_us: number | null;
  events: StreamEvent[];
  sounds: string[];
  stats: Record<string, number>;
}

export interface EngineState {
  window_index: number;
  window_period_s: number;
  traffic_flow_count: number;
  ip_flow_count: number;
  last_sounds: string[];
  last_window: number | null;
  drop_count: number;
  malformed_count: number;
  log_degraded: boolean;
  config_version: number;
  applied_version: number;
  kernel: string;
  audio_sink: string;
  master_gain: number;
}

export interface EngineConfig {
  version: number;
  window_period_s: number;
  home_networks: string[];
  master_gain: number;
  ambient_sound: string | null;
  rules: string;
  assets: string[];
}

export interface StageResult {
  version: number;
  activation_window: number;
}

export interface ConfigPatch {
  window_period_s?: number;
  master_gain?: number;
  home_networks?: string[];
  ambient_sound?: string | null;
  rules?: string;
  gains?: Record<string, number>;
  mutes?: string[];
  unmutes?: string[];
  assignments?: Record<string, string>;
}

// One rendered line of the event panel.
export interface UiEventRow {
  window: number;
  rule: string;
  sound: string;
  category: Category;
  color: string;
  flow: string;
  headline: string;
  gap?: false;
}

export interface GapRow {
  gap: true;
  fromWindow: number;
  toWindow: number;
}

export type PanelRow = UiEventRow | GapRow;
