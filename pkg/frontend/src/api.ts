// Typed client for the engine's control endpoints. Every mutation resolves
// to the server's staged version; nothing is applied optimistically.

import type { ConfigPatch, EngineConfig, EngineState, StageResult } from './types.js';

export class ApiError extends Error {
  constructor(
    public status: number,
    public errors: string[],
  ) {
    super(errors.join('; ') || `HTTP ${status}`);
  }
}

async function parseFailure(resp: Response): Promise<never> {
  let errors: string[] = [`HTTP ${resp.status}`];
  try {
    const body = await resp.json();
    if (Array.isArray(body.errors)) errors = body.errors;
  } catch {
    // non-JSON error body; keep the status line
  }
  throw new ApiError(resp.status, errors);
}

export class ControlApi {
  constructor(
    private base: string = '',
    private fetcher: typeof fetch = fetch,
  ) {}

  private async get<T>(path: string): Promise<T> {
    const resp = await this.fetcher(this.base + path);
    if (!resp.ok) await parseFailure(resp);
    return resp.json() as Promise<T>;
  }

  private async send(method: string, path: string, body?: unknown): Promise<StageResult> {
    const resp = await this.fetcher(this.base + path, {
      method,
      headers: { 'Content-Type': 'application/json' },
      body: body === undefined ? '{}' : JSON.stringify(body),
    });
    if (!resp.ok) await parseFailure(resp);
    return resp.json() as Promise<StageResult>;
  }

  getState(): Promise<EngineState> {
    return this.get<EngineState>('/state');
  }

  getConfig(): Promise<EngineConfig> {
    return this.get<EngineConfig>('/config');
  }

  putConfig(patch: ConfigPatch): Promise<StageResult> {
    return this.send('PUT', '/config', patch);
  }

  setGain(ruleId: string, gain: number): Promise<StageResult> {
    return this.send('PUT', `/gain/${encodeURIComponent(ruleId)}`, { gain });
  }

  mute(ruleId: string): Promise<StageResult> {
    return this.send('POST', `/mute/${encodeURIComponent(ruleId)}`);
  }

  unmute(ruleId: string): Promise<StageResult> {
    return this.send('POST', `/unmute/${encodeURIComponent(ruleId)}`);
  }

  assignSound(ruleId: string, sound: string): Promise<StageResult> {
    return this.send('PUT', `/sound/${encodeURIComponent(ruleId)}`, { sound });
  }

  setWindowPeriod(seconds: number): Promise<StageResult> {
    return this.send('PUT', '/window_period', { window_period_s: seconds });
  }
}
