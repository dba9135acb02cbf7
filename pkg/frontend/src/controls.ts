// Per-rule controls (gain slider, mute, sound reassignment, threshold
// editing) plus the window-period field. Every action is one server
// round-trip; the UI only reflects acknowledged versions.

import { ApiError, ControlApi } from './api.js';
import { colorFor } from './rows.js';
import { conditionText, findRule, editCondition, parseCondition, featureNamespace, GrammarError } from './rules_doc.js';
import type { EngineConfig } from './types.js';
import type { Category } from './types.js';

export class ControlPanel {
  private doc = '';
  private assets: string[] = [];
  private status: HTMLElement;
  private list: HTMLElement;
  private periodInput!: HTMLInputElement;

  constructor(
    container: HTMLElement,
    private api: ControlApi,
    private onStaged: (version: number, activationWindow: number) => void = () => {},
  ) {
    this.status = document.createElement('div');
    this.status.className = 'control-status';
    this.list = document.createElement('div');
    this.list.className = 'rule-list';
    container.appendChild(this.buildGlobalControls());
    container.appendChild(this.status);
    container.appendChild(this.list);
  }

  async refresh(): Promise<EngineConfig> {
    const config = await this.api.getConfig();
    this.doc = config.rules;
    this.assets = config.assets;
    this.periodInput.value = String(config.window_period_s);
    this.renderRules();
    return config;
  }

  private buildGlobalControls(): HTMLElement {
    const bar = document.createElement('div');
    bar.className = 'global-controls';
    const label = document.createElement('label');
    label.textContent = 'window period (s) ';
    this.periodInput = document.createElement('input');
    this.periodInput.type = 'number';
    this.periodInput.step = '0.1';
    this.periodInput.min = '0.1';
    const apply = document.createElement('button');
    apply.textContent = 'apply';
    apply.addEventListener('click', () => {
      this.stage(() => this.api.setWindowPeriod(parseFloat(this.periodInput.value)));
    });
    label.appendChild(this.periodInput);
    bar.appendChild(label);
    bar.appendChild(apply);
    return bar;
  }

  private async stage(action: () => Promise<{ version: number; activation_window: number }>,
                      errorHost?: HTMLElement): Promise<void> {
    try {
      const result = await action();
      this.showStatus(`staged v${result.version}, live from window ${result.activation_window}`);
      this.onStaged(result.version, result.activation_window);
      await this.refresh();
    } catch (err) {
      const messages = err instanceof ApiError ? err.errors : [String(err)];
      if (errorHost) this.showInlineError(errorHost, messages.join('; '));
      else this.showStatus(`rejected: ${messages.join('; ')}`, true);
    }
  }

  private showStatus(text: string, isError = false): void {
    this.status.textContent = text;
    this.status.classList.toggle('error', isError);
  }

  private showInlineError(host: HTMLElement, text: string): void {
    let el = host.querySelector<HTMLElement>('.inline-error');
    if (!el) {
      el = document.createElement('div');
      el.className = 'inline-error';
      host.appendChild(el);
    }
    el.textContent = text;
  }

  private clearInlineError(host: HTMLElement): void {
    host.querySelector('.inline-error')?.remove();
  }

  private renderRules(): void {
    this.list.textContent = '';
    for (const line of this.doc.split('\n')) {
      const m = /^([A-Za-z_][A-Za-z0-9_-]*)\s*:/.exec(line.trim());
      if (!m) continue;
      const rule = findRule(this.doc, m[1]);
      if (rule) this.list.appendChild(this.ruleRow(rule.id));
    }
  }

  private ruleRow(ruleId: string): HTMLElement {
    const rule = findRule(this.doc, ruleId)!;
    const row = document.createElement('div');
    row.className = 'rule-row';
    row.dataset.rule = rule.id;

    const head = document.createElement('div');
    head.className = 'rule-head';
    const swatch = document.createElement('span');
    swatch.className = 'swatch';
    swatch.style.backgroundColor = colorFor(rule.category as Category);
    const title = document.createElement('span');
    title.textContent = ` ${rule.id} → ${rule.sound}${rule.muted ? ' (muted)' : ''}${rule.disabled ? ' (disabled)' : ''}`;
    head.appendChild(swatch);
    head.appendChild(title);

    // gain slider
    const gain = document.createElement('input');
    gain.type = 'range';
    gain.min = '0';
    gain.max = '1';
    gain.step = '0.05';
    gain.value = String(rule.gain);
    gain.className = 'gain-slider';
    gain.addEventListener('change', () => {
      this.stage(() => this.api.setGain(rule.id, parseFloat(gain.value)), row);
    });

    // mute toggle
    const mute = document.createElement('button');
    mute.textContent = rule.muted ? 'unmute' : 'mute';
    mute.className = 'mute-btn';
    mute.addEventListener('click', () => {
      this.stage(
        () => (rule.muted ? this.api.unmute(rule.id) : this.api.mute(rule.id)),
        row,
      );
    });

    // sound reassignment
    const sound = document.createElement('select');
    sound.className = 'sound-select';
    for (const asset of this.assets.length ? this.assets : [rule.sound]) {
      const opt = document.createElement('option');
      opt.value = asset;
      opt.textContent = asset;
      opt.selected = asset === rule.sound;
      sound.appendChild(opt);
    }
    sound.addEventListener('change', () => {
      this.stage(() => this.api.assignSound(rule.id, sound.value), row);
    });

    // threshold editor with client-side grammar validation
    const cond = document.createElement('input');
    cond.type = 'text';
    cond.className = 'cond-input';
    cond.value = conditionText(rule.condition);
    const applyCond = document.createElement('button');
    applyCond.textContent = 'apply';
    applyCond.addEventListener('click', () => {
      this.clearInlineError(row);
      let newDoc: string;
      try {
        parseCondition(cond.value, featureNamespace(this.doc));
        newDoc = editCondition(this.doc, rule.id, cond.value);
      } catch (err) {
        // invalid input never reaches the server
        this.showInlineError(row, err instanceof GrammarError ? err.message : String(err));
        return;
      }
      this.stage(() => this.api.putConfig({ rules: newDoc }), row);
    });

    row.appendChild(head);
    row.appendChild(gain);
    row.appendChild(mute);
    row.appendChild(sound);
    row.appendChild(cond);
    row.appendChild(applyCond);
    return row;
  }
}
