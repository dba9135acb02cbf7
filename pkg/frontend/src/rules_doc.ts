// Client-side mirror of the engine's rule grammar, enough to edit
// thresholds, sounds and gains locally and round-trip the document. The
// server re-validates everything; this exists so typos surface inline
// before a PUT.

export const BUILTIN_FEATURES = [
  'SYN-in-IP', 'SYN-out-IP', 'SYN-ACK-in-IP', 'SYN-ACK-out-IP',
  'ACK-in-IP', 'ACK-out-IP', 'FIN-in-IP', 'FIN-out-IP',
  'RST-in-IP', 'RST-out-IP', 'PSH-ACK-in-IP', 'PSH-ACK-out-IP',
  'NULL-in-IP', 'NULL-out-IP', 'URG-PSH-FIN-in-IP', 'URG-PSH-FIN-out-IP',
  'LAND-in-IP', 'LAND-out-IP', 'ICMP-in', 'ICMP-out',
  'FC-1', 'FC-2', 'FC-3', 'FC-4', 'FC-5', 'FC-6', 'FC-7', 'FC-8',
  'TrafficFlowCounter', 'IPFlowCounter',
];

const FC_ALIASES: Record<string, string> = {};
for (let i = 1; i <= 8; i++) FC_ALIASES[`FC${i}`] = `FC-${i}`;

export const OPERATORS = ['>', '<', '>=', '<=', '=='] as const;
export type Operator = (typeof OPERATORS)[number];

export type Term = { kind: 'feature'; name: string } | { kind: 'int'; value: number };

export interface Comparison {
  lhs: Term;
  op: Operator;
  rhs: Term;
}

export interface ParsedRule {
  id: string;
  condition: Comparison[][]; // disjunction of conjunctions
  sound: string;
  gain: number;
  category: string;
  muted: boolean;
  disabled: boolean;
}

export interface DocLine {
  raw: string;
  rule?: ParsedRule;
}

const NAME_RE = /^[A-Za-z_][A-Za-z0-9_-]*$/;
const INT_RE = /^-?\d+$/;
const KEYWORDS = new Set(['and', 'or', 'sound', 'gain', 'category', 'muted', 'disabled']);

export class GrammarError extends Error {}

function tokenize(line: string): string[] {
  const tokens: string[] = [];
  const re = /"[^"]*"|->|>=|<=|==|[A-Za-z_][A-Za-z0-9_-]*|-?\d+(?:\.\d+)?|[:=+\-<>]/g;
  let pos = 0;
  for (;;) {
    while (pos < line.length && (line[pos] === ' ' || line[pos] === '\t')) pos++;
    if (pos >= line.length || line[pos] === '#') return tokens;
    re.lastIndex = pos;
    const m = re.exec(line);
    if (!m || m.index !== pos) throw new GrammarError(`unexpected character '${line[pos]}'`);
    tokens.push(m[0]);
    pos = re.lastIndex;
  }
}

class Cursor {
  pos = 0;
  constructor(private tokens: string[]) {}
  peek(): string | undefined {
    return this.tokens[this.pos];
  }
  next(): string {
    const tok = this.tokens[this.pos++];
    if (tok === undefined) throw new GrammarError('unexpected end of line');
    return tok;
  }
  expect(want: string): void {
    const tok = this.next();
    if (tok !== want) throw new GrammarError(`expected '${want}', got '${tok}'`);
  }
}

function parseTerm(c: Cursor, features: Set<string>): Term {
  const tok = c.next();
  if (INT_RE.test(tok)) return { kind: 'int', value: parseInt(tok, 10) };
  if (NAME_RE.test(tok) && !KEYWORDS.has(tok)) {
    const name = FC_ALIASES[tok] ?? tok;
    if (!features.has(name)) throw new GrammarError(`unknown feature: ${tok}`);
    return { kind: 'feature', name };
  }
  throw new GrammarError(`expected a feature name or integer, got '${tok}'`);
}

export function parseCondition(text: string, features: Set<string>): Comparison[][] {
  const c = new Cursor(tokenize(text));
  const condition = parseConditionTokens(c, features);
  if (c.peek() !== undefined) throw new GrammarError(`trailing tokens after condition`);
  return condition;
}

function parseConditionTokens(c: Cursor, features: Set<string>): Comparison[][] {
  const disjunction: Comparison[][] = [];
  for (;;) {
    const conj: Comparison[] = [];
    for (;;) {
      const lhs = parseTerm(c, features);
      const op = c.next();
      if (!(OPERATORS as readonly string[]).includes(op)) {
        throw new GrammarError(`expected a comparison operator, got '${op}'`);
      }
      const rhs = parseTerm(c, features);
      conj.push({ lhs, op: op as Operator, rhs });
      if (c.peek() === 'and') {
        c.next();
        continue;
      }
      break;
    }
    disjunction.push(conj);
    if (c.peek() === 'or') {
      c.next();
      continue;
    }
    break;
  }
  return disjunction;
}

function parseRuleTokens(id: string, c: Cursor, features: Set<string>): ParsedRule {
  c.expect(':');
  const condition = parseConditionTokens(c, features);
  c.expect('->');
  c.expect('sound');
  const soundTok = c.next();
  if (!soundTok.startsWith('"') || !soundTok.endsWith('"')) {
    throw new GrammarError('expected a quoted sound id');
  }
  const rule: ParsedRule = {
    id,
    condition,
    sound: soundTok.slice(1, -1),
    gain: 1.0,
    category: 'FIN_ANIMAL',
    muted: false,
    disabled: false,
  };
  for (;;) {
    const tok = c.peek();
    if (tok === undefined) break;
    c.next();
    if (tok === 'gain') rule.gain = parseFloat(c.next());
    else if (tok === 'category') rule.category = c.next();
    else if (tok === 'muted') rule.muted = true;
    else if (tok === 'disabled') rule.disabled = true;
    else throw new GrammarError(`unexpected token '${tok}'`);
  }
  return rule;
}

export function termText(term: Term): string {
  return term.kind === 'int' ? String(term.value) : term.name;
}

export function conditionText(condition: Comparison[][]): string {
  return condition
    .map((conj) => conj.map((cmp) => `${termText(cmp.lhs)} ${cmp.op} ${termText(cmp.rhs)}`).join(' and '))
    .join(' or ');
}

export function ruleLine(rule: ParsedRule): string {
  let line = `${rule.id}: ${conditionText(rule.condition)} -> sound "${rule.sound}"`;
  line += ` gain ${formatGain(rule.gain)} category ${rule.category}`;
  if (rule.muted) line += ' muted';
  if (rule.disabled) line += ' disabled';
  return line;
}

function formatGain(gain: number): string {
  // matches the server's shortest-form float rendering
  return String(Number(gain.toPrecision(6)));
}

export function featureNamespace(doc: string): Set<string> {
  // builtins plus any declarations in the document, in order
  const names = new Set(BUILTIN_FEATURES);
  for (const raw of doc.split('\n')) {
    const line = raw.split('#')[0].trim();
    const m = /^([A-Za-z_][A-Za-z0-9_-]*)\s*=/.exec(line);
    if (m && !names.has(m[1])) names.add(m[1]);
  }
  return names;
}

export function parseDocument(doc: string): DocLine[] {
  const features = featureNamespace(doc);
  return doc.split('\n').map((raw) => {
    const stripped = raw.split('#')[0].trim();
    const m = /^([A-Za-z_][A-Za-z0-9_-]*)\s*:/.exec(stripped);
    if (!m) return { raw };
    const tokens = tokenize(stripped);
    const c = new Cursor(tokens);
    c.next(); // rule id
    return { raw, rule: parseRuleTokens(m[1], c, features) };
  });
}

export function findRule(doc: string, ruleId: string): ParsedRule | null {
  for (const line of parseDocument(doc)) {
    if (line.rule && line.rule.id === ruleId) return line.rule;
  }
  return null;
}

/** Replace one rule's condition, validating against the document's own
 *  feature namespace; returns the updated document text. */
export function editCondition(doc: string, ruleId: string, newCondition: string): string {
  const features = featureNamespace(doc);
  const condition = parseCondition(newCondition, features);
  let found = false;
  const lines = parseDocument(doc).map((line) => {
    if (line.rule && line.rule.id === ruleId) {
      found = true;
      return ruleLine({ ...line.rule, condition });
    }
    return line.raw;
  });
  if (!found) throw new GrammarError(`unknown rule: ${ruleId}`);
  return lines.join('\n');
}
