"""Threshold rules: the line-oriented rule grammar, the default rule set,
and per-window evaluation producing event instances.

Grammar (whitespace-separated tokens, UTF-8, one construct per line,
comments from "#"):

    rule    := ID ":" cond "->" "sound" STRING [gain REAL] [category WORD]
               ["muted"] ["disabled"]
    cond    := conj {"or" conj}
    conj    := cmp {"and" cmp}
    cmp     := term OPR term        OPR in {">", "<", ">=", "<=", "=="}
    term    := FEATURE_NAME | INTEGER
    feature := NAME "=" term {("+"|"-") term}

"or" binds loosest (a condition is a disjunction of conjunctions). Feature
names match the feature namespace exactly, hyphens included.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Optional

from .features import FeatureError, FeatureSpace, GLOBAL_FEATURES, UserCombination
from .flowtable import IpFlowKey

CATEGORIES = ("SYN_WEATHER", "FIN_ANIMAL", "RST_WIND", "COUNTER_FIRE", "NORMAL_BIRD", "PING")

_OPS = {
    ">": lambda a, b: a > b,
    "<": lambda a, b: a < b,
    ">=": lambda a, b: a >= b,
    "<=": lambda a, b: a <= b,
    "==": lambda a, b: a == b,
}

_TOKEN_RE = re.compile(
    r'"[^"]*"|->|>=|<=|==|[A-Za-z_][A-Za-z0-9_-]*|-?\d+(?:\.\d+)?|[:=+\-<>]'
)


@dataclass(frozen=True)
class RuleError:
    line: int
    column: int
    message: str

    def __str__(self):
        return f"line {self.line}, col {self.column}: {self.message}"


@dataclass(frozen=True)
class Rule:
    """One threshold condition bound to a sound asset."""

    id: str
    condition: tuple  # disjunction of conjunctions of (lhs, op, rhs) terms
    sound_id: str
    category: str = "FIN_ANIMAL"
    gain: float = 1.0
    enabled: bool = True
    muted: bool = False

    def references(self) -> set:
        names = set()
        for conj in self.condition:
            for lhs, _op, rhs in conj:
                for kind, val in (lhs, rhs):
                    if kind == "f":
                        names.add(val)
        return names

    @property
    def window_scoped(self) -> bool:
        """True when the condition reads only window-global counters."""
        refs = self.references()
        return bool(refs) and refs <= set(GLOBAL_FEATURES)

    def holds(self, view: dict) -> bool:
        for conj in self.condition:
            ok = True
            for (lk, lv), op, (rk, rv) in conj:
                a = lv if lk == "i" else view[lv]
                b = rv if rk == "i" else view[rv]
                if not _OPS[op](a, b):
                    ok = False
                    break
            if ok:
                return True
        return False

    @cached_property
    def predicate(self):
        """holds() compiled to one closure; the evaluation hot path uses this.

        Safe to eval: terms are integers or feature names that already passed
        the parser's token grammar and namespace resolution.
        """
        def term_src(term):
            kind, value = term
            return repr(value) if kind == "i" else f"v[{value!r}]"

        src = " or ".join(
            "(" + " and ".join(
                f"{term_src(lhs)} {op} {term_src(rhs)}" for lhs, op, rhs in conj
            ) + ")"
            for conj in self.condition
        )
        return eval(f"lambda v: {src}", {"__builtins__": {}})  # noqa: S307

    def to_line(self) -> str:
        parts = []
        for conj in self.condition:
            comps = [f"{_term_text(l)} {op} {_term_text(r)}" for l, op, r in conj]
            parts.append(" and ".join(comps))
        text = " or ".join(parts)
        line = f'{self.id}: {text} -> sound "{self.sound_id}" gain {self.gain:g} category {self.category}'
        if self.muted:
            line += " muted"
        if not self.enabled:
            line += " disabled"
        return line


def _term_text(term) -> str:
    kind, val = term
    return str(val)


@dataclass(frozen=True)
class EventInstance:
    """One firing of one rule for one IP flow in one window."""

    window_index: int
    rule_id: str
    sound_id: str
    category: str
    ip_flow_key: Optional[IpFlowKey]
    features: dict


@dataclass(frozen=True)
class RuleSet:
    """Immutable rule snapshot; live edits build a new one (swap at rotation)."""

    rules: tuple  # of Rule, document order
    space: FeatureSpace

    def __iter__(self):
        return iter(self.rules)

    def __len__(self):
        return len(self.rules)

    def get(self, rule_id: str) -> Optional[Rule]:
        for rule in self.rules:
            if rule.id == rule_id:
                return rule
        return None

    def _replace_rule(self, rule_id: str, **changes) -> "RuleSet":
        rule = self.get(rule_id)
        if rule is None:
            raise KeyError(f"unknown rule: {rule_id}")
        new = tuple(replace(r, **changes) if r.id == rule_id else r for r in self.rules)
        return RuleSet(new, self.space)

    def set_gain(self, rule_id: str, gain: float) -> "RuleSet":
        if not 0.0 <= gain <= 1.0:
            raise ValueError("gain must be within [0, 1]")
        return self._replace_rule(rule_id, gain=gain)

    def set_muted(self, rule_id: str, muted: bool) -> "RuleSet":
        return self._replace_rule(rule_id, muted=muted)

    def set_enabled(self, rule_id: str, enabled: bool) -> "RuleSet":
        return self._replace_rule(rule_id, enabled=enabled)

    def assign_sound(self, rule_id: str, sound_id: str, asset_ids=None) -> "RuleSet":
        if asset_ids is not None and sound_id not in asset_ids:
            raise KeyError(f"unknown sound asset: {sound_id}")
        return self._replace_rule(rule_id, sound_id=sound_id)

    def sound_ids(self) -> set:
        return {r.sound_id for r in self.rules}

    def to_text(self) -> str:
        lines = ["# flowscape rule document"]
        for combo in self.space.user:
            terms = []
            for i, (sign, term) in enumerate(combo.terms):
                opr = "" if i == 0 and sign > 0 else ("+ " if sign > 0 else "- ")
                terms.append(f"{opr}{term}")
            lines.append(f"{combo.name} = " + " ".join(terms))
        lines.extend(rule.to_line() for rule in self.rules)
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Parsing

def _tokenize(text: str, line_no: int, errors: list) -> Optional[list]:
    tokens = []
    pos = 0
    while pos < len(text):
        ch = text[pos]
        if ch in " \t":
            pos += 1
            continue
        if ch == "#":
            break
        m = _TOKEN_RE.match(text, pos)
        if not m or m.start() != pos:
            errors.append(RuleError(line_no, pos + 1, f"unexpected character {ch!r}"))
            return None
        tokens.append((m.group(0), pos + 1))
        pos = m.end()
    return tokens


class _LineParser:
    def __init__(self, tokens, line_no):
        self.tokens = tokens
        self.line_no = line_no
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos][0] if self.pos < len(self.tokens) else None

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, message) -> RuleError:
        col = self.tokens[self.pos][1] if self.pos < len(self.tokens) else (
            self.tokens[-1][1] + len(self.tokens[-1][0]) if self.tokens else 1
        )
        return RuleError(self.line_no, col, message)

    def expect(self, want):
        if self.peek() != want:
            raise _ParseFail(self.error(f"expected {want!r}"))
        return self.next()


class _ParseFail(Exception):
    def __init__(self, err: RuleError):
        self.err = err


_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_-]*$")
_INT_RE = re.compile(r"-?\d+$")


def _parse_term(p: _LineParser):
    tok = p.peek()
    if tok is None:
        raise _ParseFail(p.error("expected a feature name or integer"))
    if _INT_RE.match(tok):
        p.next()
        return ("i", int(tok))
    if _NAME_RE.match(tok) and tok not in ("and", "or", "sound", "gain", "category", "muted", "disabled"):
        p.next()
        return ("f", tok)
    raise _ParseFail(p.error(f"expected a feature name or integer, got {tok!r}"))


def _parse_condition(p: _LineParser):
    disjunction = []
    while True:
        conj = []
        while True:
            lhs = _parse_term(p)
            op = p.peek()
            if op not in _OPS:
                raise _ParseFail(p.error("expected a comparison operator"))
            p.next()
            rhs = _parse_term(p)
            conj.append((lhs, op, rhs))
            if p.peek() == "and":
                p.next()
                continue
            break
        disjunction.append(tuple(conj))
        if p.peek() == "or":
            p.next()
            continue
        break
    return tuple(disjunction)


def _parse_rule_line(p: _LineParser, rule_id: str) -> Rule:
    p.expect(":")
    condition = _parse_condition(p)
    p.expect("->")
    p.expect("sound")
    tok = p.peek()
    if tok is None or not (tok.startswith('"') and tok.endswith('"') and len(tok) >= 2):
        raise _ParseFail(p.error("expected a quoted sound id"))
    p.next()
    sound_id = tok[1:-1]
    gain = 1.0
    category = None
    muted = False
    enabled = True
    while p.peek() is not None:
        tok = p.next()[0]
        if tok == "gain":
            val = p.peek()
            try:
                gain = float(val)
            except (TypeError, ValueError):
                raise _ParseFail(p.error("expected a gain value"))
            p.next()
            if not 0.0 <= gain <= 1.0:
                raise _ParseFail(p.error("gain must be within [0, 1]"))
        elif tok == "category":
            val = p.peek()
            if val not in CATEGORIES:
                raise _ParseFail(p.error(f"unknown category {val!r}"))
            category = p.next()[0]
        elif tok == "muted":
            muted = True
        elif tok == "disabled":
            enabled = False
        else:
            raise _ParseFail(RuleError(p.line_no, p.tokens[p.pos - 1][1], f"unexpected token {tok!r}"))
    return Rule(
        id=rule_id,
        condition=condition,
        sound_id=sound_id,
        category=category or "FIN_ANIMAL",
        gain=gain,
        enabled=enabled,
        muted=muted,
    )


def _parse_feature_line(p: _LineParser, name: str) -> UserCombination:
    p.expect("=")
    terms = []
    sign = 1
    first = True
    while True:
        tok = p.peek()
        if tok is None:
            if first:
                raise _ParseFail(p.error("expected a term"))
            break
        if not first:
            if tok == "+":
                sign = 1
            elif tok == "-":
                sign = -1
            else:
                raise _ParseFail(p.error("expected '+' or '-'"))
            p.next()
        _kind, val = _parse_term(p)
        terms.append((sign, val))
        first = False
        sign = 1
    return UserCombination(name, tuple(terms))


def parse_document(text: str) -> tuple[list, list, list]:
    """Parse a rule document into (rules, feature declarations, errors)."""
    rules: list[Rule] = []
    combos: list[UserCombination] = []
    errors: list[RuleError] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        tokens = _tokenize(line, line_no, errors)
        if not tokens:
            continue
        p = _LineParser(tokens, line_no)
        head = p.peek()
        if not _NAME_RE.match(head or ""):
            errors.append(p.error("expected a rule or feature name"))
            continue
        p.next()
        try:
            if p.peek() == ":":
                rules.append(_parse_rule_line(p, head))
            elif p.peek() == "=":
                combos.append(_parse_feature_line(p, head))
            else:
                errors.append(p.error("expected ':' (rule) or '=' (feature declaration)"))
        except _ParseFail as fail:
            errors.append(fail.err)
    return rules, combos, errors


def load_rules(text: Optional[str] = None, asset_ids=None,
               include_defaults: bool = True) -> tuple[Optional[RuleSet], list]:
    """Build the active rule set from a document.

    With no document the 35 defaults load as-is; otherwise document rules
    overlay the defaults by id (same id replaces, new ids append). Semantic
    problems are collected, not fail-fast; on any error the set is None.
    """
    doc_rules, doc_combos, errors = parse_document(text) if text else ([], [], [])
    base_rules, base_combos, base_errors = (
        parse_document(DEFAULT_RULES_TEXT) if include_defaults else ([], [], [])
    )
    assert not base_errors, base_errors
    combos = list(base_combos)
    seen_combo = {c.name for c in combos}
    for combo in doc_combos:
        if combo.name in seen_combo:
            errors.append(RuleError(0, 0, f"duplicate feature declaration: {combo.name}"))
        else:
            combos.append(combo)
            seen_combo.add(combo.name)
    try:
        space = FeatureSpace(tuple(combos))
    except FeatureError as exc:
        errors.append(RuleError(0, 0, str(exc)))
        return None, errors

    merged: dict[str, Rule] = {r.id: r for r in base_rules}
    order = [r.id for r in base_rules]
    for rule in doc_rules:
        if rule.id not in merged:
            order.append(rule.id)
        merged[rule.id] = rule

    final = []
    for rule_id in order:
        rule = merged[rule_id]
        canon = []
        bad = False
        for conj in rule.condition:
            comps = []
            for lhs, op, rhs in conj:
                try:
                    lhs = ("f", space.resolve(lhs[1])) if lhs[0] == "f" else lhs
                    rhs = ("f", space.resolve(rhs[1])) if rhs[0] == "f" else rhs
                except FeatureError as exc:
                    errors.append(RuleError(0, 0, f"rule {rule.id}: {exc}"))
                    bad = True
                comps.append((lhs, op, rhs))
            canon.append(tuple(comps))
        if asset_ids is not None and rule.sound_id not in asset_ids:
            errors.append(RuleError(0, 0, f"rule {rule.id}: unknown sound asset: {rule.sound_id}"))
            bad = True
        if not bad:
            final.append(replace(rule, condition=tuple(canon)))
    if errors:
        return None, errors
    return RuleSet(tuple(final), space), []


# ---------------------------------------------------------------------------
# Evaluation

def evaluate(rules: Iterable[Rule], view: dict, key: Optional[IpFlowKey],
             window_index: int = 0) -> list:
    """Events for one feature view: one instance per enabled rule that holds."""
    events = []
    for rule in rules:
        if rule.enabled and rule.predicate(view):
            events.append(EventInstance(
                window_index=window_index,
                rule_id=rule.id,
                sound_id=rule.sound_id,
                category=rule.category,
                ip_flow_key=key,
                features=view,
            ))
    events.sort(key=_event_order)
    return events


def evaluate_window(ruleset: RuleSet, flow_views: list, window_index: int,
                    traffic_flow_count: int, ip_flow_count: int) -> list:
    """Events for a whole window.

    flow_views: list of (IpFlowKey, view) pairs. Per-flow rules run against
    every view; window-scoped rules (global counters only) fire at most once,
    attached to the canonically smallest flow key.
    """
    per_flow = [r for r in ruleset if r.enabled and not r.window_scoped]
    window_rules = [r for r in ruleset if r.enabled and r.window_scoped]
    events = []
    for key, view in flow_views:
        events.extend(evaluate(per_flow, view, key, window_index))
    if window_rules:
        if flow_views:
            key, view = min(flow_views, key=lambda item: item[0])
        else:
            from .flowtable import N_COUNTERS

            key = None
            view = ruleset.space.combine([0] * N_COUNTERS, traffic_flow_count, ip_flow_count)
        events.extend(evaluate(window_rules, view, key, window_index))
    events.sort(key=_event_order)
    return events


def _event_order(ev: EventInstance):
    return (ev.rule_id, ev.ip_flow_key if ev.ip_flow_key is not None else IpFlowKey(b"", b"", -1))


# ---------------------------------------------------------------------------
# Default mapping: 34 threshold rows + the ICMP ping rule.

DEFAULT_RULES_TEXT = """\
# Default threshold-to-sound mapping. Weather/water sounds follow connection
# attempts (SYN family), animal calls follow FIN/ACK/URG/PSH/NULL behaviour,
# wind follows resets, fire follows flow-count surges, forest birds mark
# confirmed-normal states, and the woodpecker marks ping activity.
rule1: SYN-in-IP < 30 and SYN-ACK-out-IP > 0 and ACK-in-IP > 0 and RST-out-IP < 10 -> sound "forest_bird" gain 0.5 category NORMAL_BIRD
rule2: SYN-in-IP > 10 and SYN-in-IP < 30 and PSH-ACK-out-IP < 6 -> sound "rain_on_roof" gain 1.0 category SYN_WEATHER
rule3: SYN-in-IP > 20 and SYN-ACK-out-IP < 10 -> sound "rain_on_roof" gain 1.0 category SYN_WEATHER
rule4: SYN-in-IP > 300 and SYN-ACK-out-IP < 50 and SYN-in-IP < 1000 -> sound "thunder" gain 1.0 category SYN_WEATHER
rule5: SYN-in-IP > 1000 -> sound "creek" gain 1.0 category SYN_WEATHER
rule6: SYN-out-IP < 10 and SYN-ACK-in-IP < 2 and ACK-out-IP < 3 -> sound "rain" gain 0.7 category SYN_WEATHER
rule7: SYN-out-IP < 30 and SYN-ACK-in-IP > 0 and ACK-out-IP > 0 and RST-in-IP < 10 -> sound "forest_bird" gain 0.5 category NORMAL_BIRD
rule8: ACK-in-IP > 1 and SYN-in-IP == 0 and SYN-out-IP == 0 and SYN-ACK-in-IP == 0 and SYN-ACK-out-IP == 0 and ACK-out-IP == 0 and FIN-in-IP == 0 and FIN-out-IP == 0 and RST-in-IP == 0 and RST-out-IP == 0 and PSH-ACK-in-IP == 0 and PSH-ACK-out-IP == 0 and NULL-in-IP == 0 and NULL-out-IP == 0 and URG-PSH-FIN-in-IP == 0 and URG-PSH-FIN-out-IP == 0 and LAND-in-IP == 0 and LAND-out-IP == 0 and ICMP-in == 0 and ICMP-out == 0 -> sound "seagulls" gain 1.0 category FIN_ANIMAL
rule9: ACK-out-IP > 1 and SYN-in-IP == 0 and SYN-out-IP == 0 and SYN-ACK-in-IP == 0 and SYN-ACK-out-IP == 0 and ACK-in-IP == 0 and FIN-in-IP == 0 and FIN-out-IP == 0 and RST-in-IP == 0 and RST-out-IP == 0 and PSH-ACK-in-IP == 0 and PSH-ACK-out-IP == 0 and NULL-in-IP == 0 and NULL-out-IP == 0 and URG-PSH-FIN-in-IP == 0 and URG-PSH-FIN-out-IP == 0 and LAND-in-IP == 0 and LAND-out-IP == 0 and ICMP-in == 0 and ICMP-out == 0 -> sound "loon" gain 0.7 category FIN_ANIMAL
rule10: FIN-in-IP > 9 and FIN-in-IP > SYN-out-IP and FIN-in-IP > SYN-in-IP and FC-4 > 10 -> sound "cricket" gain 1.0 category FIN_ANIMAL
rule11: FIN-in-IP < 50 and FIN-in-IP <= SYN-out-IP or FIN-in-IP < 50 and FIN-in-IP <= SYN-in-IP -> sound "forest_bird" gain 0.5 category NORMAL_BIRD
rule12: FIN-out-IP > 9 and FIN-out-IP > SYN-out-IP and FIN-out-IP > SYN-in-IP and FC-3 > 10 -> sound "sheep" gain 0.7 category FIN_ANIMAL
rule13: FC-7 > 9 -> sound "owl" gain 1.0 category FIN_ANIMAL
rule14: FC-7 < 10 -> sound "forest_bird" gain 0.5 category NORMAL_BIRD
rule15: FC-8 > 9 -> sound "horse_snort" gain 0.7 category FIN_ANIMAL
rule16: FC-8 < 10 -> sound "forest_bird" gain 0.5 category NORMAL_BIRD
rule17: NULL-in-IP > 0 -> sound "frog" gain 1.0 category FIN_ANIMAL
rule18: NULL-out-IP > 0 -> sound "frog" gain 0.7 category FIN_ANIMAL
rule19: URG-PSH-FIN-in-IP > 0 -> sound "wolf" gain 1.0 category FIN_ANIMAL
rule20: URG-PSH-FIN-out-IP > 0 -> sound "wolf" gain 0.7 category FIN_ANIMAL
rule21: LAND-in-IP > 0 -> sound "beach" gain 1.0 category SYN_WEATHER
rule22: LAND-out-IP > 0 -> sound "beach" gain 0.7 category SYN_WEATHER
rule23: RST-in-IP > 25 and ACK-in-IP < 250 -> sound "wind_on_grass" gain 1.0 category RST_WIND
rule24: RST-out-IP > 25 and ACK-out-IP < 250 -> sound "wind_on_grass" gain 0.7 category RST_WIND
rule25: FC-1 > 4 -> sound "fountain" gain 0.7 category SYN_WEATHER
rule26: FC-1 < 5 -> sound "forest_bird" gain 0.5 category NORMAL_BIRD
rule27: FC-2 > 4 -> sound "heavy_rain" gain 1.0 category SYN_WEATHER
rule28: FC-2 < 5 -> sound "forest_bird" gain 0.5 category NORMAL_BIRD
rule29: RST-out-IP > 5 and FC-5 < RST-out-IP and ACK-out-IP < 7 -> sound "wind" gain 0.7 category RST_WIND
rule30: RST-in-IP > 5 and FC-6 < RST-in-IP and ACK-in-IP < 7 -> sound "wind" gain 1.0 category RST_WIND
rule31: SYN-ACK-out-IP > 20 -> sound "snow_storm" gain 0.7 category SYN_WEATHER
rule32: SYN-ACK-in-IP > 20 -> sound "walk_in_snow" gain 0.7 category SYN_WEATHER
rule33: TrafficFlowCounter > 1000 -> sound "fire" gain 1.0 category COUNTER_FIRE
rule34: IPFlowCounter > 600 -> sound "fire" gain 1.0 category COUNTER_FIRE
rule35: ICMP-in > 0 or ICMP-out > 0 -> sound "woodpecker" gain 1.0 category PING
"""
