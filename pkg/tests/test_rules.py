import random

import pytest

from flowscape.features import BUILTIN_FEATURES
from flowscape.flowtable import IpFlowKey
from flowscape.rules import (
    DEFAULT_RULES_TEXT, EventInstance, evaluate, evaluate_window, load_rules, parse_document,
)

from rule_oracle import ORACLE_SOUNDS, make_view, oracle_fired, random_view

KEY = IpFlowKey(b"\x0a\x00\x00\x07", b"\xcb\x00\x71\x05", 0)


def default_rules():
    ruleset, errors = load_rules()
    assert not errors
    return ruleset


def fired_ids(ruleset, view):
    return {ev.rule_id for ev in evaluate(ruleset.rules, view, KEY)}


def test_default_rule_count():
    assert len(default_rules()) == 35


def test_every_default_reference_resolves():
    ruleset = default_rules()
    for rule in ruleset:
        for name in rule.references():
            assert ruleset.space.resolve(name) == name


def test_syn_flood_escalation_examples():
    ruleset = default_rules()
    assert "rule5" in fired_ids(ruleset, make_view(**{"SYN-in-IP": 1200}))
    assert "rule4" in fired_ids(ruleset, make_view(**{"SYN-in-IP": 400, "SYN-ACK-out-IP": 10}))


def test_multi_rule_view_matches_oracle():
    view = make_view(**{"SYN-in-IP": 15, "SYN-ACK-out-IP": 3, "ACK-in-IP": 5,
                        "RST-out-IP": 0, "PSH-ACK-out-IP": 2})
    fired = fired_ids(default_rules(), view)
    assert fired == oracle_fired(view)
    assert {"rule1", "rule2"} <= fired


def test_all_zero_view_fires_upper_bound_rules_only():
    view = make_view()
    fired = fired_ids(default_rules(), view)
    assert fired == oracle_fired(view)
    assert fired == {"rule6", "rule11", "rule14", "rule16", "rule26", "rule28"}


def test_escalation_walk():
    # rising incoming SYN counts move the soundscape rain -> rain_on_roof ->
    # thunder -> creek; the thunder rule's upper bound excludes it at 1500
    ruleset = default_rules()
    at = {n: fired_ids(ruleset, make_view(**{"SYN-in-IP": n})) for n in (5, 25, 400, 1500)}
    assert "rule6" in at[5] and "rule3" not in at[5]
    assert "rule3" in at[25] and "rule2" in at[25]
    assert "rule4" in at[400] and "rule5" not in at[400]
    assert "rule5" in at[1500] and "rule4" not in at[1500]


def test_compiled_predicate_matches_interpreter():
    # the eval-compiled fast path agrees with the readable reference walk
    ruleset = default_rules()
    rng = random.Random(5150)
    for _ in range(500):
        view = random_view(rng)
        for rule in ruleset:
            assert rule.predicate(view) == rule.holds(view), rule.id


def test_oracle_agreement_10k_random_views():
    ruleset = default_rules()
    rng = random.Random(20260810)
    mismatches = 0
    for _ in range(10_000):
        view = random_view(rng)
        if fired_ids(ruleset, view) != oracle_fired(view):
            mismatches += 1
    assert mismatches == 0


def test_default_sounds_match_oracle_table():
    ruleset = default_rules()
    for rule in ruleset:
        assert rule.sound_id == ORACLE_SOUNDS[rule.id]


def test_event_order_canonical():
    ruleset = default_rules()
    keys = [IpFlowKey(bytes([10, 0, 0, i]), bytes([203, 0, 113, 5]), 0) for i in (3, 1, 2)]
    views = [(k, make_view(**{"NULL-in-IP": 1})) for k in keys]
    events = evaluate_window(ruleset, views, 0, 3, 3)
    ordering = [(ev.rule_id, ev.ip_flow_key) for ev in events]
    assert ordering == sorted(ordering)


def test_window_scoped_rules_fire_once():
    ruleset = default_rules()
    views = [(IpFlowKey(bytes([10, 0, 0, i]), bytes([203, 0, 113, 5]), 0),
              make_view(**{"SYN-in-IP": 2, "IPFlowCounter": 700, "TrafficFlowCounter": 700}))
             for i in range(1, 6)]
    events = evaluate_window(ruleset, views, 0, 700, 700)
    fire_events = [ev for ev in events if ev.rule_id == "rule34"]
    assert len(fire_events) == 1
    assert fire_events[0].ip_flow_key == min(k for k, _ in views)


def test_disabled_rule_does_not_fire_muted_does():
    ruleset = default_rules()
    view = make_view(**{"NULL-in-IP": 4})
    muted = ruleset.set_muted("rule17", True)
    assert "rule17" in fired_ids(muted, view)
    disabled = ruleset.set_enabled("rule17", False)
    assert "rule17" not in fired_ids(disabled, view)


def test_custom_rule_appended():
    text = 'R_custom: SYN-in-IP > 50 and FC-2 > 4 -> sound "heavy_rain" gain 0.8\n'
    ruleset, errors = load_rules(text)
    assert not errors
    assert len(ruleset) == 36
    rule = ruleset.get("R_custom")
    assert rule.gain == 0.8
    assert "R_custom" in fired_ids(ruleset, make_view(**{"SYN-in-IP": 60}))


def test_rule_replaces_default_by_id():
    text = 'rule4: SYN-in-IP > 500 -> sound "thunder"\n'
    ruleset, errors = load_rules(text)
    assert not errors
    assert len(ruleset) == 35
    assert "rule4" not in fired_ids(ruleset, make_view(**{"SYN-in-IP": 400}))
    assert "rule4" in fired_ids(ruleset, make_view(**{"SYN-in-IP": 600}))


def test_unknown_feature_collected_not_fatal():
    ruleset, errors = load_rules('bad: NOPE-in-IP > 1 -> sound "frog"\n')
    assert ruleset is None
    assert any("unknown feature" in str(e) for e in errors)


def test_unknown_sound_asset_named():
    ruleset, errors = load_rules('x: SYN-in-IP > 1 -> sound "nonexistent"\n',
                                 asset_ids={"frog", "thunder"})
    assert ruleset is None
    assert any("nonexistent" in str(e) for e in errors)


def test_parse_error_has_line_and_column():
    _rules, _combos, errors = parse_document("x: SYN-in-IP >\n")
    assert errors and errors[0].line == 1 and errors[0].column > 0


def test_feature_declaration_in_document():
    from flowscape.flowtable import IN, N_COUNTERS, PT_NULL, PT_SYN

    text = (
        "FC-9 = SYN-in-IP + NULL-in-IP\n"
        'niner: FC-9 > 6 -> sound "frog"\n'
    )
    ruleset, errors = load_rules(text)
    assert not errors
    c = [0] * N_COUNTERS
    c[PT_SYN * 2 + IN] = 5
    c[PT_NULL * 2 + IN] = 2
    view = ruleset.space.combine(c, 1, 1)
    assert view["FC-9"] == 7
    assert "niner" in fired_ids(ruleset, view)


def test_document_round_trip():
    ruleset, _ = load_rules('R_custom: SYN-in-IP > 50 -> sound "heavy_rain" gain 0.8\n')
    text = ruleset.to_text()
    again, errors = load_rules(text, include_defaults=False)
    assert not errors
    assert [r.to_line() for r in again] == [r.to_line() for r in ruleset]


def test_gain_and_sound_mutations():
    ruleset = default_rules()
    tuned = ruleset.set_gain("rule4", 0.25)
    assert tuned.get("rule4").gain == 0.25
    assigned = ruleset.assign_sound("rule5", "waterfall", asset_ids={"waterfall"})
    assert assigned.get("rule5").sound_id == "waterfall"
    with pytest.raises(KeyError):
        ruleset.assign_sound("rule5", "nonexistent", asset_ids={"waterfall"})
    with pytest.raises(ValueError):
        ruleset.set_gain("rule4", 1.5)


def test_mute_state_survives_round_trip():
    ruleset = default_rules().set_muted("rule4", True).set_enabled("rule14", False)
    again, errors = load_rules(ruleset.to_text(), include_defaults=False)
    assert not errors
    assert again.get("rule4").muted
    assert not again.get("rule14").enabled
