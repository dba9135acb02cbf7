"""Per-IP-flow feature vectors.

Raw counter aliases plus the eight built-in signed combinations, with
optional user-declared add/subtract combinations on top. The two
window-global flow counters are replicated into every view so rules can
reference them uniformly.
"""

from __future__ import annotations

from dataclasses import dataclass

from .flowtable import (
    IN, OUT,
    PT_ACK, PT_FIN, PT_FIN_ACK, PT_ICMP, PT_LAND, PT_NULL, PT_PSH_ACK,
    PT_RST, PT_RST_ACK, PT_SYN, PT_SYN_ACK, PT_XMAS,
)

RAW_FEATURES = (
    "SYN-in-IP", "SYN-out-IP", "SYN-ACK-in-IP", "SYN-ACK-out-IP",
    "ACK-in-IP", "ACK-out-IP", "FIN-in-IP", "FIN-out-IP",
    "RST-in-IP", "RST-out-IP", "PSH-ACK-in-IP", "PSH-ACK-out-IP",
    "NULL-in-IP", "NULL-out-IP", "URG-PSH-FIN-in-IP", "URG-PSH-FIN-out-IP",
    "LAND-in-IP", "LAND-out-IP", "ICMP-in", "ICMP-out",
)

COMBINED_FEATURES = ("FC-1", "FC-2", "FC-3", "FC-4", "FC-5", "FC-6", "FC-7", "FC-8")

GLOBAL_FEATURES = ("TrafficFlowCounter", "IPFlowCounter")

BUILTIN_FEATURES = RAW_FEATURES + COMBINED_FEATURES + GLOBAL_FEATURES

# accepted alternate spellings (reads only; both sides are reserved names)
_ALIASES = {f"FC{i}": f"FC-{i}" for i in range(1, 9)}


class FeatureError(ValueError):
    """Bad feature reference or declaration."""


def canonical_name(name: str) -> str:
    return _ALIASES.get(name, name)


def _idx(ptype: int, bucket: int) -> int:
    return ptype * 2 + bucket


def raw_features(counters) -> dict:
    """Rule-feature aliases over one flow's 30 packet-type counters.

    FIN and RST aliases fold in their ACK-carrying variants so graceful
    closes and standard resets are counted.
    """
    c = counters
    return {
        "SYN-in-IP": c[_idx(PT_SYN, IN)],
        "SYN-out-IP": c[_idx(PT_SYN, OUT)],
        "SYN-ACK-in-IP": c[_idx(PT_SYN_ACK, IN)],
        "SYN-ACK-out-IP": c[_idx(PT_SYN_ACK, OUT)],
        "ACK-in-IP": c[_idx(PT_ACK, IN)],
        "ACK-out-IP": c[_idx(PT_ACK, OUT)],
        "FIN-in-IP": c[_idx(PT_FIN, IN)] + c[_idx(PT_FIN_ACK, IN)],
        "FIN-out-IP": c[_idx(PT_FIN, OUT)] + c[_idx(PT_FIN_ACK, OUT)],
        "RST-in-IP": c[_idx(PT_RST, IN)] + c[_idx(PT_RST_ACK, IN)],
        "RST-out-IP": c[_idx(PT_RST, OUT)] + c[_idx(PT_RST_ACK, OUT)],
        "PSH-ACK-in-IP": c[_idx(PT_PSH_ACK, IN)],
        "PSH-ACK-out-IP": c[_idx(PT_PSH_ACK, OUT)],
        "NULL-in-IP": c[_idx(PT_NULL, IN)],
        "NULL-out-IP": c[_idx(PT_NULL, OUT)],
        "URG-PSH-FIN-in-IP": c[_idx(PT_XMAS, IN)],
        "URG-PSH-FIN-out-IP": c[_idx(PT_XMAS, OUT)],
        "LAND-in-IP": c[_idx(PT_LAND, IN)],
        "LAND-out-IP": c[_idx(PT_LAND, OUT)],
        "ICMP-in": c[_idx(PT_ICMP, IN)],
        "ICMP-out": c[_idx(PT_ICMP, OUT)],
    }


def _combinations(v: dict) -> dict:
    # true signed arithmetic, no clamping: the sign carries direction
    return {
        "FC-1": v["SYN-out-IP"] - v["SYN-ACK-in-IP"],
        "FC-2": v["SYN-in-IP"] - v["SYN-ACK-out-IP"],
        "FC-3": v["FIN-out-IP"] - v["FIN-in-IP"],
        "FC-4": v["FIN-in-IP"] - v["FIN-out-IP"],
        "FC-5": v["SYN-in-IP"] + v["SYN-out-IP"] - v["FIN-out-IP"],
        "FC-6": v["SYN-in-IP"] + v["SYN-out-IP"] - v["FIN-in-IP"],
        "FC-7": v["FIN-in-IP"] - v["FIN-out-IP"] - v["RST-out-IP"],
        "FC-8": v["FIN-out-IP"] - v["FIN-in-IP"] - v["RST-in-IP"],
    }


@dataclass(frozen=True)
class UserCombination:
    """A named add/subtract expression over existing feature names."""

    name: str
    terms: tuple  # of (sign: +1|-1, term: str feature name | int literal)

    def evaluate(self, view: dict) -> int:
        total = 0
        for sign, term in self.terms:
            total += sign * (term if isinstance(term, int) else view[term])
        return total


class FeatureSpace:
    """The resolvable feature namespace: built-ins plus user combinations."""

    def __init__(self, combinations: tuple[UserCombination, ...] = ()):
        names = list(BUILTIN_FEATURES)
        known = set(names) | set(_ALIASES)
        resolved_combos = []
        for combo in combinations:
            if combo.name in known:
                raise FeatureError(f"feature name collides with an existing feature: {combo.name}")
            terms = []
            for sign, term in combo.terms:
                if isinstance(term, str):
                    term = canonical_name(term)
                    if term not in known:
                        raise FeatureError(f"unknown feature: {term}")
                terms.append((sign, term))
            resolved_combos.append(UserCombination(combo.name, tuple(terms)))
            names.append(combo.name)
            known.add(combo.name)
        self.user = tuple(resolved_combos)
        self.names = tuple(names)
        self._known = known

    def resolve(self, name: str) -> str:
        resolved = canonical_name(name)
        if resolved not in self._known:
            raise FeatureError(f"unknown feature: {name}")
        return resolved

    def combine(self, counters, traffic_flow_count: int, ip_flow_count: int) -> dict:
        """Full feature view for one IP flow. Pure: counters in, dict out."""
        view = raw_features(counters)
        view.update(_combinations(view))
        view["TrafficFlowCounter"] = traffic_flow_count
        view["IPFlowCounter"] = ip_flow_count
        for combo in self.user:
            view[combo.name] = combo.evaluate(view)
        return view


DEFAULT_SPACE = FeatureSpace()
