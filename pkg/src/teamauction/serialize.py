"""JSON instance files, outcome and nu reports.

Instance layout::

    {"elements": [...], "ownership": {elem: agent},
     "feasible": {"explicit": [[...], ...]}
               | {"graph": {"directed": bool, "vertices": n,
                            "edges": [{"id", "u", "v"}], "s": s, "t": t}},
     "costs": {elem: number}}

Element and agent ids may be integers or strings. JSON object keys are always
strings, so keyed maps are resolved back through ``str(id)``; two ids with
the same string form are rejected.
"""

from __future__ import annotations

import json
from typing import Dict, Mapping, Optional, Tuple

import jsonschema

from .frugality import NuResult
from .mechanisms import AuctionOutcome
from .setsystem import BidProfile, ExplicitFamily, OwnedSetSystem, StGraph

_ID = {"type": ["integer", "string"]}

INSTANCE_SCHEMA = {
    "type": "object",
    "required": ["elements", "ownership", "feasible"],
    "additionalProperties": False,
    "properties": {
        "elements": {"type": "array", "items": _ID, "minItems": 1},
        "ownership": {"type": "object", "additionalProperties": _ID},
        "feasible": {
            "type": "object",
            "minProperties": 1,
            "maxProperties": 1,
            "additionalProperties": False,
            "properties": {
                "explicit": {
                    "type": "array",
                    "minItems": 1,
                    "items": {"type": "array", "items": _ID, "minItems": 1},
                },
                "graph": {
                    "type": "object",
                    "required": ["vertices", "edges", "s", "t"],
                    "additionalProperties": False,
                    "properties": {
                        "directed": {"type": "boolean"},
                        "vertices": {"type": "integer", "minimum": 2},
                        "edges": {
                            "type": "array",
                            "items": {
                                "type": "object",
                                "required": ["id", "u", "v"],
                                "additionalProperties": False,
                                "properties": {
                                    "id": _ID,
                                    "u": {"type": "integer", "minimum": 0},
                                    "v": {"type": "integer", "minimum": 0},
                                },
                            },
                        },
                        "s": {"type": "integer", "minimum": 0},
                        "t": {"type": "integer", "minimum": 0},
                    },
                },
            },
        },
        "costs": {"type": "object", "additionalProperties": {"type": "number", "minimum": 0}},
    },
}

BIDS_SCHEMA = {
    "type": "object",
    "required": ["bids"],
    "additionalProperties": False,
    "properties": {
        "bids": {"type": "object", "additionalProperties": {"type": "number", "minimum": 0}},
        "reported_owner": {"type": "object", "additionalProperties": _ID},
    },
}


class FormatError(ValueError):
    pass


def _validate(doc, schema) -> None:
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise FormatError(f"{where}: {exc.message}") from None


def _keymap(ids) -> Dict[str, object]:
    out = {}
    for x in ids:
        if str(x) in out:
            raise FormatError(f"ids {out[str(x)]!r} and {x!r} collide as JSON keys")
        out[str(x)] = x
    return out


def _resolve(doc_map: Mapping[str, object], keys: Dict[str, object], what: str) -> Dict:
    unknown = sorted(set(doc_map) - set(keys))
    if unknown:
        raise FormatError(f"{what} mentions unknown elements {unknown}")
    return {keys[k]: v for k, v in doc_map.items()}


def amount(x) -> Optional[float]:
    """Round to 12 significant digits for output."""
    return None if x is None else float(format(float(x), ".12g"))


def instance_from_json(doc) -> Tuple[OwnedSetSystem, Optional[Dict]]:
    """Parse and validate an instance document; returns ``(system, costs or None)``."""
    _validate(doc, INSTANCE_SCHEMA)
    elements = tuple(doc["elements"])
    keys = _keymap(elements)
    ownership = _resolve(doc["ownership"], keys, "ownership")
    feas = doc["feasible"]
    if "explicit" in feas:
        source = ExplicitFamily(tuple(tuple(s) for s in feas["explicit"]))
    else:
        g = feas["graph"]
        source = StGraph(g["vertices"], tuple((e["id"], e["u"], e["v"]) for e in g["edges"]),
                         g["s"], g["t"], g.get("directed", True))
    sys = OwnedSetSystem(elements, source, ownership)
    costs = None
    if "costs" in doc:
        costs = _resolve(doc["costs"], keys, "costs")
        missing = [e for e in elements if e not in costs]
        if missing:
            raise FormatError(f"costs missing for elements {missing}")
        costs = {e: costs[e] for e in elements}
    return sys, costs


def instance_to_json(sys: OwnedSetSystem, costs: Optional[Mapping] = None) -> dict:
    """Canonical document: fixed field order, elements in system order."""
    doc = {
        "elements": list(sys.elements),
        "ownership": {str(e): sys.ownership[e] for e in sys.elements},
    }
    f = sys.feasible
    if isinstance(f, ExplicitFamily):
        doc["feasible"] = {"explicit": [list(s) for s in f.sets]}
    else:
        doc["feasible"] = {"graph": {
            "directed": f.directed,
            "vertices": f.vertices,
            "edges": [{"id": e, "u": u, "v": v} for e, u, v in f.edges],
            "s": f.s,
            "t": f.t,
        }}
    if costs is not None:
        doc["costs"] = {str(e): costs[e] for e in sys.elements}
    return doc


def load_instance(path: str):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return instance_from_json(doc)


def dumps(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def bids_from_json(doc, sys: OwnedSetSystem) -> BidProfile:
    """``{"bids": {elem: b}, "reported_owner": {elem: agent}}``; owners default to the true ones."""
    _validate(doc, BIDS_SCHEMA)
    keys = _keymap(sys.elements)
    bids = _resolve(doc["bids"], keys, "bids")
    owners = dict(sys.ownership)
    owners.update(_resolve(doc.get("reported_owner", {}), keys, "reported_owner"))
    missing = [e for e in sys.elements if e not in bids]
    if missing:
        raise FormatError(f"bids missing for elements {missing}")
    return BidProfile({e: float(bids[e]) for e in sys.elements}, owners)


def load_bids(path: str, sys: OwnedSetSystem) -> BidProfile:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return bids_from_json(doc, sys)


def outcome_to_json(out: AuctionOutcome) -> dict:
    return {
        "winner": None if out.winner is None else list(out.winner),
        "payments": {str(a): amount(p) for a, p in out.payments.items()},
        "adjusted_cost": amount(out.adjusted_cost),
        "mechanism": out.mechanism,
        "reserve": amount(out.reserve),
    }


def nu_to_json(res: NuResult) -> dict:
    return {
        "nu": amount(res.value),
        "prices": {str(e): amount(x) for e, x in res.prices.items()},
        "tight_sets": {str(e): list(T) for e, T in res.tight_sets.items()},
        "cheapest_set": list(res.cheapest_set),
        "exact": res.exact,
    }
