"""JSON instance files: parsing with field-path errors, canonical serialization."""
from __future__ import annotations

import json
import math
from typing import Any

import numpy as np

from ..errors import InputError, NSWError
from ..instance import Agent, Instance
from ..valuations import (MAX_TABLE_GROUND, TOL, Additive, BudgetedAdditive, Coverage, Padded,
                          Table, Valuation, normalize_empty)

KINDS = ("additive", "budgeted_additive", "coverage", "table")


def _num(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InputError(f"{path}: expected a number, got {value!r}")
    x = float(value)
    if not math.isfinite(x) or x < 0:
        raise InputError(f"{path}: must be finite and non-negative, got {value!r}")
    return x


def _obj(value: Any, path: str) -> dict:
    if not isinstance(value, dict):
        raise InputError(f"{path}: expected an object")
    return value


def _item_values(doc: dict, index: dict, path: str) -> np.ndarray:
    vals = np.zeros(len(index))
    for key, raw in _obj(doc.get("values", {}), f"{path}.values").items():
        if key not in index:
            raise InputError(f"{path}.values.{key}: unknown item id")
        vals[index[key]] = _num(raw, f"{path}.values.{key}")
    return vals


def _table_values(doc: dict, index: dict, path: str) -> np.ndarray:
    m = len(index)
    if m > MAX_TABLE_GROUND:
        raise InputError(f"{path}: table valuations need at most {MAX_TABLE_GROUND} items")
    raw = _obj(doc.get("table"), f"{path}.table")
    vals = np.full(1 << m, np.nan)
    for key, v in raw.items():
        mask = 0
        for iid in (s.strip() for s in key.split(",") if s.strip()):
            if iid not in index:
                raise InputError(f"{path}.table[{key!r}]: unknown item id {iid!r}")
            mask |= 1 << index[iid]
        vals[mask] = _num(v, f"{path}.table[{key!r}]")
    if np.isnan(vals).any():
        missing = int(np.flatnonzero(np.isnan(vals))[0])
        names = ",".join(k for k, j in index.items() if (missing >> j) & 1)
        raise InputError(f"{path}.table: no entry for subset {names!r}")
    return vals


def parse_valuation(doc: Any, item_ids: list, path: str) -> Valuation:
    doc = _obj(doc, path)
    index = {iid: j for j, iid in enumerate(item_ids)}
    kind = doc.get("type")
    try:
        if kind == "additive":
            return Additive(_item_values(doc, index, path))
        if kind == "budgeted_additive":
            if "budget" not in doc:
                raise InputError(f"{path}.budget: missing")
            return BudgetedAdditive(_item_values(doc, index, path), _num(doc["budget"], f"{path}.budget"))
        if kind == "coverage":
            uw = _obj(doc.get("universe_weights"), f"{path}.universe_weights")
            uids = list(uw)
            uindex = {u: k for k, u in enumerate(uids)}
            weights = [_num(uw[u], f"{path}.universe_weights.{u}") for u in uids]
            covers = [[] for _ in item_ids]
            for key, elems in _obj(doc.get("covers", {}), f"{path}.covers").items():
                if key not in index:
                    raise InputError(f"{path}.covers.{key}: unknown item id")
                if not isinstance(elems, list):
                    raise InputError(f"{path}.covers.{key}: expected a list")
                for u in elems:
                    if u not in uindex:
                        raise InputError(f"{path}.covers.{key}: unknown universe element {u!r}")
                    covers[index[key]].append(uindex[u])
            return Coverage(tuple(covers), np.array(weights), universe_ids=tuple(uids))
        if kind == "table":
            return Table(_table_values(doc, index, path), allow_offset=True)
    except InputError as exc:
        if str(exc).startswith(path):
            raise
        raise InputError(f"{path}: {exc}") from None
    raise InputError(f"{path}.type: unknown valuation kind {kind!r} (expected one of {', '.join(KINDS)})")


def _shift_table(v: Table, m: int, private: int, ground: int) -> Table:
    """Table over ``ground`` items: base items first, the agent's private item at ``private``."""
    masks = np.arange(1 << ground)
    base = v.values[masks & ((1 << m) - 1)]
    own = (masks >> private) & 1
    return Table(np.where(own == 1, base, base - v.values[0]), check_limit=0)


def instance_from_dict(doc: Any, normalize_weights: bool = False) -> Instance:
    doc = _obj(doc, "$")
    items = doc.get("items")
    if not isinstance(items, list) or not items:
        raise InputError("items: expected a nonempty list of item ids")
    for k, iid in enumerate(items):
        if not isinstance(iid, str) or not iid or "," in iid:
            raise InputError(f"items[{k}]: item ids must be nonempty strings without commas")
    if len(set(items)) != len(items):
        raise InputError("items: duplicate item id")
    agents = doc.get("agents")
    if not isinstance(agents, list) or not agents:
        raise InputError("agents: expected a nonempty list")
    ids, weights, vals = [], [], []
    for k, a in enumerate(agents):
        a = _obj(a, f"agents[{k}]")
        aid = a.get("id")
        if not isinstance(aid, str) or not aid:
            raise InputError(f"agents[{k}].id: expected a nonempty string")
        ids.append(aid)
        if "weight" not in a:
            raise InputError(f"agents[{k}].weight: missing")
        weights.append(_num(a["weight"], f"agents[{k}].weight"))
        vals.append(parse_valuation(a.get("valuation"), items, f"agents[{k}].valuation"))
    total = sum(weights)
    if normalize_weights:
        if total <= 0:
            raise InputError("agents: weights must have a positive sum to normalize")
        weights = [w / total for w in weights]
    for k, w in enumerate(weights):
        if not 0 < w <= 1:
            raise InputError(f"agents[{k}].weight: must lie in (0, 1], got {w!r}")
    if abs(sum(weights) - 1.0) > 1e-9:
        raise InputError(f"agents: weights sum to {sum(weights)!r}, expected 1 "
                         "(use the normalize-weights option to rescale)")

    # a positive empty-set value becomes a private item of that agent
    m = len(items)
    offsets = [k for k, v in enumerate(vals) if normalize_empty(v)[1] is not None]
    metadata = dict(doc.get("metadata", {}) or {})
    if offsets:
        ground = m + len(offsets)
        if ground > MAX_TABLE_GROUND:
            raise InputError("agents: too many private items for table normalization")
        items = list(items)
        for pos, k in enumerate(offsets):
            pid = f"{ids[k]}#private"
            if pid in items:
                raise InputError(f"items: id {pid!r} is reserved for a private item")
            items.append(pid)
            vals[k] = _shift_table(vals[k], m, m + pos, ground)
        for k in range(len(vals)):
            if vals[k].m != ground:
                vals[k] = Padded(vals[k], ground)
        metadata["private_items"] = {ids[k]: f"{ids[k]}#private" for k in offsets}
    try:
        return Instance(tuple(items), tuple(Agent(ids[k], weights[k], vals[k]) for k in range(len(ids))),
                        name=str(doc.get("name", "")), metadata=metadata)
    except NSWError:
        raise
    except ValueError as exc:
        raise InputError(str(exc)) from None


def parse_instance(text: str, normalize_weights: bool = False) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"$: not valid JSON ({exc.msg} at line {exc.lineno})") from None
    return instance_from_dict(doc, normalize_weights=normalize_weights)


def load_instance(path, normalize_weights: bool = False) -> Instance:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    return parse_instance(text, normalize_weights=normalize_weights)


def instance_to_dict(inst: Instance) -> dict:
    doc = {
        "items": list(inst.item_ids),
        "agents": [{"id": a.id, "weight": a.weight, "valuation": a.valuation.to_dict(list(inst.item_ids))}
                   for a in inst.agents],
    }
    if inst.name:
        doc["name"] = inst.name
    if inst.metadata:
        doc["metadata"] = inst.metadata
    return doc


def dumps(doc) -> str:
    """Canonical JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def serialize_instance(inst: Instance) -> str:
    return dumps(instance_to_dict(inst))


def values_close(a: Valuation, b: Valuation, tol: float = TOL) -> bool:
    return a.m == b.m and bool(np.allclose(a.table(), b.table(), atol=tol, rtol=tol))
