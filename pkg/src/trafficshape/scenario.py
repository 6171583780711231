"""Scenario files: strict JSON parsing into a Scenario, a Marketplace and baseline settings."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from .baseline import BaselineConfig
from .model import ContractError, Scenario, Violation, validate_scenario
from .simenv import DEFAULT_NOISE, ItemSpec, Marketplace, SessionTemplate

TOP_KEYS = {"groups", "sets", "requirements", "grid_k", "bonus_domain", "horizon_sessions",
            "reward_channel", "templates", "baseline"}
REQUIRED_TOP = {"groups", "sets", "requirements", "grid_k", "templates"}
TEMPLATE_KEYS = {"group", "set", "slots", "session_weight", "noise", "candidates"}
CANDIDATE_KEYS = {"base_score", "click_prob", "purchase_prob", "price", "target"}
BASELINE_KEYS = {f.name for f in BaselineConfig.__dataclass_fields__.values()}

BUNDLED = ("default", "small", "smooth")


class ScenarioError(ValueError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


@dataclass(frozen=True)
class Experiment:
    scenario: Scenario
    market: Marketplace
    baseline: BaselineConfig = field(default_factory=BaselineConfig)

    def with_grid(self, grid_k: int) -> "Experiment":
        return Experiment(self.scenario.with_grid(grid_k), self.market, self.baseline)

    def with_horizon(self, horizon: int) -> "Experiment":
        m = self.market
        return Experiment(self.scenario, Marketplace(m.n_groups, m.n_sets, m.templates, horizon,
                                                     m.reward_channel, m.bonus_domain,
                                                     m.enumeration_cap), self.baseline)


def _unknown(obj: dict, allowed: set, where: str, out: list) -> None:
    for k in sorted(set(obj) - allowed):
        out.append(Violation("UNKNOWN_KEY", f"{where}: unknown key {k!r}"))


def parse_experiment(data: Any) -> Experiment:
    """Build an :class:`Experiment`; raises :class:`ScenarioError` listing every problem found."""
    v: list[Violation] = []
    if not isinstance(data, dict):
        raise ScenarioError([Violation("BAD_VALUE", "scenario must be a JSON object")])
    _unknown(data, TOP_KEYS, "scenario", v)
    for k in sorted(REQUIRED_TOP - set(data)):
        v.append(Violation("MISSING_KEY", f"scenario: missing {k!r}"))
    if v:
        raise ScenarioError(v)

    groups = [str(g) for g in data["groups"]]
    sets = [str(s) for s in data["sets"]]
    gidx = {g: i for i, g in enumerate(groups)}
    sidx = {s: j for j, s in enumerate(sets)}

    floors: dict[str, float] = {}
    for q, req in enumerate(data["requirements"]):
        if not isinstance(req, dict):
            v.append(Violation("BAD_VALUE", f"requirements[{q}] must be an object"))
            continue
        _unknown(req, {"set", "floor"}, f"requirements[{q}]", v)
        s = str(req.get("set"))
        if s not in sidx:
            v.append(Violation("UNKNOWN_SET", f"requirements[{q}]: set {s!r}"))
        elif s in floors:
            v.append(Violation("DUPLICATE_REQUIREMENT", f"set {s!r}"))
        else:
            try:
                floors[s] = float(req["floor"])
            except (KeyError, TypeError, ValueError):
                v.append(Violation("BAD_VALUE", f"requirements[{q}]: floor must be a number"))
    for s in sets:
        if s not in floors and not any(x.code == "UNKNOWN_SET" for x in v):
            v.append(Violation("MISSING_REQUIREMENT", f"set {s!r} has no floor"))

    try:
        grid_k = int(data["grid_k"])
        domain = tuple(float(x) for x in data.get("bonus_domain", (0.0, 1.0)))
        horizon = int(data.get("horizon_sessions", 10_000))
    except (TypeError, ValueError) as exc:
        raise ScenarioError(v + [Violation("BAD_VALUE", str(exc))]) from None
    if len(domain) != 2:
        v.append(Violation("BAD_VALUE", "bonus_domain must be [lo, hi]"))
        domain = (0.0, 1.0)
    channel = data.get("reward_channel", "clicks")
    scenario = Scenario(len(groups), len(sets), tuple(floors.get(s, 0.0) for s in sets), grid_k,
                        domain, channel, tuple(groups), tuple(sets))
    v.extend(validate_scenario(scenario))
    if horizon < 0:
        v.append(Violation("BAD_VALUE", f"horizon_sessions={horizon} < 0"))

    templates = {}
    for q, t in enumerate(data["templates"]):
        where = f"templates[{q}]"
        if not isinstance(t, dict):
            v.append(Violation("BAD_VALUE", f"{where} must be an object"))
            continue
        _unknown(t, TEMPLATE_KEYS, where, v)
        g, s = str(t.get("group")), str(t.get("set"))
        if g not in gidx or s not in sidx:
            v.append(Violation("UNKNOWN_CELL", f"{where}: ({g!r}, {s!r})"))
            continue
        if (g, s) in templates:
            v.append(Violation("DUPLICATE_TEMPLATE", f"{where}: ({g!r}, {s!r})"))
            continue
        noise = t.get("noise", {"support": DEFAULT_NOISE[0], "probs": DEFAULT_NOISE[1]})
        if isinstance(noise, dict):
            _unknown(noise, {"support", "probs"}, f"{where}.noise", v)
        cands = []
        for c_i, c in enumerate(t.get("candidates", [])):
            if isinstance(c, dict):
                _unknown(c, CANDIDATE_KEYS, f"{where}.candidates[{c_i}]", v)
            try:
                cands.append(ItemSpec(float(c["base_score"]), float(c["click_prob"]),
                                      float(c.get("purchase_prob", 0.0)), float(c.get("price", 0.0)),
                                      bool(c["target"])))
            except (KeyError, TypeError, ValueError) as exc:
                v.append(Violation("BAD_CANDIDATE", f"{where}.candidates[{c_i}]: {exc}"))
        try:
            templates[(g, s)] = SessionTemplate(
                gidx[g], sidx[s], tuple(cands), int(t.get("slots", 1)),
                tuple(noise["support"]), tuple(noise["probs"]), float(t.get("session_weight", 1.0)))
        except (KeyError, TypeError, ValueError) as exc:
            v.append(Violation("BAD_TEMPLATE", f"{where}: {exc}"))
    for g in groups:
        for s in sets:
            if (g, s) not in templates and not any(x.code in ("UNKNOWN_CELL", "BAD_TEMPLATE") for x in v):
                v.append(Violation("MISSING_TEMPLATE", f"no template for ({g!r}, {s!r})"))

    base_cfg = data.get("baseline", {})
    if not isinstance(base_cfg, dict):
        v.append(Violation("BAD_VALUE", "baseline must be an object"))
        base_cfg = {}
    _unknown(base_cfg, BASELINE_KEYS, "baseline", v)
    try:
        baseline = BaselineConfig(**{k: base_cfg[k] for k in BASELINE_KEYS & set(base_cfg)})
    except (ContractError, TypeError) as exc:
        v.append(Violation("BAD_BASELINE", str(exc)))
        baseline = BaselineConfig()

    if v:
        raise ScenarioError(v)
    market = Marketplace(len(groups), len(sets), tuple(templates.values()), horizon, channel, domain)
    return Experiment(scenario, market, baseline)


def load_experiment(path: str | Path) -> Experiment:
    p = Path(path)
    if not p.is_file():
        raise ScenarioError([Violation("SCENARIO_NOT_FOUND", str(p))])
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError([Violation("INVALID_JSON", f"{p}: {exc}")]) from None
    return parse_experiment(data)


def bundled_path(name: str) -> Path:
    """Path of a scenario shipped with the package (``default``, ``small``, ``smooth``)."""
    return Path(str(resources.files("trafficshape") / "data" / f"{name}.json"))


def load_bundled(name: str) -> Experiment:
    return load_experiment(bundled_path(name))


def experiment_to_dict(exp: Experiment) -> dict:
    sc, mk = exp.scenario, exp.market
    return {
        "groups": list(sc.group_ids),
        "sets": list(sc.set_ids),
        "requirements": [{"set": s, "floor": r} for s, r in zip(sc.set_ids, sc.requirements)],
        "grid_k": sc.grid_k,
        "bonus_domain": list(sc.bonus_domain),
        "horizon_sessions": mk.horizon,
        "reward_channel": sc.reward_channel,
        "templates": [{
            "group": sc.group_ids[t.group], "set": sc.set_ids[t.set], "slots": t.slots,
            "session_weight": t.session_weight,
            "noise": {"support": list(t.noise_support), "probs": list(t.noise_probs)},
            "candidates": [{"base_score": c.base_score, "click_prob": c.click_prob,
                            "purchase_prob": c.purchase_prob, "price": c.price, "target": c.target}
                           for c in t.candidates],
        } for t in mk.templates],
        "baseline": asdict(exp.baseline),
    }
