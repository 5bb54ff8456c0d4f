"""YAML scenario files: parsing with line-anchored errors, overrides, presets.

Unit numbering in files is 1-based (edges, leaders, ``units.<k>`` override
paths); everything in memory is 0-based.
"""

from __future__ import annotations

import math
from importlib import resources
from pathlib import Path

import yaml

from .adversary import AttackGains
from .engine.scenario import AdversaryConfig, PowerLimits, PowerProfile, Scenario, SplitConfig, Thresholds
from .errors import ConfigError, InvalidTopologyError
from .plant import BatteryParams, OperatingMode
from .topology import PRESETS as TOPOLOGY_PRESETS
from .topology import Topology

_ANY = object()
UNIT_KEYS = {"capacity_ah", "voltage_v", "initial_soc", "soc_floor", "soc_ceiling"}
SCHEMA = {
    "name": _ANY, "seed": _ANY, "scheme": _ANY, "mode": _ANY, "time_unit": _ANY,
    "horizon_s": _ANY, "step_s": _ANY, "sample_every": _ANY, "settle_fraction": _ANY,
    "topology": {"preset": _ANY, "n": _ANY, "edges": _ANY, "leaders": _ANY},
    "units": [UNIT_KEYS],
    "power": {"profile": _ANY, "value_w": _ANY, "amplitude_w": _ANY, "offset_w": _ANY,
              "omega_rad_per_s": _ANY, "phase_rad": _ANY, "times_s": _ANY, "values_w": _ANY,
              "lo_w": _ANY, "hi_w": _ANY, "rate_bound_w_per_s": _ANY},
    "gains": {"beta": _ANY, "kappa": _ANY},
    "privacy": {"eta": _ANY, "sigma": _ANY, "split_amplitude": _ANY, "split_omega_min_rad_per_s": _ANY,
                "split_omega_max_rad_per_s": _ANY, "initial_split_max": _ANY},
    "adversary": {"enabled": _ANY, "k1": _ANY, "k2": _ANY, "k3": _ANY, "k4": _ANY, "floor_guess_energy": _ANY},
    "thresholds": {"soc_spread": _ANY, "power_rel": _ANY},
}
REQUIRED = ("topology", "units", "power")
PRESET_NAMES = ("discharge_paper", "charge_paper", "attack_baseline", "attack_privacy")


class Document:
    """Parsed YAML mapping plus the source line of every key path."""

    def __init__(self, data: dict, lines: dict | None = None, source: str = "<string>"):
        self.data = data
        self.lines = lines or {}
        self.source = source

    def line(self, path) -> int | None:
        path = tuple(path)
        while path:
            if path in self.lines:
                return self.lines[path]
            path = path[:-1]
        return None

    def error(self, message, path) -> ConfigError:
        return ConfigError(message, key=".".join(map(str, path)) or None, line=self.line(path))


def _node_lines(node, path=(), out=None):
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            p = path + (k.value,)
            out[p] = k.start_mark.line + 1
            _node_lines(v, p, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            p = path + (i + 1,)
            out[p] = v.start_mark.line + 1
            _node_lines(v, p, out)
    return out


def parse(text: str, source: str = "<string>") -> Document:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark is not None else None
        raise ConfigError(f"YAML parse error: {exc.problem}", line=line) from exc
    if not isinstance(data, dict):
        raise ConfigError("scenario file must be a mapping at top level", line=1)
    return Document(data, _node_lines(node), source)


def preset_text(name: str) -> str:
    if name not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}")
    return resources.files("privbess.presets").joinpath(f"{name}.yaml").read_text()


def load(path_or_preset) -> Document:
    """Read a scenario file, or an embedded preset when given a preset name."""
    p = Path(str(path_or_preset))
    if str(path_or_preset) in PRESET_NAMES and not p.exists():
        return parse(preset_text(str(path_or_preset)), source=f"preset:{path_or_preset}")
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc.strerror}") from exc
    return parse(text, source=str(p))


def _check_keys(doc: Document, data, schema, path=()):
    if schema is _ANY:
        return
    if isinstance(schema, set):
        schema = dict.fromkeys(schema, _ANY)
    if isinstance(schema, list):
        if not isinstance(data, list):
            raise doc.error("expected a list", path)
        for i, item in enumerate(data):
            _check_keys(doc, item, schema[0], path + (i + 1,))
        return
    if not isinstance(data, dict):
        raise doc.error("expected a mapping", path)
    for key, value in data.items():
        if key not in schema:
            raise doc.error(f"unknown key {key!r}", path + (key,))
        _check_keys(doc, value, schema[key], path + (key,))


def apply_overrides(doc: Document, overrides) -> Document:
    """Apply ``dotted.path=value`` strings; values are parsed as YAML scalars/lists."""
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        parts = [int(p) if p.isdigit() else p for p in key.strip().split(".")]
        value = yaml.safe_load(raw)
        node = doc.data
        for depth, part in enumerate(parts[:-1]):
            if isinstance(part, int):
                if not isinstance(node, list) or not 1 <= part <= len(node):
                    raise ConfigError(f"override path {key!r}: no list entry {part}", key=key)
                node = node[part - 1]
            else:
                if not isinstance(node, dict):
                    raise ConfigError(f"override path {key!r} does not address a mapping", key=key)
                node = node.setdefault(part, {})
        last = parts[-1]
        if isinstance(last, int):
            if not isinstance(node, list) or not 1 <= last <= len(node):
                raise ConfigError(f"override path {key!r}: no list entry {last}", key=key)
            node[last - 1] = value
        else:
            if not isinstance(node, dict):
                raise ConfigError(f"override path {key!r} does not address a mapping", key=key)
            node[last] = value
    return doc


def _num(doc, section, key, default, path):
    value = section.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise doc.error(f"expected a number, got {value!r}", path + (key,))
    return float(value)


def _topology(doc: Document, spec) -> Topology:
    path = ("topology",)
    leaders = [int(k) - 1 for k in spec.get("leaders", [1])]
    try:
        if "edges" in spec:
            edges = [(int(a) - 1, int(b) - 1) for a, b in spec["edges"]]
            n = int(spec.get("n", max(max(e) for e in edges) + 1 if edges else 1))
            return Topology.from_edges(n, edges, leaders)
        preset = spec.get("preset")
        if preset not in TOPOLOGY_PRESETS:
            raise doc.error(f"need an edge list or a preset in {sorted(TOPOLOGY_PRESETS)}", path + ("preset",))
        return TOPOLOGY_PRESETS[preset](int(spec["n"]), leaders)
    except (InvalidTopologyError, TypeError, ValueError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise doc.error(f"invalid topology: {exc}", path) from exc


def build(doc: Document) -> Scenario:
    """Turn a parsed document into a Scenario (structural checks only; see ``Scenario.validate``)."""
    data = doc.data
    _check_keys(doc, data, SCHEMA)
    for key in REQUIRED:
        if key not in data:
            raise ConfigError(f"missing required section {key!r}", key=key)
    topo = _topology(doc, data["topology"])
    units, soc0 = [], []
    for i, u in enumerate(data["units"]):
        p = ("units", i + 1)
        missing = {"capacity_ah", "voltage_v", "initial_soc"} - set(u)
        if missing:
            raise doc.error(f"unit {i + 1} missing {sorted(missing)}", p)
        try:
            units.append(BatteryParams(
                _num(doc, u, "capacity_ah", None, p), _num(doc, u, "voltage_v", None, p),
                _num(doc, u, "soc_floor", 0.02, p), _num(doc, u, "soc_ceiling", 0.98, p)))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise doc.error(str(exc), p) from exc
        soc0.append(_num(doc, u, "initial_soc", None, p))
    pw = data["power"]
    pp = ("power",)
    try:
        profile = PowerProfile(
            kind=pw.get("profile", "sinusoid"),
            value_w=_num(doc, pw, "value_w", 0.0, pp),
            amplitude_w=_num(doc, pw, "amplitude_w", 0.0, pp),
            offset_w=_num(doc, pw, "offset_w", 0.0, pp),
            omega_rad_per_s=_num(doc, pw, "omega_rad_per_s", 1.0, pp),
            phase_rad=_num(doc, pw, "phase_rad", 0.0, pp),
            times_s=tuple(float(v) for v in pw.get("times_s", ())),
            values_w=tuple(float(v) for v in pw.get("values_w", ())),
        )
    except ConfigError as exc:
        raise doc.error(str(exc), pp) from exc
    limits = PowerLimits(_num(doc, pw, "lo_w", 0.0, pp), _num(doc, pw, "hi_w", math.inf, pp),
                         _num(doc, pw, "rate_bound_w_per_s", math.inf, pp))
    g, pv, adv, th = (data.get(k, {}) for k in ("gains", "privacy", "adversary", "thresholds"))
    try:
        gains = AttackGains(*(_num(doc, adv, k, 50.0, ("adversary",)) for k in ("k1", "k2", "k3", "k4")))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise doc.error(str(exc), ("adversary",)) from exc
    guess = adv.get("floor_guess_energy")
    try:
        mode = OperatingMode(data.get("mode", "discharging"))
    except ValueError as exc:
        raise doc.error("mode must be 'discharging' or 'charging'", ("mode",)) from exc
    sample_every = data.get("sample_every", 10)
    if not isinstance(sample_every, int) or isinstance(sample_every, bool):
        raise doc.error("expected an integer", ("sample_every",))
    seed = data.get("seed", 1)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise doc.error("expected a non-negative integer", ("seed",))
    return Scenario(
        topology=topo,
        units=tuple(units),
        initial_soc=tuple(soc0),
        profile=profile,
        mode=mode,
        name=str(data.get("name", Path(doc.source).stem)),
        scheme=str(data.get("scheme", "privacy")),
        beta=_num(doc, g, "beta", 300.0, ("gains",)),
        kappa=_num(doc, g, "kappa", 210.0, ("gains",)),
        eta=_num(doc, pv, "eta", 3.0, ("privacy",)),
        sigma=_num(doc, pv, "sigma", 4.0, ("privacy",)),
        split=SplitConfig(
            amplitude=_num(doc, pv, "split_amplitude", 0.3, ("privacy",)),
            omega_min=_num(doc, pv, "split_omega_min_rad_per_s", 0.5, ("privacy",)),
            omega_max=_num(doc, pv, "split_omega_max_rad_per_s", 2.0, ("privacy",)),
            initial_split_max=_num(doc, pv, "initial_split_max", 0.5, ("privacy",)),
        ),
        seed=seed,
        time_unit=str(data.get("time_unit", "compressed")),
        horizon=_num(doc, data, "horizon_s", 9.0, ()),
        step=_num(doc, data, "step_s", 1e-3, ()),
        sample_every=sample_every,
        settle_fraction=_num(doc, data, "settle_fraction", 0.4, ()),
        limits=limits,
        adversary=AdversaryConfig(bool(adv.get("enabled", False)), gains,
                                  None if guess is None else float(guess)),
        thresholds=Thresholds(_num(doc, th, "soc_spread", 0.02, ("thresholds",)),
                              _num(doc, th, "power_rel", 0.02, ("thresholds",))),
    )


def validate(doc: Document) -> Scenario:
    """Build and fully validate; errors carry the line of the offending key when known."""
    sc = build(doc)
    try:
        sc.validate()
    except ConfigError as exc:
        if exc.line is None and exc.key is not None:
            path = tuple(int(p) if p.isdigit() else p for p in exc.key.split("."))
            raise ConfigError(str(exc).split(": ", 1)[-1], key=exc.key, line=doc.line(path)) from exc
        raise
    return sc


def load_scenario(path_or_preset, overrides=()) -> Scenario:
    return validate(apply_overrides(load(path_or_preset), overrides))


def scenario_to_dict(sc: Scenario) -> dict:
    """Fully-resolved document that rebuilds ``sc`` exactly."""
    pw = {"profile": sc.profile.kind}
    if sc.profile.kind == "constant":
        pw["value_w"] = sc.profile.value_w
    elif sc.profile.kind == "sinusoid":
        pw.update(amplitude_w=sc.profile.amplitude_w, offset_w=sc.profile.offset_w,
                  omega_rad_per_s=sc.profile.omega_rad_per_s, phase_rad=sc.profile.phase_rad)
    else:
        pw.update(times_s=list(sc.profile.times_s), values_w=list(sc.profile.values_w))
    lim = sc.limits
    pw["lo_w"] = lim.lo_w
    if math.isfinite(lim.hi_w):
        pw["hi_w"] = lim.hi_w
    if math.isfinite(lim.rate_w_per_s):
        pw["rate_bound_w_per_s"] = lim.rate_w_per_s
    g = sc.adversary.gains
    adv = {"enabled": sc.adversary.enabled, "k1": g.k1, "k2": g.k2, "k3": g.k3, "k4": g.k4}
    if sc.adversary.floor_guess is not None:
        adv["floor_guess_energy"] = sc.adversary.floor_guess
    return {
        "name": sc.name,
        "seed": sc.seed,
        "scheme": sc.scheme,
        "mode": sc.mode.value,
        "time_unit": sc.time_unit,
        "horizon_s": sc.horizon,
        "step_s": sc.step,
        "sample_every": sc.sample_every,
        "settle_fraction": sc.settle_fraction,
        "topology": {
            "n": sc.n,
            "edges": [[i + 1, j + 1] for i, j in sc.topology.edges()],
            "leaders": [int(k) + 1 for k in sc.topology.leader.nonzero()[0]],
        },
        "units": [
            {"capacity_ah": u.capacity_ah, "voltage_v": u.voltage_v, "initial_soc": float(s),
             "soc_floor": u.soc_floor, "soc_ceiling": u.soc_ceiling}
            for u, s in zip(sc.units, sc.initial_soc)
        ],
        "power": pw,
        "gains": {"beta": sc.beta, "kappa": sc.kappa},
        "privacy": {"eta": sc.eta, "sigma": sc.sigma, "split_amplitude": sc.split.amplitude,
                    "split_omega_min_rad_per_s": sc.split.omega_min,
                    "split_omega_max_rad_per_s": sc.split.omega_max,
                    "initial_split_max": sc.split.initial_split_max},
        "adversary": adv,
        "thresholds": {"soc_spread": sc.thresholds.soc_spread, "power_rel": sc.thresholds.power_rel},
    }


def dump(sc: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(sc), sort_keys=False)
