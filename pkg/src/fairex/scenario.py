"""Scenario files: plain INI text mapped onto typed run parameters.

A scenario names one experiment. Keys not present fall back to documented
defaults; every key the runner reads (given or defaulted) is echoed into
`resolved.ini` in the output directory, so a run's full configuration is
always on disk. Keys that the selected kind never reads are rejected, which
catches typos early. `--set section.key=value` overrides file content.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .core import ConfigError
from .netsim import (
    JITTER_CONSTANT,
    JITTER_LOGNORMAL,
    JITTER_NONE,
    JITTER_UNIFORM,
    LatencyModel,
    VmProfile,
)

KINDS = (
    "outbound",
    "hold_exact",
    "fair_trend",
    "hedge_sweep",
    "maxrate",
    "spike_ab",
    "inbound",
    "inbound_tree_ab",
    "loq_sweep",
    "unfairness",
    "montecarlo",
    "seq_oracle",
    "loq_oracle",
    "engine_oracle",
    "dedup_oracle",
)

_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


@dataclass
class Scenario:
    """Raw key/value sections plus an access-tracking resolver."""

    path: str
    raw: dict[str, dict[str, str]]
    resolved: dict[str, dict[str, str]] = field(default_factory=dict)
    _accessed: set[tuple[str, str]] = field(default_factory=set)

    # -- typed getters -------------------------------------------------------

    def _fetch(self, section: str, key: str) -> str | None:
        self._accessed.add((section, key))
        return self.raw.get(section, {}).get(key)

    def _note(self, section: str, key: str, value) -> None:
        self.resolved.setdefault(section, {})[key] = str(value)

    def get_str(self, section: str, key: str, default: str) -> str:
        v = self._fetch(section, key)
        out = default if v is None else v
        self._note(section, key, out)
        return out

    def get_int(self, section: str, key: str, default: int) -> int:
        v = self._fetch(section, key)
        if v is None:
            out = default
        else:
            try:
                out = int(v)
            except ValueError:
                raise ConfigError(f"[{section}] {key}: expected an integer, got {v!r}")
        self._note(section, key, out)
        return out

    def get_float(self, section: str, key: str, default: float) -> float:
        v = self._fetch(section, key)
        if v is None:
            out = default
        else:
            try:
                out = float(v)
            except ValueError:
                raise ConfigError(f"[{section}] {key}: expected a number, got {v!r}")
        self._note(section, key, out)
        return out

    def get_bool(self, section: str, key: str, default: bool) -> bool:
        v = self._fetch(section, key)
        if v is None:
            out = default
        elif v.lower() in _BOOL_TRUE:
            out = True
        elif v.lower() in _BOOL_FALSE:
            out = False
        else:
            raise ConfigError(f"[{section}] {key}: expected a boolean, got {v!r}")
        self._note(section, key, out)
        return out

    def get_choice(self, section: str, key: str, default: str, choices: tuple[str, ...]) -> str:
        v = self.get_str(section, key, default)
        if v not in choices:
            raise ConfigError(f"[{section}] {key}: expected one of {choices}, got {v!r}")
        return v

    # -- common blocks -------------------------------------------------------

    @property
    def name(self) -> str:
        return self.get_str("scenario", "name", "unnamed")

    @property
    def kind(self) -> str:
        return self.get_choice("scenario", "kind", "outbound", KINDS)

    @property
    def seed(self) -> int:
        return self.get_int("scenario", "seed", 1)

    def output_dir(self, default_base: str = "out") -> str:
        return self.get_str("output", "dir", f"{default_base}/{self.name}")

    def latency_model(self) -> LatencyModel:
        kind = self.get_choice(
            "latency",
            "jitter",
            JITTER_LOGNORMAL,
            (JITTER_NONE, JITTER_CONSTANT, JITTER_UNIFORM, JITTER_LOGNORMAL),
        )
        return LatencyModel(
            base_us=self.get_float("latency", "base_us", 25.0),
            jitter_kind=kind,
            jitter_const_us=self.get_float("latency", "jitter_const_us", 0.0),
            jitter_lo_us=self.get_float("latency", "jitter_lo_us", 0.0),
            jitter_hi_us=self.get_float("latency", "jitter_hi_us", 0.0),
            jitter_scale_us=self.get_float("latency", "jitter_scale_us", 5.0),
            jitter_sigma=self.get_float("latency", "jitter_sigma", 0.5),
            spike_rate_per_s=self.get_float("latency", "spike_rate_per_s", 0.0),
            spike_magnitude_us=self.get_float("latency", "spike_magnitude_us", 0.0),
            spike_duration_ms=self.get_float("latency", "spike_duration_ms", 0.0),
        )

    def vm_profile(self, prefix: str, egress_default: float = 16.0) -> VmProfile:
        return VmProfile(
            egress_gbps=self.get_float("vm", f"{prefix}_egress_gbps", egress_default),
            ingress_queue_pkts=self.get_int("vm", f"{prefix}_ingress_pkts", 0),
            straggler_factor=self.get_float("vm", f"{prefix}_straggler", 1.0),
            proc_delay_us=self.get_float("vm", f"{prefix}_proc_us", 0.0),
        )

    # -- bookkeeping ---------------------------------------------------------

    def reject_unknown_keys(self) -> None:
        for section, kv in self.raw.items():
            for key in kv:
                if (section, key) not in self._accessed:
                    raise ConfigError(f"[{section}] {key}: unknown key for kind {self.kind!r}")

    def resolved_text(self) -> str:
        cp = configparser.ConfigParser()
        for section in sorted(self.resolved):
            cp[section] = dict(sorted(self.resolved[section].items()))
        lines: list[str] = []
        for section in sorted(self.resolved):
            lines.append(f"[{section}]")
            for key, value in sorted(self.resolved[section].items()):
                lines.append(f"{key} = {value}")
            lines.append("")
        return "\n".join(lines)


def load_scenario(path: str, overrides: list[str] | None = None) -> Scenario:
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError(f"scenario file not found: {path}")
    raw: dict[str, dict[str, str]] = {}
    for section in cp.sections():
        raw[section] = dict(cp[section])
    scn = Scenario(path=path, raw=raw)
    for item in overrides or []:
        apply_override(scn, item)
    return scn


def apply_override(scn: Scenario, item: str) -> None:
    """Fold one `section.key=value` CLI override into the raw config."""
    if "=" not in item:
        raise ConfigError(f"--set {item!r}: expected section.key=value")
    lhs, value = item.split("=", 1)
    if "." not in lhs:
        raise ConfigError(f"--set {item!r}: key must be qualified as section.key")
    section, key = lhs.split(".", 1)
    scn.raw.setdefault(section.strip(), {})[key.strip()] = value.strip()
