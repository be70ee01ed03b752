"""Experiment configuration and the flat ``key = value`` file format."""
import configparser
import dataclasses
from dataclasses import dataclass, fields
from typing import Dict, Optional, Tuple

from ..dtd import CostConstants, Policy
from ..gcs import LatencyConfig


class ConfigError(ValueError):
    pass


# variant -> (coarse leases, dispatch policy)
VARIANTS: Dict[str, Tuple[bool, Policy]] = {
    "alc": (True, Policy.NONE),
    "fgl": (False, Policy.NONE),
    "mg-alc": (True, Policy.OPT),
    "lilac-st": (False, Policy.ST),
    "lilac-lt": (False, Policy.LT),
    "lilac-opt": (False, Policy.OPT),
}

WORKLOADS = ("bank", "tpcc", "overload")


@dataclass
class ExperimentConfig:
    variant: str = "lilac-st"
    workload: str = "bank"
    nodes: int = 4
    threads: int = 2
    duration: int = 10                 # simulated seconds of load generation
    seed: int = 1
    locality: float = 0.5

    # time model; latencies are in steps, one step = step_ticks ticks
    ticks_per_second: int = 1000
    step_ticks: int = 20
    p2p: int = 1
    urb: int = 2
    oab_opt: int = 1
    oab_total: int = 3
    reorder_prob: float = 0.0

    # replica behaviour
    max_retries: int = 3
    max_cpu: float = 0.85
    cpu_control: bool = True
    half_life_s: float = 10.0
    cores: int = 0                      # task budget per node; 0 means one per thread
    cpu_window: int = 100
    gossip_interval: int = 100
    validate_cost: int = 1
    re_execute_always: bool = False
    request_missing_only: bool = False

    # bank
    partitions_per_node: int = 2
    accounts_per_partition: int = 64
    classes_per_partition: int = 8
    read_write_ratio: float = 0.5
    transfers_per_tx: int = 2
    ops_per_tick: int = 4

    # tpcc
    warehouses_per_node: int = 1
    classes_per_warehouse: int = 16
    payment_fraction: float = 0.95
    mistake_prob: float = 0.2

    # overload
    inject_at_s: float = 40.0
    external_load: float = 0.95
    hot_partition: int = 0
    hot_prob: float = 0.2

    # instrumentation
    check: bool = True
    trace_leases: bool = False

    @property
    def coarse(self) -> bool:
        return VARIANTS[self.variant][0]

    @property
    def policy(self) -> Policy:
        return VARIANTS[self.variant][1]

    @property
    def latency(self) -> LatencyConfig:
        return LatencyConfig(self.p2p, self.urb, self.oab_opt, self.oab_total).scaled(self.step_ticks)

    @property
    def costs(self) -> CostConstants:
        return CostConstants(self.p2p, self.urb, self.oab_total)

    @property
    def task_budget(self) -> int:
        return self.cores or self.threads

    @property
    def end_tick(self) -> int:
        return self.duration * self.ticks_per_second

    def validate(self) -> "ExperimentConfig":
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {', '.join(VARIANTS)}")
        if self.workload not in WORKLOADS:
            raise ConfigError(f"unknown workload {self.workload!r}; choose from {', '.join(WORKLOADS)}")
        if self.workload == "tpcc" and self.policy is Policy.OPT:
            raise ConfigError(f"{self.variant} relies on the Bank partition owner and cannot run tpcc")
        if self.nodes < 1 or self.threads < 1 or self.duration < 1:
            raise ConfigError("nodes, threads and duration must be positive")
        if not 0.0 <= self.locality <= 1.0:
            raise ConfigError("locality must lie in [0, 1]")
        if self.ticks_per_second % self.cpu_window:
            raise ConfigError("cpu_window must divide ticks_per_second")
        if self.workload == "overload":
            if not 0.0 <= self.external_load < 1.0:
                raise ConfigError("external_load must lie in [0, 1)")
            if not 0 <= self.hot_partition < self.nodes * self.partitions_per_node:
                raise ConfigError("hot_partition out of range")
        try:
            self.latency
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.step_ticks < 1 or self.cpu_window < 1 or self.gossip_interval < 1:
            raise ConfigError("step_ticks, cpu_window and gossip_interval must be positive")
        return self

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    # -- flat text format ----------------------------------------------------

    def to_text(self) -> str:
        return "".join(f"{f.name} = {_fmt(getattr(self, f.name))}\n" for f in fields(self))

    @classmethod
    def from_text(cls, text: str, base: Optional["ExperimentConfig"] = None) -> "ExperimentConfig":
        parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
        parser.optionxform = str
        try:
            parser.read_string("[experiment]\n" + text)
        except configparser.Error as exc:
            raise ConfigError(f"bad config file: {exc}") from None
        return (base or cls()).apply(dict(parser["experiment"]))

    @classmethod
    def load(cls, path: str, base: Optional["ExperimentConfig"] = None) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fp:
            return cls.from_text(fp.read(), base)

    def apply(self, values: Dict[str, str]) -> "ExperimentConfig":
        """Return a copy with string ``values`` coerced to each field's type."""
        types = {f.name: f.type for f in fields(self)}
        changes = {}
        for key, raw in values.items():
            key = key.strip().replace("-", "_")
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            changes[key] = _coerce(key, types[key], raw)
        return self.replace(**changes)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _coerce(key: str, typ, raw):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    name = typ if isinstance(typ, str) else getattr(typ, "__name__", str(typ))
    try:
        if name == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if name == "int":
            return int(raw)
        if name == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw
