"""Run configuration: flat ``key=value`` files, flag overrides, range checks."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

# python field name -> external key
_RENAMED = {"lam": "lambda"}
_FROM_KEY = {v: k for k, v in _RENAMED.items()}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    # correction network
    lam: float = 0.5
    k: int = 50
    tau1: float = 0.6
    tau2: float = 0.6
    t_e: int = 250
    gamma: float = 2.0
    lr: float = 0.1
    weight_decay: float = 1e-5
    momentum: float = 0.9
    gcn_layers: int = 1
    hidden_dim: int = 0  # 0 means "same as the feature dimension"
    # self-training loop
    T: int = 30
    inner_steps: int = 300
    p_s: float = 0.2
    t_c: int = 2
    p_r: float = 0.8
    ext_lr: float = 2.0
    embed_dim: int = 32
    # initial clustering
    eps: float = 0.26
    min_pts: int = 4
    # synthetic scenario
    n_identities: int = 30
    samples_per_identity: int = 20
    d_raw: int = 32
    n_cameras: int = 4
    camera_shift: float = 2.0
    cluster_spread: float = 0.7
    flip_rate: float = 0.2
    outlier_rate: float = 0.1
    seed: int = 0

    def __post_init__(self):
        def bad(name, rule):
            raise ConfigError(f"{key_of(name)} out of range: {getattr(self, name)!r} ({rule})")

        for name in ("lam", "tau1", "tau2", "p_s", "p_r", "flip_rate", "outlier_rate"):
            if not 0 <= getattr(self, name) <= 1:
                bad(name, "must be in [0, 1]")
        # thresholds may exceed 1 to prune every edge
        for name in ("k", "t_c", "T", "gcn_layers", "n_identities", "samples_per_identity",
                     "d_raw", "n_cameras", "embed_dim", "min_pts"):
            if getattr(self, name) < 1:
                bad(name, "must be >= 1")
        for name in ("t_e", "inner_steps", "hidden_dim", "gamma", "weight_decay", "camera_shift"):
            if getattr(self, name) < 0:
                bad(name, "must be >= 0")
        for name in ("lr", "ext_lr", "cluster_spread"):
            if not getattr(self, name) > 0:
                bad(name, "must be > 0")
        if not 0 <= self.momentum < 1:
            bad("momentum", "must be in [0, 1)")
        if not 0 < self.eps <= 2:
            bad("eps", "must be in (0, 2]")

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **{_FROM_KEY.get(k, k): v for k, v in changes.items()})

    def as_dict(self) -> dict:
        """Fully resolved config under its external key names."""
        return {key_of(f.name): getattr(self, f.name) for f in fields(self)}

    @property
    def start_epoch(self) -> int:
        return int(self.p_s * self.T)

    @property
    def restart_epoch(self) -> int:
        return int(self.p_r * self.T)


def key_of(name: str) -> str:
    return _RENAMED.get(name, name)


def config_keys() -> list[str]:
    return [key_of(f.name) for f in fields(RunConfig)]


def _field_types() -> dict:
    return {key_of(f.name): type(f.default) for f in fields(RunConfig)}


def coerce(key: str, value):
    types = _field_types()
    if key not in types:
        raise ConfigError(f"unknown config key: {key}")
    typ = types[key]
    try:
        if typ is int:
            as_float = float(value)
            if as_float != int(as_float):
                raise ValueError
            return int(as_float)
        return typ(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot parse {value!r} as {typ.__name__}") from None


def parse_config_text(text: str, source="<config>") -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = coerce(key, value)
    return out


def load_config(path=None, **overrides) -> RunConfig:
    """Defaults, then the file at ``path``, then ``overrides`` (None values skipped)."""
    values = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text(), source=str(path)))
    for key, value in overrides.items():
        if value is not None:
            values[key] = coerce(key, value)
    return RunConfig().replace(**values)


def format_config(cfg: RunConfig) -> str:
    return "".join(f"{k}={v!r}\n" if isinstance(v, float) else f"{k}={v}\n"
                   for k, v in cfg.as_dict().items())
