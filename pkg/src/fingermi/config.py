"""Plain-text key-value experiment configuration.

Files hold one `key = value` assignment per line; `#` starts a comment.
Dots namespace the keys (model.*, train.*, preprocess.*, synth.*); the
documented keys are listed in the README. Command-line flags always win
over file values.
"""

from __future__ import annotations

import os

ENV_SEED = "FINGERMI_SEED"

_TRUTHY = {"1", "true", "yes", "on"}
_FALSY = {"0", "false", "no", "off"}


def load_config(path) -> dict[str, str]:
    cfg: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, value = line.split("=", 1)
            cfg[key.strip()] = value.strip()
    return cfg


def get_bool(cfg: dict[str, str], key: str, default: bool) -> bool:
    raw = cfg.get(key)
    if raw is None:
        return default
    low = raw.lower()
    if low in _TRUTHY:
        return True
    if low in _FALSY:
        return False
    raise ValueError(f"{key}: cannot parse boolean from {raw!r}")


def get_int(cfg: dict[str, str], key: str, default: int) -> int:
    raw = cfg.get(key)
    return default if raw is None else int(raw)


def get_float(cfg: dict[str, str], key: str, default: float) -> float:
    raw = cfg.get(key)
    return default if raw is None else float(raw)


def get_floats(cfg: dict[str, str], key: str, default: tuple[float, ...]) -> tuple[float, ...]:
    raw = cfg.get(key)
    if raw is None:
        return default
    return tuple(float(v) for v in raw.split(","))


def resolve_seed(flag_seed: int | None, cfg: dict[str, str]) -> int:
    """Flag wins, then config, then the FINGERMI_SEED env var, then 0."""
    if flag_seed is not None:
        return flag_seed
    if "seed" in cfg:
        return int(cfg["seed"])
    env = os.environ.get(ENV_SEED)
    if env is not None:
        return int(env)
    return 0
