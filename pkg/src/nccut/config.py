"""Run configuration: parameter defaults and the key=value config file format."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .errors import InvalidInputError


@dataclass(frozen=True)
class Config:
    """Tunable parameters for the full segmentation pipeline.

    The standard-deviation constants control the Gaussian falloffs of the
    region affinity (``delta_t``), background-seed selection (``delta_b``),
    the connectedness-term mixing weight (``delta_gamma``) and the
    parent-edge smoothness (``delta_nc``).
    """

    delta_t: float = 30.0
    delta_b: float = 50.0
    delta_gamma: float = 0.025
    epsilon: float = 0.5
    k_gmm: int = 5
    eta: float = 50.0
    delta_nc: float = 0.1
    n_regions: int = 500
    max_iterations: int = 10
    t_clamp: float = 1e-6
    # True: full method; False: indeterminacy forced to zero everywhere
    indeterminacy_enabled: bool = True
    # True: background densities rescaled to [0, 100] before seed matching
    density_rescale_mode: bool = True

    def __post_init__(self):
        for name in ("delta_t", "delta_b", "delta_gamma", "eta", "delta_nc", "t_clamp"):
            if getattr(self, name) <= 0:
                raise InvalidInputError(f"config field {name} must be positive")
        for name in ("k_gmm", "n_regions", "max_iterations"):
            if getattr(self, name) < 1:
                raise InvalidInputError(f"config field {name} must be >= 1")
        if not 0.0 < self.epsilon < 1.0:
            raise InvalidInputError("config field epsilon must lie in (0, 1)")

    def with_updates(self, **kwargs) -> "Config":
        return replace(self, **kwargs)


_BOOL_WORDS = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def parse_config_text(text: str, base: Config | None = None) -> Config:
    """Parse ``key = value`` lines (``#`` comments, blank lines ignored)."""
    base = base or Config()
    known = {f.name: f.type for f in fields(Config)}
    updates = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInputError(f"config line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in known:
            raise InvalidInputError(f"config line {lineno}: unknown key {key!r}")
        current = getattr(base, key)
        if isinstance(current, bool):
            if value.lower() not in _BOOL_WORDS:
                raise InvalidInputError(f"config line {lineno}: bad boolean {value!r}")
            updates[key] = _BOOL_WORDS[value.lower()]
        elif isinstance(current, int):
            updates[key] = int(value)
        else:
            updates[key] = float(value)
    return base.with_updates(**updates)


def load_config(path, base: Config | None = None) -> Config:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base=base)
