"""Line-based ``key = value`` experiment configuration.

Dotted keys nest (``grid.nodes = 256``); ``#`` starts a comment; values are
parsed as int, float, bool or string.  The parser reports the offending
line on errors and validation names the missing field.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError

SCENARIOS = (
    "spectrum",
    "flow",
    "normalform",
    "semigroup",
    "centering",
    "genericity",
    "stability",
    "aag",
    "marriage-ring",
    "arrival-time",
)


def _parse_value(raw: str):
    s = raw.strip()
    low = s.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        pass
    if "," in s:
        return [_parse_value(p) for p in s.split(",")]
    return s


def parse_config(text: str) -> dict:
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw!r}", line=lineno)
        key, _, val = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError("empty key", line=lineno)
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"key {key!r} nests under a scalar", line=lineno, field=key)
        node[parts[-1]] = _parse_value(val)
    return out


@dataclass
class ExperimentConfig:
    """Scenario name plus the raw nested option tree."""

    scenario: str
    seed: int = 0
    out_dir: str = "runs/out"
    options: dict = field(default_factory=dict)
    text: str = ""

    @classmethod
    def from_text(cls, text: str, seed=None, out_dir=None) -> "ExperimentConfig":
        tree = parse_config(text)
        if "scenario" not in tree:
            raise ConfigError("missing required field 'scenario'", field="scenario")
        scenario = tree.pop("scenario")
        if scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {scenario!r}", field="scenario")
        cfg = cls(
            scenario=scenario,
            seed=int(tree.pop("seed", 0) if seed is None else seed),
            out_dir=str(tree.pop("out", "runs/" + scenario) if out_dir is None else out_dir),
            options=tree,
            text=text,
        )
        return cfg

    def get(self, dotted: str, default=None):
        node = self.options
        for part in dotted.split("."):
            if not isinstance(node, dict) or part not in node:
                return default
            node = node[part]
        return node

    def shrinker(self):
        from .shrinker import make_shrinker

        return make_shrinker(int(self.get("shrinker.n", 2)), int(self.get("shrinker.k", 1)))
