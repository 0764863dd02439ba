"""Process configuration from flags or a ``key = value`` file.

A config file holds the same keys as the command-line flags, one per line::

    process = ou
    mu = 1.5
    sigma = 1
    # comments start with '#' or ';'

Section headers are optional; keys from every section are merged.
"""

from __future__ import annotations

import configparser
from pathlib import Path
from typing import Any, Mapping

from .errors import BadParameter
from .gm_core import (
    GaussMarkovProcess,
    builtin_brownian_bridge,
    builtin_integrated_bm,
    builtin_ou,
)

__all__ = ["PROCESS_ALIASES", "load_config", "build_process"]

PROCESS_ALIASES = {
    "ibm": "ibm",
    "integrated_bm": "ibm",
    "ou": "ou",
    "integrated_ou": "ou",
    "bridge": "bridge",
    "brownian_bridge": "bridge",
}

_NUMERIC_KEYS = {
    "mu", "sigma", "beta", "y", "T", "alpha", "x", "a", "b", "n", "p", "t",
    "dt", "t_max", "cutoff", "n_se",
}
_INT_KEYS = {"paths", "seed", "terms", "grid_points"}


def _coerce(key: str, raw: str) -> Any:
    if key in _INT_KEYS:
        return int(raw)
    if key in _NUMERIC_KEYS:
        return float(raw)
    return raw


def load_config(path: str | Path) -> dict[str, Any]:
    """Read a config file into a dict keyed like the CLI options (``grid-points`` -> ``grid_points``)."""
    text = Path(path).read_text()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keep "T" distinct from "t"
    try:
        parser.read_string("[process]\n" + text)
    except configparser.Error as exc:
        raise BadParameter(f"cannot parse config {path}: {exc}") from exc
    out: dict[str, Any] = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            key = key.strip().lstrip("-").replace("-", "_")
            try:
                out[key] = _coerce(key, raw.strip())
            except ValueError as exc:
                raise BadParameter(f"config key {key!r}: {exc}") from exc
    return out


def build_process(kind: str, params: Mapping[str, Any]) -> GaussMarkovProcess:
    """Instantiate a builtin from its name and parameters.

    Missing parameters take the builtin defaults (``mu = sigma = 1``,
    ``beta = y = 0``, bridge ``T = 1`` from 0 to 0).
    """
    key = PROCESS_ALIASES.get(str(kind).lower())
    if key is None:
        raise BadParameter(f"unknown process {kind!r}; choose from {sorted(set(PROCESS_ALIASES))}")

    def get(name, default):
        v = params.get(name)
        return default if v is None else float(v)

    if key == "ibm":
        return builtin_integrated_bm(get("y", 0.0))
    if key == "ou":
        return builtin_ou(get("mu", 1.0), get("beta", 0.0), get("sigma", 1.0), get("y", 0.0))
    return builtin_brownian_bridge(get("T", 1.0), get("alpha", 0.0), get("beta", 0.0))
