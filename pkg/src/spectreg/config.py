"""Experiment configuration: strict YAML parsing with a content hash.

Every config key is validated before any computation runs; unknown keys are
rejected at every level so a typo cannot silently fall back to a default.
The sha256 of the raw file bytes is carried into every output header, which
makes artifacts traceable to the exact config that produced them.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import yaml

from .errors import ConfigError
from .filters import FilterFamily, filter_from_dict
from .mercer import MercerProblem, make_problem, noise_from_dict
from .spectrum import SpectrumProfile
from .spectrum import from_dict as spectrum_from_dict

__all__ = ["ExperimentConfig", "load_config", "parse_config"]

_TOP_KEYS = {"seed", "out", "spectrum", "problem", "filter", "fit", "rates", "lowerbound"}
_PROBLEM_KEYS = {"r", "R", "noise", "rho", "basis"}
_FIT_KEYS = {"n", "lam"}
_RATES_KEYS = {"n_grid", "replicates", "s", "eta"}
_LOWERBOUND_KEYS = {"n", "s"}


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    seed: int
    out: str
    sha256: str
    profile: SpectrumProfile | None
    problem: MercerProblem | None
    filter: FilterFamily | None
    fit: dict | None
    rates: dict | None
    lowerbound: dict | None

    def require(self, name: str):
        """Fetch a parsed section, failing with the config key if absent."""
        value = getattr(self, name)
        if value is None:
            section = "spectrum" if name == "profile" else name
            raise ConfigError(f"this command needs a '{section}' config section")
        return value


def _check_keys(name: str, d: dict, allowed: set, required: set = frozenset()):
    if not isinstance(d, dict):
        raise ConfigError(f"config section '{name}' must be a mapping, got {type(d).__name__}")
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ConfigError(f"config section '{name}' has unknown keys {unknown}; "
                          f"allowed: {sorted(allowed)}")
    missing = sorted(required - set(d))
    if missing:
        raise ConfigError(f"config section '{name}' missing required keys {missing}")


def _int_key(name: str, value, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"'{name}' must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"'{name}' must be >= {minimum}, got {value}")
    return value


def parse_config(text: bytes | str, *, out_override: str | None = None) -> ExperimentConfig:
    """Parse and validate config bytes; the hash is over exactly these bytes."""
    raw = text.encode() if isinstance(text, str) else text
    sha = hashlib.sha256(raw).hexdigest()
    try:
        doc = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a mapping of sections")
    _check_keys("<root>", doc, _TOP_KEYS, required={"seed"})
    seed = _int_key("seed", doc["seed"], minimum=0)
    out = doc.get("out", "spectreg_out")
    if out_override is not None:
        out = out_override
    if not isinstance(out, str) or not out:
        raise ConfigError(f"'out' must be a nonempty path string, got {out!r}")

    profile = problem = filt = None
    if "spectrum" in doc:
        # non-strict: a profile whose declared dyadic band fails must still
        # parse so spectrum-report can show the failure and the rate /
        # lower-bound gates can refuse with the violated hypothesis named
        profile = spectrum_from_dict(doc["spectrum"], strict=False)
    if "problem" in doc:
        if profile is None:
            raise ConfigError("a 'problem' section needs a 'spectrum' section")
        sec = doc["problem"]
        _check_keys("problem", sec, _PROBLEM_KEYS, required={"r", "R", "noise"})
        kwargs = {}
        if "basis" in sec:
            kwargs["basis"] = sec["basis"]
        if "rho" in sec:
            kwargs["rho"] = float(sec["rho"])
        problem = make_problem(profile, float(sec["r"]), float(sec["R"]),
                               noise_from_dict(sec["noise"]), **kwargs)
    if "filter" in doc:
        filt = filter_from_dict(doc["filter"])

    fit = doc.get("fit")
    if fit is not None:
        _check_keys("fit", fit, _FIT_KEYS)
        if "n" in fit:
            _int_key("fit.n", fit["n"])
        if "lam" in fit and not float(fit["lam"]) > 0.0:
            raise ConfigError(f"fit.lam must be positive, got {fit['lam']!r}")
    rates = doc.get("rates")
    if rates is not None:
        _check_keys("rates", rates, _RATES_KEYS,
                    required={"n_grid", "replicates", "s"})
        grid = rates["n_grid"]
        if not (isinstance(grid, list) and len(grid) >= 2):
            raise ConfigError("rates.n_grid must be a list of at least two sample sizes")
        for n in grid:
            _int_key("rates.n_grid entry", n)
        _int_key("rates.replicates", rates["replicates"])
    lowerbound = doc.get("lowerbound")
    if lowerbound is not None:
        _check_keys("lowerbound", lowerbound, _LOWERBOUND_KEYS, required={"n", "s"})
        _int_key("lowerbound.n", lowerbound["n"])

    return ExperimentConfig(seed=seed, out=out, sha256=sha, profile=profile,
                            problem=problem, filter=filt, fit=fit,
                            rates=rates, lowerbound=lowerbound)


def load_config(path, *, out_override: str | None = None) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config(p.read_bytes(), out_override=out_override)
