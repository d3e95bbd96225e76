"""Protocol configuration: parameters of one approval-process instance.

Currency amounts are in millions, as in the antibiotic case study. Config
files are JSON objects whose keys are the field names of `ProtocolConfig`.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

THETA_BASELINE_MIN = 1e-6

TEST_PROCESS_KINDS = ("exponential", "uniform-mixture")


class ConfigError(ValueError):
    """Raised when a configuration is malformed or violates an invariant."""


@dataclass(frozen=True)
class PriorAtom:
    alpha0: float
    beta0: float
    weight: float = 1.0


@dataclass(frozen=True)
class ProtocolConfig:
    horizon_T: int = 3
    n_max: int = 200
    theta_baseline: float = 0.5
    kappa: float = 0.05
    cost_fixed: float = 48.9
    cost_per_sample: float = 0.066
    rho_agent: float = 240.0
    rho_social: float = 2000.0
    prior_alpha0: float = 1.0
    prior_beta0: float = 1.0
    epsilon_max: float = 0.9
    # None means a point mass at the agent's prior.
    principal_belief_Q: tuple[PriorAtom, ...] | None = None
    test_process_kind: str = "exponential"
    mixture_nodes: int = 200
    cost_form: str = "linear"

    def __post_init__(self) -> None:
        if self.principal_belief_Q is None:
            atoms = (PriorAtom(self.prior_alpha0, self.prior_beta0, 1.0),)
        else:
            atoms = tuple(
                a if isinstance(a, PriorAtom) else PriorAtom(**a) for a in self.principal_belief_Q
            )
        object.__setattr__(self, "principal_belief_Q", atoms)
        self.validate()

    def validate(self) -> None:
        if self.cost_form != "linear":
            raise ConfigError(
                f"cost_form={self.cost_form!r} not supported; only c(n) = c0 + c1*n is allowed"
            )
        if not isinstance(self.horizon_T, int) or self.horizon_T < 0:
            raise ConfigError("horizon_T must be an integer >= 0")
        if not isinstance(self.n_max, int) or self.n_max < 1:
            raise ConfigError("n_max must be an integer >= 1")
        reals = {
            "theta_baseline": self.theta_baseline,
            "kappa": self.kappa,
            "cost_fixed": self.cost_fixed,
            "cost_per_sample": self.cost_per_sample,
            "rho_agent": self.rho_agent,
            "rho_social": self.rho_social,
            "prior_alpha0": self.prior_alpha0,
            "prior_beta0": self.prior_beta0,
            "epsilon_max": self.epsilon_max,
        }
        for name, value in reals.items():
            if not math.isfinite(value):
                raise ConfigError(f"{name} must be finite")
        if not THETA_BASELINE_MIN <= self.theta_baseline < 1:
            raise ConfigError(f"theta_baseline must lie in [{THETA_BASELINE_MIN}, 1)")
        if not 0 < self.kappa < 1:
            raise ConfigError("kappa must lie in (0, 1)")
        if self.cost_fixed < 0 or self.cost_per_sample < 0:
            raise ConfigError("cost coefficients must be nonnegative")
        if self.rho_agent <= 0 or self.rho_social <= 0:
            raise ConfigError("approval benefits must be positive")
        if self.prior_alpha0 <= 0 or self.prior_beta0 <= 0:
            raise ConfigError("prior parameters must be positive")
        if not 0 < self.epsilon_max <= 1:
            raise ConfigError("epsilon_max must lie in (0, 1]")
        if self.test_process_kind not in TEST_PROCESS_KINDS:
            raise ConfigError(f"test_process_kind must be one of {TEST_PROCESS_KINDS}")
        if self.mixture_nodes < 16:
            raise ConfigError("mixture_nodes must be >= 16")
        atoms = self.principal_belief_Q
        if not atoms:
            raise ConfigError("principal_belief_Q must have at least one atom")
        for a in atoms:
            if not (a.alpha0 > 0 and a.beta0 > 0 and math.isfinite(a.alpha0) and math.isfinite(a.beta0)):
                raise ConfigError("Q atoms must have positive finite (alpha0, beta0)")
            if not (a.weight >= 0 and math.isfinite(a.weight)):
                raise ConfigError("Q weights must be nonnegative")
        if abs(sum(a.weight for a in atoms) - 1.0) > 1e-12:
            raise ConfigError("Q weights must sum to 1")

    @property
    def lam(self) -> float:
        """Per-sample log-discount log(1 + theta_b (e - 1)) of the e-value."""
        return math.log1p(self.theta_baseline * math.expm1(1.0))

    @property
    def log_threshold(self) -> float:
        return -math.log(self.kappa)

    @property
    def n_total_max(self) -> int:
        return (self.horizon_T + 1) * self.n_max

    @property
    def agent_prior(self) -> tuple[float, float]:
        return (self.prior_alpha0, self.prior_beta0)

    def priors(self) -> list[tuple[float, float]]:
        """Distinct prior parameter pairs needing their own MDP solve."""
        out = [(a.alpha0, a.beta0) for a in self.principal_belief_Q]
        out.append(self.agent_prior)
        return list(dict.fromkeys(out))

    def replace(self, **changes: Any) -> "ProtocolConfig":
        # keep Q tied to the prior when it was implicit and the prior moves
        if ("prior_alpha0" in changes or "prior_beta0" in changes) and "principal_belief_Q" not in changes:
            atoms = self.principal_belief_Q
            if len(atoms) == 1 and (atoms[0].alpha0, atoms[0].beta0) == self.agent_prior:
                changes["principal_belief_Q"] = None
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["principal_belief_Q"] = [dataclasses.asdict(a) for a in self.principal_belief_Q]
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ProtocolConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known - {"theta_star", "description"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {k: v for k, v in data.items() if k in known}
        if kwargs.get("principal_belief_Q") is not None:
            try:
                kwargs["principal_belief_Q"] = tuple(PriorAtom(**a) for a in kwargs["principal_belief_Q"])
            except TypeError as exc:
                raise ConfigError(f"bad Q atom: {exc}") from exc
        for key in ("horizon_T", "n_max", "mixture_nodes"):
            if key in kwargs:
                v = kwargs[key]
                if isinstance(v, float) and v.is_integer():
                    kwargs[key] = int(v)
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def load_config(path: str | Path) -> tuple[ProtocolConfig, dict[str, Any]]:
    """Read a JSON config; returns the validated config and the raw mapping."""
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    return ProtocolConfig.from_dict(raw), raw


def parse_override(text: str) -> tuple[str, Any]:
    """Parse ``key=value`` with a JSON value (bare strings allowed)."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not key=value")
    key, value = text.split("=", 1)
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError:
        parsed = value
    return key.strip(), parsed


def apply_overrides(raw: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    """Merge ``overrides`` into a raw config mapping; returns the new mapping."""
    merged = dict(raw)
    merged.update(overrides)
    # an explicit prior override also moves an implicit Q
    if ("prior_alpha0" in overrides or "prior_beta0" in overrides) and "principal_belief_Q" not in overrides:
        q = raw.get("principal_belief_Q")
        if q is not None and len(q) == 1 and (q[0]["alpha0"], q[0]["beta0"]) == (
            raw.get("prior_alpha0", 1.0),
            raw.get("prior_beta0", 1.0),
        ):
            merged["principal_belief_Q"] = None
    return merged

