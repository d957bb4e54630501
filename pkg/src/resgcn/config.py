"""Flat key/value run configuration (JSON file plus ``KEY=VALUE`` overrides)."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .inject import InjectionSpec
from .metrics import DEFAULT_KS
from .model import STRATEGIES, Hyperparams

PCA_STAGES = ("train", "inject", "none")


@dataclass
class RunConfig:
    # inputs / outputs
    edges: str | None = None
    attributes: str | None = None
    labels: str | None = None
    checkpoint: str | None = None
    out_dir: str = "out"
    # preprocessing
    pca_dim: int = 20
    pca_stage: str = "train"
    # injection
    s: int = 15
    t: int = 10
    k: int = 50
    swap: str = "target"
    # model
    alpha: float = 0.8
    lam: float = 0.1
    gamma: float = 1.0
    lr: float = 0.01
    epochs: int = 100
    gcn_dims: list = field(default_factory=lambda: [64, 32])
    res_layers: int = 3
    att_layers: int = 2
    decoder_layers: int = 2
    decoder_width: int = 64
    embed_attention: str = "both"
    # evaluation
    ks: list | None = None
    strategies: list = field(default_factory=lambda: list(STRATEGIES))
    # sweep
    sweep_param: str = "alpha"
    grid: list = field(default_factory=lambda: [round(0.1 * i, 1) for i in range(11)])
    jobs: int = 1
    seed: int = 0

    ALIASES = {"lambda": "lam"}

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def hyperparams(self) -> Hyperparams:
        return Hyperparams(
            alpha=self.alpha, lam=self.lam, gamma=self.gamma, lr=self.lr, epochs=self.epochs,
            gcn_dims=tuple(self.gcn_dims), res_layers=self.res_layers, att_layers=self.att_layers,
            decoder_layers=self.decoder_layers, decoder_width=self.decoder_width,
            embed_attention=self.embed_attention, seed=self.seed,
        )

    def injection_spec(self) -> InjectionSpec:
        return InjectionSpec(s=self.s, t=self.t, k=self.k, seed=self.seed, swap=self.swap)

    def ks_for(self, n: int) -> list[int]:
        """Configured K list, or the default list restricted to K <= n when unset."""
        if self.ks is not None:
            return [int(k) for k in self.ks]
        ks = [k for k in DEFAULT_KS if k <= n]
        return ks or [n]

    def validate(self, require=()) -> "RunConfig":
        """Check field invariants and that the paths named in ``require`` exist."""
        try:
            self._check_fields()
        except TypeError as exc:
            raise ConfigError(f"bad value type: {exc}") from None
        for key in require:
            path = getattr(self, key)
            if path is None:
                raise ConfigError(f"missing required setting {key!r}")
            if not Path(path).exists():
                raise ConfigError(f"{key} path does not exist: {path}")
        return self

    def _check_fields(self):
        self.hyperparams()
        self.injection_spec()
        if self.pca_stage not in PCA_STAGES:
            raise ConfigError(f"pca_stage must be one of {PCA_STAGES}")
        if self.pca_dim < 1:
            raise ConfigError("pca_dim must be >= 1")
        bad = [s for s in self.strategies if s not in STRATEGIES]
        if bad or not self.strategies:
            raise ConfigError(f"unknown strategies {bad}; choose from {STRATEGIES}")
        if self.ks is not None and (not self.ks or min(int(k) for k in self.ks) < 1):
            raise ConfigError("ks must be a non-empty list of positive integers")
        if self.sweep_param not in ("alpha", "lambda", "lam"):
            raise ConfigError("sweep_param must be 'alpha' or 'lambda'")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if not self.grid:
            raise ConfigError("grid must list at least one value")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d


def parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(path=None, overrides=None) -> RunConfig:
    """Build a RunConfig from an optional JSON object file and ``{key: value}`` overrides."""
    values = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file does not exist: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: expected a flat JSON object")
        values.update(doc)
    values.update(overrides or {})
    known = set(RunConfig.keys())
    clean = {}
    for key, value in values.items():
        key = RunConfig.ALIASES.get(key, key)
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        clean[key] = value
    try:
        return RunConfig(**clean)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
