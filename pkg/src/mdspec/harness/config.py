"""Experiment configuration: one JSON document, CLI flags override fields."""

from dataclasses import dataclass, field, asdict, replace
import json
import math
from pathlib import Path

from ..errors import ConfigError, MdspecError
from ..geometry import ManifoldSpec, TargetFnSpec
from ..graph import default_epsilon
from ..spectral import FilterFamily, HyperParams, schedule_lambda, schedule_q

METHODS = ("dense", "iterative")


@dataclass
class HyperConfig:
    """Hyperparameters; ``None`` means "use the schedule"."""

    epsilon: float = None
    epsilon_scale: float = 1.0
    t: float = 0.4
    lam: float = None
    lambda_scale: float = 1.0
    K: int = 200
    q: int = None
    q_scale: float = 1.0
    r: float = 2.0
    p: float = None

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown hyperparameter field(s): {sorted(unknown)}")
        return cls(**data)

    def to_dict(self):
        out = asdict(self)
        out["lambda"] = out.pop("lam")
        return out


@dataclass
class ExperimentConfig:
    manifold: ManifoldSpec
    target: TargetFnSpec
    m: int
    n: int
    noise_sigma: float = 1.0
    seed: int = 0
    hyper: HyperConfig = field(default_factory=HyperConfig)
    filter: FilterFamily = field(default_factory=lambda: FilterFamily("tikhonov"))
    method: str = "dense"
    threads: int = 1
    outputs: dict = field(default_factory=dict)

    @property
    def N(self):
        return self.m + self.n

    # -- effective values ------------------------------------------------
    def epsilon(self):
        h = self.hyper
        if h.epsilon is not None:
            return float(h.epsilon)
        return default_epsilon(self.N, self.manifold.intrinsic_dim, h.epsilon_scale)

    def p(self):
        return float(self.hyper.p) if self.hyper.p is not None else self.manifold.density

    def schedule(self):
        """Schedule values for q and lambda, independent of any override."""
        h = self.hyper
        d = self.manifold.intrinsic_dim
        if self.m < 2:
            return {"q": 1, "lambda": None}
        return {
            "q": schedule_q(self.m, d, h.t, h.r, h.q_scale),
            "lambda": schedule_lambda(self.m, d, h.lambda_scale),
        }

    def hyperparams(self):
        h = self.hyper
        sched = self.schedule()
        lam = h.lam if h.lam is not None else sched["lambda"]
        if lam is None:
            raise ConfigError("lambda schedule needs m >= 2; set lambda explicitly")
        q = h.q if h.q is not None else sched["q"]
        return HyperParams(
            epsilon=self.epsilon(),
            t=float(h.t),
            lam=float(lam),
            K=int(h.K),
            q=int(q),
            r=float(h.r),
            lambda_scale=float(h.lambda_scale),
            q_scale=float(h.q_scale),
        )

    def validate(self):
        """Fail fast on every precondition checkable without computation."""
        h = self.hyper
        if self.m < 1 or self.n < 0:
            raise ConfigError("need m >= 1 and n >= 0")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        if not h.t > 0:
            raise ConfigError("t must be > 0")
        if h.epsilon is not None and not h.epsilon > 0:
            raise ConfigError("epsilon must be > 0")
        if h.epsilon is None and self.N < 2:
            raise ConfigError("epsilon schedule needs N >= 2")
        if not 1 <= h.K <= self.N:
            raise ConfigError(f"K = {h.K} must lie in [1, N = {self.N}]")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}")
        if self.method == "iterative" and h.K > self.N / 4:
            raise ConfigError("iterative solver requires K <= N / 4")
        if h.p is not None and not h.p > 0:
            raise ConfigError("p must be > 0")
        if not h.r > 1:
            raise ConfigError("r must be > 1")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        try:
            hp = self.hyperparams()
        except (ValueError, MdspecError) as exc:
            raise ConfigError(str(exc)) from exc
        if not 1 <= hp.q <= self.m:
            raise ConfigError(f"q = {hp.q} must lie in [1, m = {self.m}]")
        if hp.q > h.K:
            raise ConfigError(f"q = {hp.q} exceeds K = {h.K}")
        if self.filter.kind == "landweber" and self.filter.steps is None and hp.lam > 1:
            raise ConfigError("landweber needs lambda <= 1")
        return self

    # -- serialization ---------------------------------------------------
    def to_dict(self):
        return {
            "manifold": self.manifold.to_dict(),
            "target": self.target.to_dict(),
            "m": self.m,
            "n": self.n,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
            "hyperparams": self.hyper.to_dict(),
            "filter": self.filter.to_dict(),
            "method": self.method,
            "threads": self.threads,
            "outputs": dict(self.outputs),
        }

    @classmethod
    def from_dict(cls, data):
        known = {"manifold", "target", "m", "n", "noise_sigma", "seed", "hyperparams",
                 "filter", "method", "threads", "outputs"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config field(s): {sorted(unknown)}")
        try:
            return cls(
                manifold=ManifoldSpec.from_dict(data["manifold"]),
                target=TargetFnSpec.from_dict(data["target"]),
                m=int(data["m"]),
                n=int(data["n"]),
                noise_sigma=float(data.get("noise_sigma", 1.0)),
                seed=int(data.get("seed", 0)),
                hyper=HyperConfig.from_dict(data.get("hyperparams", {})),
                filter=FilterFamily.from_dict(data.get("filter", "tikhonov")),
                method=data.get("method", "dense"),
                threads=int(data.get("threads", 1)),
                outputs=dict(data.get("outputs", {})),
            )
        except KeyError as exc:
            raise ConfigError(f"missing config field {exc}") from exc
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    def override(self, **changes):
        """Copy with top-level fields or hyperparameters replaced (None = keep)."""
        changes = {k: v for k, v in changes.items() if v is not None}
        hyper_keys = set(HyperConfig.__dataclass_fields__)
        hyper = {k: changes.pop(k) for k in list(changes) if k in hyper_keys}
        out = replace(self, **changes)
        if hyper:
            out = replace(out, hyper=replace(self.hyper, **hyper))
        return out


def load_config(path):
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return ExperimentConfig.from_dict(data)
