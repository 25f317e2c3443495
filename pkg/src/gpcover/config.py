"""Run configuration: workspace, scenario, team, model, and optimizer knobs."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .errors import ConfigurationError
from .geometry import Domain

_INIT_MODES = ("uniform_random", "cluster", "explicit")
_CORNERS = ("ll", "lr", "ul", "ur")


@dataclass(frozen=True, eq=False)
class SimConfig:
    """Everything that determines a run, including its random seed.

    ``None`` for the estimator initials means problem-scaled defaults:
    lengthscale from the workspace size, signal variance from the density
    peak, noise variance from the actual sampling noise.
    """

    # workspace and scenario
    width: int = 960
    height: int = 540
    cell_size: float = 1.0
    scenario: str = "four_gaussians"
    scenario_params: dict | None = None
    # team and schedule
    n_agents: int = 4
    seed: int = 0
    rounds: int = 500
    T: int = 5
    M: int = 60
    # cost shaping
    beta: float = 2.0
    single_stride: int = 1
    pair_budget: int = 256
    # optimizer
    eta: float = 5.0
    eta_adam: float = 2.0
    v_max: float = 10.0
    k: int = 10
    epsilon: float = 0.02
    # consensus
    alpha: float = 0.2
    log_space_consensus: bool = True
    # sensing and estimator initialization
    noise_sigma: float | None = None
    lengthscale0: float | None = None
    signal_variance0: float | None = None
    noise_variance0: float | None = None
    prior_mean0: float = 0.0
    hyper_spread: float = 0.3
    refit_steps: int = 0
    # initial placement
    init_mode: str = "uniform_random"
    cluster_corner: str = "ll"
    explicit_positions: tuple[tuple[float, float], ...] | None = None
    initial_inducing: tuple | None = None
    # metrics and baseline
    rmse_stride: int = 8
    lloyd_gamma: float = 0.5

    def domain(self) -> Domain:
        return Domain(self.width, self.height, self.cell_size)

    def validate(self) -> None:
        """Raise ``ConfigurationError`` on any out-of-range field."""
        checks = [
            (self.n_agents >= 1, f"n_agents must be at least 1, got {self.n_agents}"),
            (self.rounds >= 1, f"rounds must be at least 1, got {self.rounds}"),
            (self.T >= 1, f"refresh period T must be at least 1, got {self.T}"),
            (self.M >= 1, f"capacity M must be at least 1, got {self.M}"),
            (self.beta >= 0, f"beta must be non-negative, got {self.beta}"),
            (self.single_stride >= 1, f"single_stride must be at least 1, got {self.single_stride}"),
            (self.pair_budget >= 4, f"pair_budget must be at least 4, got {self.pair_budget}"),
            (self.eta > 0, f"eta must be positive, got {self.eta}"),
            (self.eta_adam > 0, f"eta_adam must be positive, got {self.eta_adam}"),
            (self.v_max > 0, f"v_max must be positive, got {self.v_max}"),
            (self.k >= 1, f"plateau window k must be at least 1, got {self.k}"),
            (self.epsilon > 0, f"plateau threshold must be positive, got {self.epsilon}"),
            (self.alpha > 0, f"consensus alpha must be positive, got {self.alpha}"),
            (self.hyper_spread >= 0, f"hyper_spread must be non-negative, got {self.hyper_spread}"),
            (self.refit_steps >= 0, f"refit_steps must be non-negative, got {self.refit_steps}"),
            (self.rmse_stride >= 1, f"rmse_stride must be at least 1, got {self.rmse_stride}"),
            (0 < self.lloyd_gamma <= 1, f"lloyd_gamma must be in (0, 1], got {self.lloyd_gamma}"),
            (self.init_mode in _INIT_MODES,
             f"init_mode must be one of {_INIT_MODES}, got {self.init_mode!r}"),
            (self.cluster_corner in _CORNERS,
             f"cluster_corner must be one of {_CORNERS}, got {self.cluster_corner!r}"),
            (self.noise_sigma is None or self.noise_sigma >= 0,
             f"noise_sigma must be non-negative, got {self.noise_sigma}"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigurationError(message)
        try:
            self.domain()
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc
        if self.init_mode == "explicit":
            pos = self.explicit_positions
            if pos is None or len(pos) != self.n_agents:
                raise ConfigurationError(
                    "explicit init requires explicit_positions with one entry per agent")

    def with_overrides(self, **kwargs) -> "SimConfig":
        cfg = replace(self, **kwargs)
        cfg.validate()
        return cfg


_FIELD_NAMES = {f.name for f in fields(SimConfig)}

# nested config-file sections and the fields they may set
_SECTIONS = {
    "domain": ("width", "height", "cell_size"),
    "gp": ("M", "T", "lengthscale0", "signal_variance0", "noise_variance0",
           "prior_mean0", "hyper_spread", "refit_steps"),
    "optimizer": ("eta", "eta_adam", "v_max", "k", "epsilon", "beta"),
    "consensus": ("alpha", "log_space_consensus"),
    "quadrature": ("single_stride", "pair_budget"),
    "init": ("init_mode", "cluster_corner", "explicit_positions"),
    "metrics": ("rmse_stride", "lloyd_gamma"),
}


def config_from_dict(data: dict) -> SimConfig:
    """Build a validated ``SimConfig`` from a (possibly nested) plain mapping.

    Top-level keys may be field names or one of the section names
    (``domain``, ``gp``, ``optimizer``, ``consensus``, ``quadrature``,
    ``init``, ``metrics``); unknown keys raise ``ConfigurationError``.
    """
    flat: dict = {}
    for key, value in (data or {}).items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigurationError(f"section {key!r} must be a mapping")
            for sub, subval in value.items():
                if sub not in _SECTIONS[key]:
                    raise ConfigurationError(f"unknown key {sub!r} in section {key!r}")
                flat[sub] = subval
        elif key in _FIELD_NAMES:
            flat[key] = value
        else:
            raise ConfigurationError(f"unknown configuration key {key!r}")
    if "explicit_positions" in flat and flat["explicit_positions"] is not None:
        flat["explicit_positions"] = tuple(
            (float(p[0]), float(p[1])) for p in flat["explicit_positions"])
    try:
        cfg = SimConfig(**flat)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(str(exc)) from exc
    cfg.validate()
    return cfg
