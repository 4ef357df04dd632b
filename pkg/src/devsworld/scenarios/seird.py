"""SEIRD epidemic compartments integrated with forward Euler at a fixed step.

Time unit: 1.0 = 1 day.  One ``seird / state`` record per step (including the
initial state at t=0) with payload ``{"step", "S", "E", "I", "R", "D"}``.

Flows per step of length dt, with N the total population::

    infection  = beta * S * I / N
    incubation = sigma * E
    removal    = gamma * I          (a fraction mu of it dies)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..kernel import Atomic, Coupled
from .base import ConfigError, Scenario

COMPARTMENTS = ("S", "E", "I", "R", "D")


@dataclass
class SeirdConfig:
    susceptible: float = field(default=990.0, metadata={"help": "initial S"})
    exposed: float = field(default=0.0, metadata={"help": "initial E"})
    infected: float = field(default=10.0, metadata={"help": "initial I"})
    recovered: float = field(default=0.0, metadata={"help": "initial R"})
    deceased: float = field(default=0.0, metadata={"help": "initial D"})
    beta: float = field(default=0.3, metadata={"help": "transmission rate (1/day)"})
    sigma: float = field(default=0.2, metadata={"help": "incubation rate (1/day)"})
    gamma: float = field(default=0.1, metadata={"help": "removal rate (1/day)"})
    mu: float = field(default=0.02, metadata={"help": "fraction of removals that die"})
    dt: float = field(default=0.5, metadata={"help": "integration step (days)"})
    horizon: float = field(default=100.0, metadata={"help": "simulated days"})

    @property
    def population(self) -> float:
        return self.susceptible + self.exposed + self.infected + self.recovered + self.deceased

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.horizon / self.dt + 1e-9))

    def validate(self) -> None:
        values = [getattr(self, f) for f in ("susceptible", "exposed", "infected", "recovered", "deceased",
                                              "beta", "sigma", "gamma", "mu", "dt", "horizon")]
        if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in values):
            raise ConfigError("all SEIRD parameters must be finite numbers")
        if min(self.susceptible, self.exposed, self.infected, self.recovered, self.deceased) < 0:
            raise ConfigError("compartment counts must be >= 0")
        if self.population <= 0:
            raise ConfigError("population must be positive")
        if min(self.beta, self.sigma, self.gamma) < 0:
            raise ConfigError("rates must be >= 0")
        if not 0 <= self.mu <= 1:
            raise ConfigError("mu must lie in [0, 1]")
        if self.dt <= 0 or self.horizon < 0:
            raise ConfigError("dt must be > 0 and horizon >= 0")


def euler_step(state: tuple[float, ...], cfg: SeirdConfig, population: float) -> tuple[float, ...]:
    S, E, I, R, D = state
    dt = cfg.dt
    infection = dt * cfg.beta * S * I / population
    incubation = dt * cfg.sigma * E
    removal = dt * cfg.gamma * I
    deaths = cfg.mu * removal
    return (
        S - infection,
        E + infection - incubation,
        I + incubation - removal,
        R + (removal - deaths),
        D + deaths,
    )


class Seird(Atomic):
    entity = "seird"

    def __init__(self, name: str, cfg: SeirdConfig):
        super().__init__(name)
        self.cfg = cfg
        self.population = cfg.population
        self.state = (cfg.susceptible, cfg.exposed, cfg.infected, cfg.recovered, cfg.deceased)
        self.k = 0

    def _log(self):
        payload = {"step": self.k}
        payload.update({name: float(v) for name, v in zip(COMPARTMENTS, self.state)})
        self.emit("state", payload)

    def _schedule(self):
        if self.k < self.cfg.n_steps:
            self.hold_until("stepping", (self.k + 1) * self.cfg.dt)
        else:
            self.passivate("finished")

    def initialize(self):
        self._log()
        self._schedule()

    def delta_int(self):
        self.state = euler_step(self.state, self.cfg, self.population)
        self.k += 1
        self._log()
        self._schedule()


def build_seird(cfg: SeirdConfig) -> Coupled:
    cfg.validate()
    root = Coupled("seird_model")
    root.add_component(Seird("seird", cfg))
    return root


SCENARIO = Scenario(
    name="seird",
    config_cls=SeirdConfig,
    build=build_seird,
    horizon=lambda cfg: cfg.n_steps * cfg.dt,
    description="SEIRD compartments under forward Euler",
)
