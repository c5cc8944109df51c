"""Scenario configuration: JSON loading, validation and conversion to nondimensional inputs."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from ..dynamics import Model, inertial_to_relative, make_model
from ..rank1_factor import EigenSettings
from ..stt_engine import IntegratorSettings

BUNDLED = ("leo", "nrho", "uranus_aerocapture")


class ConfigError(ValueError):
    """Invalid or inconsistent scenario configuration."""


def _schema() -> dict:
    text = resources.files("dstt_kit.harness").joinpath("configs/scenario.schema.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario description; ``raw`` is the exact JSON document."""

    raw: dict

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        data = copy.deepcopy(data)
        try:
            jsonschema.validate(data, _schema())
        except jsonschema.ValidationError as exc:
            raise ConfigError(exc.message) from exc
        cfg = cls(data)
        cfg.model()  # surfaces bad params early
        n = cfg.model().n
        if len(data["initial_state"]["values"]) != n:
            raise ConfigError(f"initial state needs {n} values for model {data['model']!r}")
        cov = data.get("initial_covariance")
        if cov and "sigma" in cov and len(cov["sigma"]) != n:
            raise ConfigError(f"initial covariance sigma needs {n} values")
        return cfg

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def bundled(cls, name: str) -> "ScenarioConfig":
        if name not in BUNDLED:
            raise ConfigError(f"no bundled scenario {name!r}")
        text = resources.files("dstt_kit.harness").joinpath(f"configs/{name}.json").read_text()
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)

    def dumps(self) -> str:
        return json.dumps(self.raw, indent=2, sort_keys=True)

    def replace(self, **changes) -> "ScenarioConfig":
        data = self.to_dict()
        data.update(changes)
        return ScenarioConfig.from_dict(data)

    @property
    def name(self) -> str:
        return self.raw["name"]

    @property
    def stt_order(self) -> int:
        return int(self.raw.get("stt_order", 3))

    @property
    def rng_seed(self) -> int:
        return int(self.raw.get("rng_seed", 0))

    def model(self) -> Model:
        try:
            return make_model(self.raw["model"], self.raw.get("params"))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad model specification: {exc}") from exc

    def initial_state(self) -> np.ndarray:
        """Nondimensional initial state."""
        model = self.model()
        spec = self.raw["initial_state"]
        x = np.array(spec["values"], dtype=float)
        if spec.get("nondimensional", False):
            return x
        if model.name == "aerocapture":
            p = model.params
            if spec.get("altitude", False):
                x[0] += p.radius_planet
            if spec.get("velocity_frame", "relative") == "inertial":
                x = inertial_to_relative(x, p)
        return model.nondimensionalize(x)

    def time_grid(self) -> np.ndarray:
        """Nondimensional sample times."""
        spec = self.raw["time_grid"]
        start, stop = float(spec.get("start", 0.0)), float(spec["stop"])
        if "step" in spec:
            num = int(round((stop - start) / spec["step"])) + 1
        else:
            num = int(spec.get("num", 2))
        grid = np.linspace(start, stop, num)
        units = spec["units"]
        model = self.model()
        if units == "s":
            return grid / model.time_unit
        if units == "periods":
            if model.name != "two_body":
                raise ConfigError("'periods' time units are only defined for the two-body model")
            x0 = self.initial_state()
            r, v = np.linalg.norm(x0[:3]), np.linalg.norm(x0[3:])
            a = 1.0 / (2.0 / r - v * v)
            return grid * 2.0 * math.pi * a**1.5
        return grid

    def initial_covariance(self) -> np.ndarray:
        """Nondimensional initial covariance (zeros when none is configured)."""
        model = self.model()
        spec = self.raw.get("initial_covariance")
        if not spec:
            return np.zeros((model.n, model.n))
        if "matrix" in spec:
            P = np.array(spec["matrix"], dtype=float)
        else:
            P = np.diag(np.asarray(spec["sigma"], dtype=float) ** 2)
        if P.shape != (model.n, model.n):
            raise ConfigError(f"initial covariance must be {model.n}x{model.n}")
        if spec.get("nondimensional", False):
            return P
        return model.nondimensionalize_cov(P)

    def integrator(self) -> IntegratorSettings:
        try:
            return IntegratorSettings(**self.raw.get("integrator", {}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def eigen(self) -> EigenSettings:
        try:
            return EigenSettings(**self.raw.get("eigen", {}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def bound(self) -> dict:
        return {"nsamples": 1000, "plant_maximizer": False, **self.raw.get("bound", {})}

    @property
    def output_dir(self) -> Path:
        return Path(self.raw.get("output_dir", f"out/{self.name}"))
