"""Experiment configuration schema and trajectory serialization.

The config file is a single versioned JSON document; it round-trips
losslessly through parse -> serialize -> parse.  Trajectories serialize to
JSON Lines: a header object carrying schema version, dimension and the
initial state, then one event object per line with keys t, kind, id, x.
All serialization uses sorted keys and shortest round-trip float
formatting, so identical runs produce byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any

from .configuration import Configuration
from .kernels import Box, GaussianKernel, UniformBallKernel
from .rates import (
    RateModel,
    combine,
    constant_death,
    contact,
    immigration,
    pairwise_death,
    superlinear_birth,
)
from .rng import CHANNEL_INITIAL, NoiseSource, StreamKey
from .simulate import Caps, Trajectory

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


def _require(mapping: dict, key: str, where: str) -> Any:
    if key not in mapping:
        raise ConfigError(f"missing field {where}.{key}" if where else f"missing field {key}")
    return mapping[key]


@dataclass(frozen=True)
class ExperimentConfig:
    dimension: int
    model: dict
    initial: dict
    horizon: float
    n_traj: int
    master_seed: int
    caps: Caps = Caps()
    model2: dict | None = None
    initial_upper: dict | None = None
    options: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        version = raw.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version}")
        dimension = int(_require(raw, "dimension", ""))
        if dimension < 1:
            raise ConfigError("dimension must be >= 1")
        horizon = float(_require(raw, "horizon", ""))
        if horizon <= 0:
            raise ConfigError("horizon must be positive")
        n_traj = int(_require(raw, "n_traj", ""))
        if n_traj < 1:
            raise ConfigError("n_traj must be >= 1")
        master_seed = int(_require(raw, "master_seed", ""))
        caps_raw = raw.get("caps", {})
        caps = Caps(
            max_population=int(caps_raw.get("max_population", Caps().max_population)),
            max_events=int(caps_raw.get("max_events", Caps().max_events)),
        )
        cfg = cls(
            dimension=dimension,
            model=_require(raw, "model", ""),
            initial=_require(raw, "initial", ""),
            horizon=horizon,
            n_traj=n_traj,
            master_seed=master_seed,
            caps=caps,
            model2=raw.get("model2"),
            initial_upper=raw.get("initial_upper"),
            options=raw.get("options", {}),
        )
        # fail early on malformed descriptors
        cfg.build_model(cfg.model, "model")
        if cfg.model2 is not None:
            cfg.build_model(cfg.model2, "model2")
        cfg.validate_initial(cfg.initial, "initial")
        if cfg.initial_upper is not None:
            cfg.validate_initial(cfg.initial_upper, "initial_upper")
        return cfg

    def to_dict(self) -> dict:
        out: dict[str, Any] = {
            "schema_version": SCHEMA_VERSION,
            "dimension": self.dimension,
            "model": self.model,
            "initial": self.initial,
            "horizon": self.horizon,
            "n_traj": self.n_traj,
            "master_seed": self.master_seed,
            "caps": {
                "max_population": self.caps.max_population,
                "max_events": self.caps.max_events,
            },
            "options": self.options,
        }
        if self.model2 is not None:
            out["model2"] = self.model2
        if self.initial_upper is not None:
            out["initial_upper"] = self.initial_upper
        return out

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def dump(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(dumps_canonical(self.to_dict()))
            fh.write("\n")

    def config_hash(self) -> str:
        return hashlib.sha256(dumps_canonical(self.to_dict()).encode()).hexdigest()

    def with_seed(self, master_seed: int) -> "ExperimentConfig":
        return ExperimentConfig(
            self.dimension,
            self.model,
            self.initial,
            self.horizon,
            self.n_traj,
            master_seed,
            self.caps,
            self.model2,
            self.initial_upper,
            self.options,
        )

    # model descriptors

    def build_model(self, descriptor: dict | None = None, where: str = "model") -> RateModel:
        desc = self.model if descriptor is None else descriptor
        parts: list[RateModel] = []
        for i, b in enumerate(desc.get("birth", [])):
            parts.append(self._birth_model(b, f"{where}.birth[{i}]"))
        for i, d in enumerate(desc.get("death", [])):
            parts.append(self._death_model(d, f"{where}.death[{i}]"))
        if not parts:
            raise ConfigError(f"{where} declares neither birth nor death components")
        return combine(*parts, name=desc.get("name")) if len(parts) > 1 else parts[0]

    def _birth_model(self, b: dict, where: str) -> RateModel:
        kind = _require(b, "type", where)
        if kind == "contact":
            lam = float(_require(b, "lam", where))
            kernel = self._kernel(_require(b, "kernel", where), f"{where}.kernel")
            return contact(lam, kernel)
        if kind == "immigration":
            kappa = float(_require(b, "kappa", where))
            return immigration(kappa, self._box(_require(b, "box", where), f"{where}.box"))
        if kind == "superlinear":
            theta = float(_require(b, "theta", where))
            power = float(_require(b, "power", where))
            return superlinear_birth(
                theta, power, self._box(_require(b, "box", where), f"{where}.box")
            )
        raise ConfigError(f"{where}.type: unknown birth type {kind!r}")

    def _death_model(self, d: dict, where: str) -> RateModel:
        kind = _require(d, "type", where)
        if kind == "constant":
            return constant_death(float(_require(d, "mu", where)))
        if kind == "pairwise":
            return pairwise_death(
                float(_require(d, "m0", where)),
                float(_require(d, "strength", where)),
                float(_require(d, "radius", where)),
            )
        raise ConfigError(f"{where}.type: unknown death type {kind!r}")

    def _kernel(self, k: dict, where: str):
        kind = _require(k, "type", where)
        if kind == "uniform_ball":
            return UniformBallKernel(float(_require(k, "radius", where)), self.dimension)
        if kind == "gaussian":
            return GaussianKernel(float(_require(k, "sigma", where)), self.dimension)
        raise ConfigError(f"{where}.type: unknown kernel type {kind!r}")

    def _box(self, bounds, where: str) -> Box:
        try:
            box = Box(tuple((float(lo), float(hi)) for lo, hi in bounds))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}: {exc}") from exc
        if box.dimension != self.dimension:
            raise ConfigError(f"{where}: box dimension {box.dimension} != {self.dimension}")
        return box

    # initial conditions

    def validate_initial(self, desc: dict, where: str) -> None:
        if "points" in desc:
            pts = desc["points"]
            if not isinstance(pts, list):
                raise ConfigError(f"{where}.points must be a list of coordinate lists")
            seen = set()
            for j, p in enumerate(pts):
                if len(p) != self.dimension:
                    raise ConfigError(f"{where}.points[{j}] has wrong dimension")
                t = tuple(float(c) for c in p)
                if t in seen:
                    raise ConfigError(f"{where}.points[{j}] duplicates an earlier point")
                seen.add(t)
        elif "poisson" in desc:
            pois = desc["poisson"]
            if float(_require(pois, "intensity", f"{where}.poisson")) <= 0:
                raise ConfigError(f"{where}.poisson.intensity must be positive")
            self._box(_require(pois, "box", f"{where}.poisson"), f"{where}.poisson.box")
        else:
            raise ConfigError(f"{where} must declare either points or poisson")

    def build_initial(
        self, key: StreamKey, desc: dict | None = None
    ) -> Configuration:
        d = self.initial if desc is None else desc
        if "points" in d:
            if not d["points"]:
                return Configuration.empty(self.dimension)
            return Configuration.from_points(d["points"], self.dimension)
        pois = d["poisson"]
        box = self._box(pois["box"], "initial.poisson.box")
        intensity = float(pois["intensity"])
        stream = NoiseSource(key).stream(CHANNEL_INITIAL)
        n = _poisson_draw(intensity * box.volume, stream)
        pts = []
        seen = set()
        while len(pts) < n:
            p = tuple(box.sample(stream).tolist())
            if p not in seen:
                seen.add(p)
                pts.append(p)
        if not pts:
            return Configuration.empty(self.dimension)
        return Configuration.from_points(pts, self.dimension)


def _poisson_draw(mean: float, stream) -> int:
    """Knuth-style Poisson sample from stream uniforms (desk-scale means)."""
    import math

    limit = math.exp(-mean)
    k = 0
    p = 1.0
    while True:
        p *= stream.uniform()
        if p <= limit:
            return k
        k += 1


def dumps_canonical(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


# trajectory serialization

def trajectory_lines(traj: Trajectory, trajectory_id: int) -> list[str]:
    header = {
        "schema_version": SCHEMA_VERSION,
        "dimension": traj.initial.dimension,
        "trajectory": trajectory_id,
        "horizon": traj.horizon,
        "initial": [
            {"id": idx, "x": pos.tolist()} for idx, pos in traj.initial
        ],
    }
    lines = [dumps_canonical(header)]
    for e in traj.events:
        lines.append(
            dumps_canonical(
                {"t": e.time, "kind": e.kind, "id": e.particle_index, "x": list(e.position)}
            )
        )
    return lines


def status_dict(traj: Trajectory) -> dict:
    s = traj.status
    out: dict[str, Any] = {"kind": s.kind}
    if s.time is not None:
        out["time"] = s.time
    if s.cap is not None:
        out["cap"] = s.cap
        out["capped_by"] = s.capped_by
    return out


def parse_trajectory_lines(lines: list[str]) -> tuple[dict, list[dict]]:
    if not lines:
        raise ValueError("empty trajectory stream")
    header = json.loads(lines[0])
    events = [json.loads(line) for line in lines[1:]]
    return header, events


def parse_points_file(path: str, dimension: int | None = None) -> list[tuple[float, ...]]:
    """Plain-text point list: one point per line, coordinates separated by
    whitespace; blank lines and # comments ignored."""
    pts: list[tuple[float, ...]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            try:
                p = tuple(float(tok) for tok in body.split())
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: cannot parse point: {exc}") from exc
            if dimension is not None and len(p) != dimension:
                raise ValueError(f"{path}:{lineno}: expected dimension {dimension}")
            if pts and len(p) != len(pts[0]):
                raise ValueError(f"{path}:{lineno}: inconsistent dimension")
            pts.append(p)
    return pts
