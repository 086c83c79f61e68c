"""Scenario configuration, defaults, and source-selection policies.

Configurations are plain JSON documents validated strictly: unknown keys
are rejected and every diagnostic names the offending field.  An empty
document loads the default scenario (standard ground fiber backbone,
unlimited memory, 10 minute horizon).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Any, Mapping

from .entanglement import (
    DEFAULT_EMISSION_RATE_HZ,
    EntanglementSource,
    FiberSource,
    SatelliteSource,
)
from .geometry import GroundStation, SatellitePassModel, StationPass
from .linkbudget import FiberLink, FreeSpaceLinkParams

SCHEMA_VERSION = 1
SEED_ENV_VAR = "QBACKBONE_SEED"

STANDARD_FIBER_DB_PER_KM = 0.2
DARK_FIBER_DB_PER_KM = 0.16

MUNICH = GroundStation("Munich", 48.15, 11.533333333333333)
NUREMBERG = GroundStation("Nuremberg", 49.43333333333333, 11.116666666666667)

# name -> (altitude_km, peak elevation egress/ingress, default peak time)
_SATELLITES = {
    "Micius": (474.0, 83.0, 75.0, 128.0),
    "Starlink-2007": (551.0, 88.0, 75.0, 199.0),
    "Iridium-126": (804.0, 76.0, 74.0, 328.0),
}

POLICY_KINDS = ("fiber-only", "satellite-only", "best-source", "all-sources")


class ConfigError(ValueError):
    """A scenario document failed to parse or validate."""


@dataclass(frozen=True)
class Policy:
    """Rule choosing which sources feed the memories at each channel step."""

    kind: str
    source_id: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in POLICY_KINDS:
            raise ConfigError(
                f"policy.kind must be one of {POLICY_KINDS}: {self.kind!r}"
            )
        if self.kind == "satellite-only" and not self.source_id:
            raise ConfigError("policy satellite-only requires a source_id")
        if self.kind != "satellite-only" and self.source_id is not None:
            raise ConfigError(f"policy {self.kind!r} takes no source_id")


@dataclass(frozen=True)
class PolicyDecision:
    """Active sources at one instant with their coincidence probabilities."""

    time_s: float
    active_source_ids: tuple[str, ...]
    coincidence_probabilities: Mapping[str, float]


@dataclass(frozen=True)
class TrafficConfig:
    """Frame generation model of the sending subnetwork node."""

    qubit_rate_hz: float = 1.0e9
    frame_duration_s: float = 1.0e-4
    mean_interarrival_s: float = 0.020

    def __post_init__(self) -> None:
        for name in ("qubit_rate_hz", "frame_duration_s", "mean_interarrival_s"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ConfigError(f"traffic.{name} must be > 0: {value}")
        payload = self.qubit_rate_hz * self.frame_duration_s
        if abs(payload - round(payload)) > 1e-6 or round(payload) < 1:
            raise ConfigError(
                "traffic.qubit_rate_hz * traffic.frame_duration_s must be a "
                f"positive integer payload: {payload}"
            )

    @property
    def payload_qubits(self) -> int:
        return int(round(self.qubit_rate_hz * self.frame_duration_s))


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete, validated description of one simulation run."""

    egress_station: GroundStation = MUNICH
    ingress_station: GroundStation = NUREMBERG
    sources: tuple[EntanglementSource, ...] = ()
    policy: Policy = Policy("fiber-only")
    traffic: TrafficConfig = TrafficConfig()
    ingress_access: FiberLink = FiberLink(5.0, STANDARD_FIBER_DB_PER_KM)
    egress_access: FiberLink = FiberLink(5.0, STANDARD_FIBER_DB_PER_KM)
    memory_capacity: int | None = None
    p_teleport_success: float = 0.5
    duration_s: float = 600.0
    bin_width_s: float = 8.0
    channel_step_s: float = 2.0
    classical_distance_km: float = 150.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.memory_capacity is not None and self.memory_capacity < 1:
            raise ConfigError("memory_capacity must be >= 1 or unlimited (null)")
        if not 0.0 <= self.p_teleport_success <= 1.0:
            raise ConfigError(
                f"p_teleport_success must be in [0, 1]: {self.p_teleport_success}"
            )
        if not (math.isfinite(self.duration_s) and self.duration_s >= 0.0):
            raise ConfigError(f"duration_s must be >= 0: {self.duration_s}")
        for name in ("bin_width_s", "channel_step_s", "classical_distance_km"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ConfigError(f"{name} must be > 0: {value}")
        ratio = self.bin_width_s / self.channel_step_s
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ConfigError(
                f"bin_width_s ({self.bin_width_s}) must be a multiple of "
                f"channel_step_s ({self.channel_step_s})"
            )
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer: {self.seed}")
        if self.egress_station.name == self.ingress_station.name:
            raise ConfigError("egress and ingress stations must have distinct names")
        seen: set[str] = set()
        for source in self.sources:
            if source.source_id in seen:
                raise ConfigError(f"duplicate source id {source.source_id!r}")
            seen.add(source.source_id)
            if source.kind == "satellite-pass":
                for name in (self.egress_station.name, self.ingress_station.name):
                    if name not in source.pass_model.station_passes:
                        raise ConfigError(
                            f"source {source.source_id!r} lacks pass parameters "
                            f"for station {name!r}"
                        )
        if self.policy.kind == "satellite-only":
            match = [s for s in self.sources if s.source_id == self.policy.source_id]
            if not match:
                raise ConfigError(
                    f"policy references unknown source {self.policy.source_id!r}"
                )
            if match[0].kind != "satellite-pass":
                raise ConfigError(
                    f"policy satellite-only requires a satellite source, "
                    f"got {match[0].kind!r} for {self.policy.source_id!r}"
                )

    @property
    def payload_qubits(self) -> int:
        return self.traffic.payload_qubits

    @property
    def n_bins(self) -> int:
        return int(math.ceil(self.duration_s / self.bin_width_s - 1e-9))


def select_sources(
    policy: Policy, t_s: float, sources: tuple[EntanglementSource, ...]
) -> PolicyDecision:
    """Evaluate a source-selection policy at one instant.

    best-source picks the single source with the highest instantaneous
    coincidence probability (ties broken by lexicographic source id);
    sources with zero probability are never selected.
    """
    probabilities = {s.source_id: s.coincidence_probability(t_s) for s in sources}
    if policy.kind == "fiber-only":
        active = sorted(
            s.source_id
            for s in sources
            if s.kind == "ground-fiber" and probabilities[s.source_id] > 0.0
        )
    elif policy.kind == "satellite-only":
        active = (
            [policy.source_id]
            if probabilities.get(policy.source_id, 0.0) > 0.0
            else []
        )
    elif policy.kind == "all-sources":
        active = sorted(sid for sid, p in probabilities.items() if p > 0.0)
    else:  # best-source
        candidates = [(sid, p) for sid, p in probabilities.items() if p > 0.0]
        candidates.sort(key=lambda item: (-item[1], item[0]))
        active = [candidates[0][0]] if candidates else []
    return PolicyDecision(t_s, tuple(active), probabilities)


def satellite_pass(
    name: str,
    egress: GroundStation = MUNICH,
    ingress: GroundStation = NUREMBERG,
    peak_time_s: float | None = None,
) -> SatellitePassModel:
    """Pass model of one of the built-in satellites over two stations."""
    altitude_km, peak_a, peak_b, default_peak_time = _SATELLITES[name]
    t_peak = default_peak_time if peak_time_s is None else peak_time_s
    return SatellitePassModel(
        satellite_name=name,
        altitude_km=altitude_km,
        station_passes={
            egress.name: StationPass(peak_a, t_peak),
            ingress.name: StationPass(peak_b, t_peak),
        },
    )


def satellite_source(
    name: str,
    egress: GroundStation = MUNICH,
    ingress: GroundStation = NUREMBERG,
    link_params: FreeSpaceLinkParams = FreeSpaceLinkParams(),
    emission_rate_hz: float = DEFAULT_EMISSION_RATE_HZ,
    peak_time_s: float | None = None,
) -> SatelliteSource:
    """Backbone source backed by a built-in satellite pass."""
    return SatelliteSource(
        source_id=name,
        pass_model=satellite_pass(name, egress, ingress, peak_time_s),
        station_a=egress.name,
        station_b=ingress.name,
        link_params=link_params,
        emission_rate_hz=emission_rate_hz,
    )


def fiber_source(
    source_id: str = "fiber-standard",
    attenuation_db_per_km: float = STANDARD_FIBER_DB_PER_KM,
    arm_length_km: float = 75.0,
    emission_rate_hz: float = DEFAULT_EMISSION_RATE_HZ,
) -> FiberSource:
    """Ground source placed equidistantly between egress and ingress."""
    arm = FiberLink(arm_length_km, attenuation_db_per_km)
    return FiberSource(source_id, arm, arm, emission_rate_hz)


def dark_fiber_source(source_id: str = "fiber-dark") -> FiberSource:
    return fiber_source(source_id, DARK_FIBER_DB_PER_KM)


def builtin_sources() -> tuple[EntanglementSource, ...]:
    """Both fiber backbones plus the three built-in satellites."""
    return (
        fiber_source(),
        dark_fiber_source(),
        satellite_source("Micius"),
        satellite_source("Starlink-2007"),
        satellite_source("Iridium-126"),
    )


def default_config() -> ScenarioConfig:
    """The default scenario: standard fiber backbone, unlimited memory."""
    return ScenarioConfig(sources=(fiber_source(),))


def seed_from_env() -> int | None:
    """Seed override from the environment, or None when unset."""
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None:
        return None
    try:
        seed = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{SEED_ENV_VAR} must be an integer: {raw!r}") from exc
    if seed < 0:
        raise ConfigError(f"{SEED_ENV_VAR} must be >= 0: {seed}")
    return seed


# --- document loading -------------------------------------------------------


def _require_mapping(value: Any, path: str) -> Mapping[str, Any]:
    if not isinstance(value, Mapping):
        raise ConfigError(f"{path} must be an object, got {type(value).__name__}")
    return value


def _check_keys(doc: Mapping[str, Any], allowed: set[str], path: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {path}: {sorted(unknown)}")


def _get_number(doc: Mapping[str, Any], key: str, default: float, path: str) -> float:
    value = doc.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}.{key} must be a number, got {value!r}")
    return float(value)


def _get_str(doc: Mapping[str, Any], key: str, path: str, default: str | None = None) -> str:
    value = doc.get(key, default)
    if not isinstance(value, str) or not value:
        raise ConfigError(f"{path}.{key} must be a non-empty string, got {value!r}")
    return value


def _load_station(doc: Any, default: GroundStation, path: str) -> GroundStation:
    if doc is None:
        return default
    doc = _require_mapping(doc, path)
    _check_keys(doc, {"name", "latitude_deg", "longitude_deg"}, path)
    try:
        return GroundStation(
            name=_get_str(doc, "name", path, default.name),
            latitude_deg=_get_number(doc, "latitude_deg", default.latitude_deg, path),
            longitude_deg=_get_number(doc, "longitude_deg", default.longitude_deg, path),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _load_fiber_link(doc: Any, default: FiberLink, path: str) -> FiberLink:
    if doc is None:
        return default
    doc = _require_mapping(doc, path)
    _check_keys(doc, {"length_km", "attenuation_db_per_km"}, path)
    try:
        return FiberLink(
            length_km=_get_number(doc, "length_km", default.length_km, path),
            attenuation_db_per_km=_get_number(
                doc, "attenuation_db_per_km", default.attenuation_db_per_km, path
            ),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _load_link_params(doc: Any, path: str) -> FreeSpaceLinkParams:
    defaults = FreeSpaceLinkParams()
    if doc is None:
        return defaults
    doc = _require_mapping(doc, path)
    fields = {
        "divergence_half_angle_rad",
        "receiver_aperture_diameter_m",
        "zenith_atmospheric_transmittance",
        "pointing_loss_db",
        "system_efficiency",
        "min_elevation_deg",
    }
    _check_keys(doc, fields, path)
    try:
        return FreeSpaceLinkParams(
            **{name: _get_number(doc, name, getattr(defaults, name), path) for name in fields}
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _per_role(doc: Mapping[str, Any], key: str, path: str, required: bool) -> dict[str, float] | None:
    """A scalar or an {egress, ingress} object, normalised to a role map."""
    if key not in doc:
        if required:
            raise ConfigError(f"{path}.{key} is required for satellite sources")
        return None
    value = doc[key]
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return {"egress": float(value), "ingress": float(value)}
    value = _require_mapping(value, f"{path}.{key}")
    _check_keys(value, {"egress", "ingress"}, f"{path}.{key}")
    return {
        "egress": _get_number(value, "egress", math.nan, f"{path}.{key}"),
        "ingress": _get_number(value, "ingress", math.nan, f"{path}.{key}"),
    }


def _load_source(
    doc: Any, egress: GroundStation, ingress: GroundStation, path: str
) -> EntanglementSource:
    doc = _require_mapping(doc, path)
    kind = _get_str(doc, "kind", path)
    source_id = _get_str(doc, "id", path)
    try:
        if kind == "ground-fiber":
            _check_keys(
                doc,
                {"id", "kind", "emission_rate_hz", "arm_length_km", "attenuation_db_per_km"},
                path,
            )
            arm = FiberLink(
                length_km=_get_number(doc, "arm_length_km", 75.0, path),
                attenuation_db_per_km=_get_number(
                    doc, "attenuation_db_per_km", STANDARD_FIBER_DB_PER_KM, path
                ),
            )
            return FiberSource(
                source_id=source_id,
                arm_a=arm,
                arm_b=arm,
                emission_rate_hz=_get_number(
                    doc, "emission_rate_hz", DEFAULT_EMISSION_RATE_HZ, path
                ),
            )
        if kind == "satellite-pass":
            _check_keys(
                doc,
                {
                    "id",
                    "kind",
                    "emission_rate_hz",
                    "altitude_km",
                    "peak_elevation_deg",
                    "peak_time_s",
                    "link",
                },
                path,
            )
            peaks = _per_role(doc, "peak_elevation_deg", path, required=True)
            times = _per_role(doc, "peak_time_s", path, required=False) or {
                "egress": 0.0,
                "ingress": 0.0,
            }
            pass_model = SatellitePassModel(
                satellite_name=source_id,
                altitude_km=_get_number(doc, "altitude_km", math.nan, path),
                station_passes={
                    egress.name: StationPass(peaks["egress"], times["egress"]),
                    ingress.name: StationPass(peaks["ingress"], times["ingress"]),
                },
            )
            return SatelliteSource(
                source_id=source_id,
                pass_model=pass_model,
                station_a=egress.name,
                station_b=ingress.name,
                link_params=_load_link_params(doc.get("link"), f"{path}.link"),
                emission_rate_hz=_get_number(
                    doc, "emission_rate_hz", DEFAULT_EMISSION_RATE_HZ, path
                ),
            )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    raise ConfigError(
        f"{path}.kind must be 'ground-fiber' or 'satellite-pass', got {kind!r}"
    )


def _load_policy(doc: Any) -> Policy:
    if doc is None:
        return Policy("fiber-only")
    if isinstance(doc, str):
        return Policy(doc)
    doc = _require_mapping(doc, "policy")
    _check_keys(doc, {"kind", "source_id"}, "policy")
    source_id = doc.get("source_id")
    if source_id is not None and not isinstance(source_id, str):
        raise ConfigError(f"policy.source_id must be a string, got {source_id!r}")
    return Policy(_get_str(doc, "kind", "policy"), source_id)


_TOP_LEVEL_KEYS = {
    "schema_version",
    "seed",
    "duration_s",
    "bin_width_s",
    "channel_step_s",
    "memory_capacity",
    "p_teleport_success",
    "classical_distance_km",
    "stations",
    "traffic",
    "access",
    "policy",
    "sources",
}


def load_config(doc: Mapping[str, Any]) -> ScenarioConfig:
    """Build a validated ScenarioConfig from a configuration document."""
    doc = _require_mapping(doc, "config")
    _check_keys(doc, _TOP_LEVEL_KEYS, "config")

    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")

    stations_doc = doc.get("stations")
    if stations_doc is not None:
        stations_doc = _require_mapping(stations_doc, "stations")
        _check_keys(stations_doc, {"egress", "ingress"}, "stations")
    egress = _load_station(
        stations_doc.get("egress") if stations_doc else None, MUNICH, "stations.egress"
    )
    ingress = _load_station(
        stations_doc.get("ingress") if stations_doc else None, NUREMBERG, "stations.ingress"
    )

    traffic_doc = doc.get("traffic")
    traffic_defaults = TrafficConfig()
    if traffic_doc is not None:
        traffic_doc = _require_mapping(traffic_doc, "traffic")
        _check_keys(
            traffic_doc,
            {"qubit_rate_hz", "frame_duration_s", "mean_interarrival_s"},
            "traffic",
        )
        traffic = TrafficConfig(
            qubit_rate_hz=_get_number(
                traffic_doc, "qubit_rate_hz", traffic_defaults.qubit_rate_hz, "traffic"
            ),
            frame_duration_s=_get_number(
                traffic_doc, "frame_duration_s", traffic_defaults.frame_duration_s, "traffic"
            ),
            mean_interarrival_s=_get_number(
                traffic_doc,
                "mean_interarrival_s",
                traffic_defaults.mean_interarrival_s,
                "traffic",
            ),
        )
    else:
        traffic = traffic_defaults

    access_doc = doc.get("access")
    if access_doc is not None:
        access_doc = _require_mapping(access_doc, "access")
        _check_keys(access_doc, {"ingress_access", "egress_access"}, "access")
    default_access = FiberLink(5.0, STANDARD_FIBER_DB_PER_KM)
    ingress_access = _load_fiber_link(
        access_doc.get("ingress_access") if access_doc else None,
        default_access,
        "access.ingress_access",
    )
    egress_access = _load_fiber_link(
        access_doc.get("egress_access") if access_doc else None,
        default_access,
        "access.egress_access",
    )

    sources_doc = doc.get("sources")
    if sources_doc is None:
        sources: tuple[EntanglementSource, ...] = (fiber_source(),)
    else:
        if not isinstance(sources_doc, (list, tuple)):
            raise ConfigError("sources must be a list of source objects")
        sources = tuple(
            _load_source(entry, egress, ingress, f"sources[{i}]")
            for i, entry in enumerate(sources_doc)
        )

    memory = doc.get("memory_capacity")
    if memory is not None and (isinstance(memory, bool) or not isinstance(memory, int)):
        raise ConfigError(f"memory_capacity must be an integer or null: {memory!r}")

    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError(f"seed must be an integer: {seed!r}")

    return ScenarioConfig(
        egress_station=egress,
        ingress_station=ingress,
        sources=sources,
        policy=_load_policy(doc.get("policy")),
        traffic=traffic,
        ingress_access=ingress_access,
        egress_access=egress_access,
        memory_capacity=memory,
        p_teleport_success=_get_number(doc, "p_teleport_success", 0.5, "config"),
        duration_s=_get_number(doc, "duration_s", 600.0, "config"),
        bin_width_s=_get_number(doc, "bin_width_s", 8.0, "config"),
        channel_step_s=_get_number(doc, "channel_step_s", 2.0, "config"),
        classical_distance_km=_get_number(doc, "classical_distance_km", 150.0, "config"),
        seed=seed,
    )


def load_config_file(path: str) -> ScenarioConfig:
    """Load a JSON scenario document; parse errors report their position."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"invalid JSON in {path!r} at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    return load_config(doc)


def _station_to_dict(station: GroundStation) -> dict[str, Any]:
    return {
        "name": station.name,
        "latitude_deg": station.latitude_deg,
        "longitude_deg": station.longitude_deg,
    }


def _source_to_dict(source: EntanglementSource, config: ScenarioConfig) -> dict[str, Any]:
    if source.kind == "ground-fiber":
        return {
            "id": source.source_id,
            "kind": source.kind,
            "emission_rate_hz": source.emission_rate_hz,
            "arm_length_km": source.arm_a.length_km,
            "attenuation_db_per_km": source.arm_a.attenuation_db_per_km,
        }
    passes = source.pass_model.station_passes
    egress_pass = passes[config.egress_station.name]
    ingress_pass = passes[config.ingress_station.name]
    link = source.link_params
    return {
        "id": source.source_id,
        "kind": source.kind,
        "emission_rate_hz": source.emission_rate_hz,
        "altitude_km": source.pass_model.altitude_km,
        "peak_elevation_deg": {
            "egress": egress_pass.peak_elevation_deg,
            "ingress": ingress_pass.peak_elevation_deg,
        },
        "peak_time_s": {
            "egress": egress_pass.peak_time_s,
            "ingress": ingress_pass.peak_time_s,
        },
        "link": {
            "divergence_half_angle_rad": link.divergence_half_angle_rad,
            "receiver_aperture_diameter_m": link.receiver_aperture_diameter_m,
            "zenith_atmospheric_transmittance": link.zenith_atmospheric_transmittance,
            "pointing_loss_db": link.pointing_loss_db,
            "system_efficiency": link.system_efficiency,
            "min_elevation_deg": link.min_elevation_deg,
        },
    }


def config_to_dict(config: ScenarioConfig) -> dict[str, Any]:
    """Canonical JSON-compatible form; round-trips through load_config."""
    policy: dict[str, Any] = {"kind": config.policy.kind}
    if config.policy.source_id is not None:
        policy["source_id"] = config.policy.source_id
    return {
        "schema_version": SCHEMA_VERSION,
        "seed": config.seed,
        "duration_s": config.duration_s,
        "bin_width_s": config.bin_width_s,
        "channel_step_s": config.channel_step_s,
        "memory_capacity": config.memory_capacity,
        "p_teleport_success": config.p_teleport_success,
        "classical_distance_km": config.classical_distance_km,
        "stations": {
            "egress": _station_to_dict(config.egress_station),
            "ingress": _station_to_dict(config.ingress_station),
        },
        "traffic": {
            "qubit_rate_hz": config.traffic.qubit_rate_hz,
            "frame_duration_s": config.traffic.frame_duration_s,
            "mean_interarrival_s": config.traffic.mean_interarrival_s,
        },
        "access": {
            "ingress_access": {
                "length_km": config.ingress_access.length_km,
                "attenuation_db_per_km": config.ingress_access.attenuation_db_per_km,
            },
            "egress_access": {
                "length_km": config.egress_access.length_km,
                "attenuation_db_per_km": config.egress_access.attenuation_db_per_km,
            },
        },
        "policy": policy,
        "sources": [_source_to_dict(s, config) for s in config.sources],
    }
