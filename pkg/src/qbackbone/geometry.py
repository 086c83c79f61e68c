"""Circular-orbit pass geometry and great-circle station distances.

A satellite pass is modelled as a circular orbit whose ground track is a
great circle, parameterised per ground station by the elevation and time
of closest approach.  Earth rotation and orbital eccentricity are
ignored; the model is periodic with the orbital period, so it is only
meaningful within a single pass around each configured peak time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

EARTH_RADIUS_KM = 6371.0
EARTH_MU_KM3_S2 = 398600.4418


def _clamp(x: float, lo: float = -1.0, hi: float = 1.0) -> float:
    return lo if x < lo else hi if x > hi else x


@dataclass(frozen=True)
class GroundStation:
    """A ground station at fixed geodetic coordinates on a spherical Earth."""

    name: str
    latitude_deg: float
    longitude_deg: float

    def __post_init__(self) -> None:
        if not -90.0 <= self.latitude_deg <= 90.0:
            raise ValueError(
                f"latitude_deg out of range [-90, 90] for {self.name!r}: {self.latitude_deg}"
            )
        if not -180.0 <= self.longitude_deg <= 180.0:
            raise ValueError(
                f"longitude_deg out of range [-180, 180] for {self.name!r}: {self.longitude_deg}"
            )


@dataclass(frozen=True)
class StationPass:
    """Closest approach of one pass as seen from a single station."""

    peak_elevation_deg: float
    peak_time_s: float

    def __post_init__(self) -> None:
        if not 0.0 < self.peak_elevation_deg <= 90.0:
            raise ValueError(
                f"peak_elevation_deg must be in (0, 90]: {self.peak_elevation_deg}"
            )
        if not math.isfinite(self.peak_time_s):
            raise ValueError(f"peak_time_s must be finite: {self.peak_time_s}")


@dataclass(frozen=True)
class SatellitePassModel:
    """One overhead pass of a circular-orbit satellite over a set of stations."""

    satellite_name: str
    altitude_km: float
    station_passes: Mapping[str, StationPass]
    earth_radius_km: float = EARTH_RADIUS_KM
    mu_km3_s2: float = EARTH_MU_KM3_S2

    def __post_init__(self) -> None:
        if not (math.isfinite(self.altitude_km) and self.altitude_km > 0.0):
            raise ValueError(f"altitude_km must be > 0: {self.altitude_km}")
        if not self.station_passes:
            raise ValueError("station_passes must contain at least one station")

    @property
    def orbit_radius_km(self) -> float:
        return self.earth_radius_km + self.altitude_km

    @property
    def angular_rate_rad_s(self) -> float:
        """Orbital angular rate of the circular orbit."""
        return math.sqrt(self.mu_km3_s2 / self.orbit_radius_km**3)


@dataclass(frozen=True)
class VisibilityWindow:
    """Closed time interval during which a pass satisfies an elevation mask."""

    start_s: float
    end_s: float

    def __post_init__(self) -> None:
        if self.start_s > self.end_s:
            raise ValueError(f"window start {self.start_s} after end {self.end_s}")

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


def _check_elevation_altitude(elevation_deg: float, altitude_km: float) -> None:
    if not (math.isfinite(elevation_deg) and 0.0 <= elevation_deg <= 90.0):
        raise ValueError(f"elevation_deg must be in [0, 90]: {elevation_deg}")
    if not (math.isfinite(altitude_km) and altitude_km > 0.0):
        raise ValueError(f"altitude_km must be > 0: {altitude_km}")


def slant_range_km(
    elevation_deg: float,
    altitude_km: float,
    earth_radius_km: float = EARTH_RADIUS_KM,
) -> float:
    """Line-of-sight distance from a station to a satellite.

    Parameters
    ----------
    elevation_deg : float
        Elevation of the satellite above the local horizon, in [0, 90].
    altitude_km : float
        Orbit altitude above the spherical Earth surface.
    earth_radius_km : float
        Earth radius used for the geometry.

    Returns
    -------
    float
        Slant range in kilometres, between ``altitude_km`` (zenith) and
        the horizon range.
    """
    _check_elevation_altitude(elevation_deg, altitude_km)
    re = earth_radius_km
    r = re + altitude_km
    el = math.radians(elevation_deg)
    return math.sqrt(r * r - (re * math.cos(el)) ** 2) - re * math.sin(el)


def central_angle_rad(
    elevation_deg: float,
    altitude_km: float,
    earth_radius_km: float = EARTH_RADIUS_KM,
) -> float:
    """Earth-central angle between a station and the sub-satellite point.

    Zero at zenith and strictly decreasing in elevation for a fixed
    altitude.
    """
    _check_elevation_altitude(elevation_deg, altitude_km)
    rho = earth_radius_km / (earth_radius_km + altitude_km)
    el = math.radians(elevation_deg)
    return math.acos(_clamp(rho * math.cos(el))) - el


def _elevation_deg_signed(
    t_s: float, pass_model: SatellitePassModel, station: StationPass
) -> float:
    """Elevation at time ``t_s``; negative values mean below the horizon."""
    gamma_min = central_angle_rad(
        station.peak_elevation_deg, pass_model.altitude_km, pass_model.earth_radius_km
    )
    omega = pass_model.angular_rate_rad_s
    cos_gamma = math.cos(gamma_min) * math.cos(omega * (t_s - station.peak_time_s))
    cos_gamma = _clamp(cos_gamma)
    gamma = math.acos(cos_gamma)
    if gamma < 1e-12:
        return 90.0
    rho = pass_model.earth_radius_km / pass_model.orbit_radius_km
    return math.degrees(math.atan((cos_gamma - rho) / math.sin(gamma)))


def elevation_at(
    t_s: float, pass_model: SatellitePassModel, station_name: str
) -> float | None:
    """Elevation in degrees at time ``t_s``, or None when below the horizon.

    The profile peaks at the station's configured peak elevation and time
    and is symmetric about the peak.
    """
    if not math.isfinite(t_s):
        raise ValueError(f"t_s must be finite: {t_s}")
    station = pass_model.station_passes[station_name]
    elevation = _elevation_deg_signed(t_s, pass_model, station)
    return elevation if elevation >= 0.0 else None


def _station_window(
    pass_model: SatellitePassModel, station: StationPass, min_elevation_deg: float
) -> VisibilityWindow | None:
    if min_elevation_deg > station.peak_elevation_deg:
        return None
    gamma_lim = central_angle_rad(
        min_elevation_deg, pass_model.altitude_km, pass_model.earth_radius_km
    )
    gamma_min = central_angle_rad(
        station.peak_elevation_deg, pass_model.altitude_km, pass_model.earth_radius_km
    )
    ratio = _clamp(math.cos(gamma_lim) / math.cos(gamma_min))
    half = math.acos(ratio) / pass_model.angular_rate_rad_s
    return VisibilityWindow(station.peak_time_s - half, station.peak_time_s + half)


def visibility_window(
    pass_model: SatellitePassModel,
    min_elevation_deg: float,
    station_names: tuple[str, ...] | None = None,
) -> VisibilityWindow | None:
    """Interval where the pass is above ``min_elevation_deg`` at every station.

    Returns None when the per-station windows do not intersect or the
    mask exceeds some station's peak elevation.
    """
    if not 0.0 < min_elevation_deg <= 90.0:
        raise ValueError(f"min_elevation_deg must be in (0, 90]: {min_elevation_deg}")
    names = station_names if station_names is not None else tuple(pass_model.station_passes)
    start = -math.inf
    end = math.inf
    for name in names:
        window = _station_window(pass_model, pass_model.station_passes[name], min_elevation_deg)
        if window is None:
            return None
        start = max(start, window.start_s)
        end = min(end, window.end_s)
    if start > end:
        return None
    return VisibilityWindow(start, end)


def ground_distance_km(
    a: GroundStation, b: GroundStation, earth_radius_km: float = EARTH_RADIUS_KM
) -> float:
    """Haversine great-circle distance between two stations."""
    phi_a = math.radians(a.latitude_deg)
    phi_b = math.radians(b.latitude_deg)
    d_phi = phi_b - phi_a
    d_lam = math.radians(b.longitude_deg - a.longitude_deg)
    h = (
        math.sin(d_phi / 2.0) ** 2
        + math.cos(phi_a) * math.cos(phi_b) * math.sin(d_lam / 2.0) ** 2
    )
    return 2.0 * earth_radius_km * math.asin(_clamp(math.sqrt(h)))
