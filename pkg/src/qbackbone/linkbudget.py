"""Per-photon transmittance of fiber links and satellite downlinks.

The free-space model combines four factors: geometric collection of a
diffraction-limited Gaussian beam by the receiver aperture, zenith
atmospheric transmittance scaled by a secant air-mass term, a fixed
pointing loss, and a fixed system efficiency.  Service is gated at a
minimum elevation below which the transmittance is exactly zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import (
    EARTH_RADIUS_KM,
    SatellitePassModel,
    VisibilityWindow,
    elevation_at,
    slant_range_km,
    visibility_window,
)


@dataclass(frozen=True)
class FiberLink:
    """A fiber span with a constant attenuation coefficient."""

    length_km: float
    attenuation_db_per_km: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.length_km) and self.length_km >= 0.0):
            raise ValueError(f"length_km must be >= 0: {self.length_km}")
        if not (
            math.isfinite(self.attenuation_db_per_km)
            and self.attenuation_db_per_km >= 0.0
        ):
            raise ValueError(
                f"attenuation_db_per_km must be >= 0: {self.attenuation_db_per_km}"
            )

    @property
    def loss_db(self) -> float:
        return self.length_km * self.attenuation_db_per_km


@dataclass(frozen=True)
class FreeSpaceLinkParams:
    """Calibration parameters of the satellite downlink model."""

    divergence_half_angle_rad: float = 2.0e-6
    receiver_aperture_diameter_m: float = 1.0
    zenith_atmospheric_transmittance: float = 0.5
    pointing_loss_db: float = 1.0
    system_efficiency: float = 0.5
    min_elevation_deg: float = 20.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.divergence_half_angle_rad) and self.divergence_half_angle_rad > 0.0):
            raise ValueError("divergence_half_angle_rad must be > 0")
        if not (math.isfinite(self.receiver_aperture_diameter_m) and self.receiver_aperture_diameter_m > 0.0):
            raise ValueError("receiver_aperture_diameter_m must be > 0")
        if not 0.0 < self.zenith_atmospheric_transmittance <= 1.0:
            raise ValueError("zenith_atmospheric_transmittance must be in (0, 1]")
        if not (math.isfinite(self.pointing_loss_db) and self.pointing_loss_db >= 0.0):
            raise ValueError("pointing_loss_db must be >= 0")
        if not 0.0 < self.system_efficiency <= 1.0:
            raise ValueError("system_efficiency must be in (0, 1]")
        if not 0.0 <= self.min_elevation_deg < 90.0:
            raise ValueError("min_elevation_deg must be in [0, 90)")


@dataclass(frozen=True)
class AttenuationSample:
    """One time step of a two-station downlink attenuation profile.

    Station `a` is the egress side, station `b` the ingress side.  The
    elevation and range are NaN when the satellite is below the horizon.
    """

    time_s: float
    elevation_a_deg: float
    elevation_b_deg: float
    range_a_km: float
    range_b_km: float
    eta_a: float
    eta_b: float

    @property
    def coincidence_probability(self) -> float:
        return self.eta_a * self.eta_b


def fiber_transmittance(link: FiberLink) -> float:
    """Per-photon survival probability of a fiber span."""
    return 10.0 ** (-link.loss_db / 10.0)


def freespace_transmittance(
    elevation_deg: float,
    altitude_km: float,
    params: FreeSpaceLinkParams,
    earth_radius_km: float = EARTH_RADIUS_KM,
) -> float:
    """Per-photon survival probability of the satellite downlink.

    Parameters
    ----------
    elevation_deg : float
        Satellite elevation; anything below ``params.min_elevation_deg``
        (including negative, below-horizon values) yields 0.
    altitude_km : float
        Orbit altitude.
    params : FreeSpaceLinkParams
        Model calibration.

    Returns
    -------
    float
        Transmittance in [0, 1), monotone non-decreasing in elevation
        and non-increasing in altitude.
    """
    if not (math.isfinite(elevation_deg) and elevation_deg <= 90.0):
        raise ValueError(f"elevation_deg must be finite and <= 90: {elevation_deg}")
    if not (math.isfinite(altitude_km) and altitude_km > 0.0):
        raise ValueError(f"altitude_km must be > 0: {altitude_km}")
    if elevation_deg < params.min_elevation_deg:
        return 0.0
    range_m = 1000.0 * slant_range_km(elevation_deg, altitude_km, earth_radius_km)
    beam_radius_m = params.divergence_half_angle_rad * range_m
    eta_geo = 1.0 - math.exp(
        -(params.receiver_aperture_diameter_m**2) / (2.0 * beam_radius_m**2)
    )
    eta_atm = params.zenith_atmospheric_transmittance ** (
        1.0 / math.sin(math.radians(elevation_deg))
    )
    eta_point = 10.0 ** (-params.pointing_loss_db / 10.0)
    return params.system_efficiency * eta_point * eta_atm * eta_geo


def pair_coincidence_probability(eta_a: float, eta_b: float) -> float:
    """Probability that both photons of a pair survive their own arm."""
    if not 0.0 <= eta_a <= 1.0:
        raise ValueError(f"eta_a must be in [0, 1]: {eta_a}")
    if not 0.0 <= eta_b <= 1.0:
        raise ValueError(f"eta_b must be in [0, 1]: {eta_b}")
    return eta_a * eta_b


def attenuation_profile(
    pass_model: SatellitePassModel,
    station_names: tuple[str, str],
    params: FreeSpaceLinkParams,
    step_s: float = 2.0,
    window: VisibilityWindow | None = None,
) -> list[AttenuationSample]:
    """Time-discretised downlink profile over a visibility window.

    Samples are taken every ``step_s`` seconds from the window start,
    endpoints included.  When ``window`` is None the joint visibility
    window above ``params.min_elevation_deg`` is used; an empty window
    yields an empty profile.
    """
    if not (math.isfinite(step_s) and step_s > 0.0):
        raise ValueError(f"step_s must be > 0: {step_s}")
    if window is None:
        window = visibility_window(pass_model, params.min_elevation_deg, station_names)
        if window is None:
            return []
    name_a, name_b = station_names
    samples: list[AttenuationSample] = []
    n_steps = int(math.floor(window.duration_s / step_s + 1e-9))
    for k in range(n_steps + 1):
        t = window.start_s + k * step_s
        per_station = []
        for name in (name_a, name_b):
            elevation = elevation_at(t, pass_model, name)
            if elevation is None:
                per_station.append((math.nan, math.nan, 0.0))
            else:
                rng_km = slant_range_km(
                    elevation, pass_model.altitude_km, pass_model.earth_radius_km
                )
                eta = freespace_transmittance(
                    elevation, pass_model.altitude_km, params, pass_model.earth_radius_km
                )
                per_station.append((elevation, rng_km, eta))
        (el_a, rng_a, eta_a), (el_b, rng_b, eta_b) = per_station
        samples.append(AttenuationSample(t, el_a, el_b, rng_a, rng_b, eta_a, eta_b))
    return samples
