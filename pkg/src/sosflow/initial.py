"""Initial-data factories for the CLI and the studies."""

from __future__ import annotations

import numpy as np

from .errors import NonMonotone, ValidationError
from .grid import GridSpec, HeightProfile, LogSlopeField, normalize_logslope, reconstruct


def linear_profile(spec: GridSpec) -> HeightProfile:
    """Uniform slope 1/L; the stationary state.  Node values are i/n - 1/2."""
    return HeightProfile(spec, np.arange(spec.n) / spec.n - 0.5)


def sine_profile(spec: GridSpec, amplitude: float, wavenumber: int = 1) -> HeightProfile:
    """Linear profile plus ``amplitude * sin(2 pi k x / L)``, projected."""
    if wavenumber < 1:
        raise ValidationError("wavenumber must be a positive integer", "initial")
    if abs(amplitude) * 2.0 * np.pi * wavenumber >= 1.0:
        raise NonMonotone(
            f"amplitude {amplitude:g} with wavenumber {wavenumber} destroys monotonicity"
        )
    x = spec.nodes()
    values = x / spec.length - 0.5 + amplitude * np.sin(2.0 * np.pi * wavenumber * x / spec.length)
    return HeightProfile.from_values(spec, values, project=True)


def kink_profile(
    spec: GridSpec, left_slope: float, right_slope: float, position: float
) -> HeightProfile:
    """Upward slope jump at ``position`` with a distributed return ramp.

    The log-slope jumps by ``ln(right/left)`` at one node and relaxes
    linearly back over the remainder of the period, so the compensating
    negative curvature is spread out instead of concentrated (a concentrated
    negative part would make the state infeasible for the functional).  The
    field is then normalized, which rescales the slopes by a common factor
    but leaves the concentrated mass at exactly ``ln(right/left)``.
    """
    if not (0.0 < left_slope < right_slope):
        raise ValidationError("need 0 < left_slope < right_slope", "initial")
    if not (0.0 <= position < spec.length):
        raise ValidationError("kink position must lie in [0, L)", "initial")
    n = spec.n
    j0 = int(round(position / spec.dx)) % n
    ramp = np.log(right_slope) + np.arange(n) / (n - 1) * (
        np.log(left_slope) - np.log(right_slope)
    )
    w = np.empty(n)
    w[(j0 + np.arange(n)) % n] = ramp
    return reconstruct(LogSlopeField(spec, normalize_logslope(spec, w)))


def profile_from_csv(spec: GridSpec, path) -> HeightProfile:
    """Resample two-column ``x,h`` data onto the grid by monotone interpolation."""
    from .io import read_profile_csv

    x, h = read_profile_csv(path)
    if np.any(np.diff(x) <= 0.0) or x[0] < 0.0 or x[-1] >= spec.length:
        raise ValidationError("file abscissae must be strictly increasing in [0, L)", "initial")
    if np.any(np.diff(np.append(h, h[0] + 1.0)) <= 0.0):
        raise NonMonotone("file heights are not monotone under the periodic offset")
    x_ext = np.concatenate([x - spec.length, x, x + spec.length])
    h_ext = np.concatenate([h - 1.0, h, h + 1.0])
    values = np.interp(spec.nodes(), x_ext, h_ext)
    return HeightProfile.from_values(spec, values, project=True)
