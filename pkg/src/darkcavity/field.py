"""Quasistatic field of a conducting sphere above a conducting plane.

The sphere has unit radius and its center sits at height z0 > 1. The field on the
plane is built from the infinite image-charge sequence inside the sphere and its
mirror in the plane. Everything returned here is dimensionless; physical scale
enters only through ``rabi_profile``.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

DEFAULT_TERMS = 20


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class SphereGeometry:
    z0: float  # center height / radius
    R: float = 10.0  # nm, only for dimensional output

    def __post_init__(self):
        if not self.z0 > 1:
            raise GeometryError(f"sphere must lie above the plane: z0={self.z0} <= 1")
        if not self.R > 0:
            raise GeometryError("radius must be positive")

    @property
    def alpha(self) -> float:
        z0 = self.z0
        return float(np.log(z0 + np.sqrt(z0 * z0 - 1.0)))

    @property
    def z_inf(self) -> float:
        return float(np.sqrt(self.z0 ** 2 - 1.0))


@dataclass(frozen=True)
class ImageChargeSet:
    q: np.ndarray
    z: np.ndarray

    @property
    def total_charge(self) -> float:
        return float(self.q.sum())

    @property
    def centroid(self) -> float:
        return float((self.q * self.z).sum() / self.q.sum())


class Approx(str, Enum):
    series = "series"
    point = "point"
    line = "line"


def image_charges(geom: SphereGeometry, n_terms: int = DEFAULT_TERMS) -> ImageChargeSet:
    """q_n = sinh a / sinh(a(n+1)), z_n = sinh a / tanh(a(n+1)), n = 0..n_terms-1."""
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    a = geom.alpha
    x = a * np.arange(1, n_terms + 1)
    # written with e^{-x} so that large a*n never overflows
    em = np.exp(-x)
    one_minus = -np.expm1(-2 * x)
    sh = geom.z_inf  # = sinh(a)
    q = 2 * sh * em / one_minus
    z = sh + 2 * sh * em * em / one_minus  # z_inf plus a positive gap
    q[0] = 1.0
    z[0] = geom.z0
    return ImageChargeSet(q, z)


def recursion_residuals(charges: ImageChargeSet, z0: float) -> tuple[float, float]:
    """Max residuals of the two difference equations the images satisfy."""
    q, z = charges.q, charges.z
    r_z = np.abs((z0 - z[1:]) * (z0 + z[:-1]) - 1.0)
    inv = 1.0 / q
    lhs = inv[:-2] + inv[2:]
    rhs = 2 * z0 * inv[1:-1]
    r_q = np.abs(lhs - rhs) / np.abs(rhs)
    return (float(r_z.max(initial=0.0)), float(r_q.max(initial=0.0)))


def _rho(rho):
    return np.asarray(rho, dtype=float)


def field_series(geom: SphereGeometry, rho, n_terms: int = DEFAULT_TERMS):
    """Sum of the image-pair fields on the plane, truncated at n_terms pairs."""
    ch = image_charges(geom, n_terms)
    r = _rho(rho)
    r2 = r[..., None] ** 2
    out = (ch.q * ch.z * (r2 + ch.z ** 2) ** -1.5).sum(axis=-1)
    return out if out.ndim else float(out)


def field_point_approx(geom: SphereGeometry, rho, n_terms: int = DEFAULT_TERMS):
    """All images lumped into one charge at their centroid."""
    ch = image_charges(geom, n_terms)
    Q, Z = ch.total_charge, ch.centroid
    out = Q * Z * (_rho(rho) ** 2 + Z * Z) ** -1.5
    return out if np.ndim(out) else float(out)


def field_line_approx(geom: SphereGeometry, rho, n_terms: int = DEFAULT_TERMS):
    """Image charge spread uniformly on the segment [z_inf, z0]."""
    ch = image_charges(geom, n_terms)
    z0 = geom.z0
    r2 = _rho(rho) ** 2
    lam = ch.total_charge / (z0 - geom.z_inf)
    out = lam * ((r2 + z0 * z0 - 1.0) ** -0.5 - (r2 + z0 * z0) ** -0.5)
    return out if np.ndim(out) else float(out)


_FIELDS = {
    Approx.series: field_series,
    Approx.point: field_point_approx,
    Approx.line: field_line_approx,
}


def field(geom: SphereGeometry, rho, approx: Approx | str = Approx.series,
          n_terms: int = DEFAULT_TERMS):
    return _FIELDS[Approx(approx)](geom, rho, n_terms)


def shifted_height(z0: float) -> float:
    """Height at which the line model best mimics the point model at z0.

    Moves the center by half the gap between z0 and the image accumulation point.
    """
    return z0 + (z0 - np.sqrt(z0 * z0 - 1.0)) / 2


def rabi_profile(geom: SphereGeometry, approx: Approx | str, peak_rabi: float, rho,
                 n_terms: int = DEFAULT_TERMS) -> np.ndarray:
    """Rabi frequencies (meV) scaled so that Omega(rho=0) = peak_rabi."""
    if not peak_rabi > 0:
        raise ValueError("peak Rabi frequency must be positive")
    r = np.atleast_1d(_rho(rho))
    if r.size == 0:
        return np.zeros(0)
    e = np.atleast_1d(field(geom, r, approx, n_terms))
    e0 = field(geom, 0.0, approx, n_terms)
    return peak_rabi * e / e0
