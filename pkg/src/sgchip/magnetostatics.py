"""Magnetic fields of the wire assemblies.

Three conductor models are implemented:

* RECT_X -- x-parallel wire of square cross-section w x w, infinitely
  long. The field is the double integral of the thin-wire kernel over
  the cross-section with uniform current density J = I/w^2. Two
  evaluators exist: fixed-order Gauss-Legendre quadrature with a
  refinement check (``field_rect_wire``), and the exact antiderivative
  of the same integral (``rect_wire_field_exact``), which is what the
  quadrature converges to and is cheap enough for trajectory work.
* THIN_FINITE_Z -- z-parallel line current of finite length 2l with the
  closed-form end-correction bracket.
* THIN_INFINITE -- textbook 1/R line current, kept for analytic
  cross-checks of the quadrupole gradients.

All evaluators are pure functions of (point, wires); grids and sweeps
may therefore be evaluated in parallel without shared state.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from .constants import DEFAULT_CONSTANTS, PhysicalConstants
from .errors import (InsideConductorError, OnAxisSingularityError,
                     QuadratureConvergenceError)
from .model import ChipConfig, StageSpec, WireModel, WireSegment, \
    build_levitation_assembly, build_separation_assembly


# ---------------------------------------------------------------------------
# elementary kernels

def _thin_kernel(du, dv, pref):
    """(B_u, B_v) of a line current: pref * (-dv, du) / (du^2 + dv^2).

    With pref = mu0 I / 2pi and (du, dv) the transverse displacement from
    the wire, this is the standard 1/R field, components ordered so that
    for an x-parallel wire (du, dv) = (y-y_k, z-z_k) gives (B_y, B_z).
    """
    r2 = du * du + dv * dv
    return -pref * dv / r2, pref * du / r2


@lru_cache(maxsize=8)
def _gauss_legendre(order: int):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return nodes, weights


# ---------------------------------------------------------------------------
# rectangular cross-section, axis || x

def _require_outside_rect(y, z, wire: WireSegment):
    hw = wire.half_width
    dy = np.abs(np.asarray(y) - wire.center[0])
    dz = np.abs(np.asarray(z) - wire.center[1])
    if np.any(np.maximum(dy, dz) <= hw):
        raise InsideConductorError(
            f"field point inside rectangular conductor at {wire.center}")


def field_rect_wire(point, wire: WireSegment, order: int = 32,
                    check: bool = True, tol: float = 1e-6,
                    constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """(B_y, B_z) of one rectangular wire by tensor-product Gauss-Legendre
    quadrature of the thin-wire kernels over the cross-section.

    ``point`` is (x, y, z) or (y, z); x is ignored (the wire is long).
    When ``check`` is set the result is compared against a grid of twice
    the order and must agree to ``tol`` relative.
    """
    point = np.asarray(point, dtype=float)
    y, z = (point[1], point[2]) if point.shape[-1] == 3 else (point[0], point[1])
    _require_outside_rect(y, z, wire)

    def evaluate(n):
        nodes, weights = _gauss_legendre(n)
        hw = wire.half_width
        J = wire.current / (2 * hw) ** 2
        ys = wire.center[0] + hw * nodes
        zs = wire.center[1] + hw * nodes
        wq = hw * weights
        dy = y - ys[:, None]
        dz = z - zs[None, :]
        r2 = dy * dy + dz * dz
        ww = wq[:, None] * wq[None, :]
        pref = constants.mu0 * J / (2 * np.pi)
        by = -pref * np.sum(ww * dz / r2)
        bz = pref * np.sum(ww * dy / r2)
        return np.array([by, bz])

    coarse = evaluate(order)
    if check:
        fine = evaluate(2 * order)
        scale = max(float(np.hypot(*fine)),
                    constants.mu0 * abs(wire.current) / (2 * np.pi * 2 * wire.half_width) * 1e-9)
        if float(np.hypot(*(fine - coarse))) > tol * scale:
            raise QuadratureConvergenceError(
                f"rect-wire quadrature not converged at order {order} "
                f"(point ({y:.3e}, {z:.3e}), wire centre {wire.center})")
        return fine[0], fine[1]
    return coarse[0], coarse[1]


def _rect_antiderivative(u, v):
    """F(u, v) = v*atan(u/v) + (u/2)*ln(u^2 + v^2), the antiderivative of
    v/(u^2+v^2) in both variables.

    The v = 0 and u = 0 limits fall out of IEEE arithmetic (0 * atan(inf)
    and 0 * log agree with the analytic limits); only the corner u = v = 0
    yields nan, and that point is conductor interior, which the caller
    masks or rejects.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        return v * np.arctan(u / v) + 0.5 * u * np.log(u * u + v * v)


def rect_wire_field_exact(y, z, wire: WireSegment,
                          constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """(B_y, B_z) of one rectangular wire from the exact corner-difference
    antiderivative of the cross-section integral. Vectorised over y, z."""
    hw = wire.half_width
    J = wire.current / (2 * hw) ** 2
    pref = constants.mu0 * J / (2 * np.pi)
    u1 = y - (wire.center[0] - hw)   # u decreasing in source coordinate
    u2 = y - (wire.center[0] + hw)
    v1 = z - (wire.center[1] - hw)
    v2 = z - (wire.center[1] + hw)
    F = _rect_antiderivative
    gy = F(u1, v1) - F(u2, v1) - F(u1, v2) + F(u2, v2)
    gz = F(v1, u1) - F(v2, u1) - F(v1, u2) + F(v2, u2)
    return -pref * gy, pref * gz


# ---------------------------------------------------------------------------
# thin finite wire, axis || z

def _finite_bracket(z, R2, l):
    """End-correction [(z+zs)/sqrt((z+zs)^2+R^2)] from zs=-l to +l."""
    zp = z + l
    zm = z - l
    return zp / np.sqrt(zp * zp + R2) - zm / np.sqrt(zm * zm + R2)


def field_thin_finite_wire(point, wire: WireSegment,
                           constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """(B_x, B_y) of one finite z-parallel thin wire at (x_k, y_k)."""
    point = np.asarray(point, dtype=float)
    x, y, z = point
    dx = x - wire.center[0]
    dy = y - wire.center[1]
    R2 = dx * dx + dy * dy
    if R2 == 0.0:
        raise OnAxisSingularityError(
            f"field point on the axis of the wire at {wire.center}")
    pref = constants.mu0 * wire.current / (4 * np.pi)
    bracket = _finite_bracket(z, R2, wire.half_length)
    return -pref * dy / R2 * bracket, pref * dx / R2 * bracket


def field_thin_infinite(point, wire: WireSegment,
                        constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """Transverse field components of an infinitely long thin wire.

    axis 'x': returns (B_y, B_z) at transverse displacement
    (y-y_k, z-z_k); axis 'z': returns (B_x, B_y) at (x-x_k, y-y_k).
    """
    point = np.asarray(point, dtype=float)
    if wire.axis == "x":
        du, dv = point[1] - wire.center[0], point[2] - wire.center[1]
    else:
        du, dv = point[0] - wire.center[0], point[1] - wire.center[1]
    if du == 0.0 and dv == 0.0:
        raise OnAxisSingularityError(
            f"field point on the axis of the wire at {wire.center}")
    pref = constants.mu0 * wire.current / (2 * np.pi)
    return _thin_kernel(du, dv, pref)


# ---------------------------------------------------------------------------
# composed device field

class FieldModel:
    """Total field: levitation assembly + separation assembly + bias B0 e_x.

    ``rect_method`` selects the rectangular-wire evaluator: "exact"
    (corner antiderivative, default) or "quadrature" (Gauss-Legendre of
    ``quad_order``); the two agree to machine precision at any exterior
    point with a healthy gap, which the test suite pins down. Wire
    parameters are stacked into arrays once so batch evaluation stays
    cheap on the trajectory hot path.
    """

    def __init__(self, levitation: Tuple[WireSegment, ...],
                 separation: Tuple[WireSegment, ...], B0: float,
                 constants: PhysicalConstants = DEFAULT_CONSTANTS,
                 rect_method: str = "exact", quad_order: int = 32):
        if rect_method not in ("exact", "quadrature"):
            raise ValueError("rect_method must be 'exact' or 'quadrature'")
        self.levitation = tuple(levitation)
        self.separation = tuple(separation)
        self.B0 = B0
        self.constants = constants
        self.rect_method = rect_method
        self.quad_order = quad_order

        rect = [w for w in self.levitation if w.model is WireModel.RECT_X]
        thin = [w for w in self.levitation
                if w.model is WireModel.THIN_INFINITE and w.axis == "x"]
        if len(rect) + len(thin) != len(self.levitation):
            raise ValueError("levitation wires must be RECT_X or THIN_INFINITE x")
        self._rect_yc = np.array([w.center[0] for w in rect])
        self._rect_zc = np.array([w.center[1] for w in rect])
        self._rect_hw = np.array([w.half_width for w in rect])
        self._rect_pref = np.array([
            constants.mu0 * (w.current / (2 * w.half_width) ** 2) / (2 * np.pi)
            for w in rect])
        self._thin_yc = np.array([w.center[0] for w in thin])
        self._thin_zc = np.array([w.center[1] for w in thin])
        self._thin_pref = np.array([constants.mu0 * w.current / (2 * np.pi)
                                    for w in thin])

        fin = [w for w in self.separation if w.model is WireModel.THIN_FINITE_Z]
        inf_z = [w for w in self.separation
                 if w.model is WireModel.THIN_INFINITE and w.axis == "z"]
        if len(fin) + len(inf_z) != len(self.separation):
            raise ValueError("separation wires must be THIN_FINITE_Z or THIN_INFINITE z")
        self._sep_xc = np.array([w.center[0] for w in fin + inf_z])
        self._sep_yc = np.array([w.center[1] for w in fin + inf_z])
        self._sep_pref = np.array([constants.mu0 * w.current / (4 * np.pi)
                                   for w in fin + inf_z])
        self._sep_l = np.array([w.half_length for w in fin]
                               + [np.inf for _ in inf_z])
        self._sep_all_finite = bool(np.all(np.isfinite(self._sep_l)))

    def _rect_field(self, y, z):
        """(sum B_y, sum B_z, inside mask) of the rectangular wires at
        points (N,)."""
        hw = self._rect_hw[None, :]
        u1 = y[:, None] - (self._rect_yc[None, :] - hw)
        u2 = y[:, None] - (self._rect_yc[None, :] + hw)
        v1 = z[:, None] - (self._rect_zc[None, :] - hw)
        v2 = z[:, None] - (self._rect_zc[None, :] + hw)
        inside = np.any((u1 * u2 <= 0.0) & (v1 * v2 <= 0.0), axis=1)
        F = _rect_antiderivative
        gy = F(u1, v1) - F(u2, v1) - F(u1, v2) + F(u2, v2)
        gz = F(v1, u1) - F(v2, u1) - F(v1, u2) + F(v2, u2)
        pref = self._rect_pref[None, :]
        return -np.sum(pref * gy, axis=1), np.sum(pref * gz, axis=1), inside

    def _rect_field_quadrature(self, y, z):
        rect = [w for w in self.levitation if w.model is WireModel.RECT_X]
        by = np.zeros(len(y))
        bz = np.zeros(len(y))
        for wire in rect:
            for i in range(len(y)):
                b = field_rect_wire((y[i], z[i]), wire, order=self.quad_order,
                                    check=False, constants=self.constants)
                by[i] += b[0]
                bz[i] += b[1]
        return by, bz

    def evaluate(self, points: np.ndarray, on_interior: str = "raise") -> np.ndarray:
        """Field at one point (3,) or a batch (N, 3). ``on_interior`` is
        "raise" or "nan" (mask conductor-interior points)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
        B = np.empty_like(pts)
        inside = np.zeros(len(pts), dtype=bool)

        lev_y = np.zeros(len(pts))
        lev_z = np.zeros(len(pts))
        if len(self._rect_yc):
            if self.rect_method == "exact":
                ry, rz, ins = self._rect_field(y, z)
            else:
                ry, rz = self._rect_field_quadrature(y, z)
                dy = np.abs(y[:, None] - self._rect_yc[None, :])
                dz = np.abs(z[:, None] - self._rect_zc[None, :])
                ins = np.any(np.maximum(dy, dz) <= self._rect_hw[None, :], axis=1)
            lev_y += ry
            lev_z += rz
            inside |= ins
        if len(self._thin_yc):
            du = y[:, None] - self._thin_yc[None, :]
            dv = z[:, None] - self._thin_zc[None, :]
            r2 = du * du + dv * dv
            inside |= np.any(r2 == 0.0, axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                lev_y += np.sum(-self._thin_pref[None, :] * dv / r2, axis=1)
                lev_z += np.sum(self._thin_pref[None, :] * du / r2, axis=1)

        sep_x = np.zeros(len(pts))
        sep_y = np.zeros(len(pts))
        if len(self._sep_xc):
            du = x[:, None] - self._sep_xc[None, :]
            dv = y[:, None] - self._sep_yc[None, :]
            r2 = du * du + dv * dv
            inside |= np.any(r2 == 0.0, axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                if self._sep_all_finite:
                    l = self._sep_l[None, :]
                    zp = z[:, None] + l
                    zm = z[:, None] - l
                    bracket = zp / np.sqrt(zp * zp + r2) - zm / np.sqrt(zm * zm + r2)
                else:
                    l = self._sep_l[None, :]
                    finite = np.isfinite(l)
                    zp = z[:, None] + np.where(finite, l, 0.0)
                    zm = z[:, None] - np.where(finite, l, 0.0)
                    bracket = np.where(
                        finite,
                        zp / np.sqrt(zp * zp + r2) - zm / np.sqrt(zm * zm + r2),
                        2.0)
                kern = self._sep_pref[None, :] * bracket / r2
                sep_x = np.sum(-kern * dv, axis=1)
                sep_y = np.sum(kern * du, axis=1)

        B[:, 0] = sep_x + self.B0
        B[:, 1] = lev_y + sep_y
        B[:, 2] = lev_z

        if np.any(inside):
            if on_interior == "raise":
                idx = int(np.argmax(inside))
                raise InsideConductorError(
                    f"field point {pts[idx]} inside a conductor")
            B[inside] = np.nan
        return B[0] if np.asarray(points).ndim == 1 else B


@dataclass(frozen=True)
class LinearFieldModel:
    """Ideal linear stand-in: B = (B0 + eta_S x, -(eta_L + eta_S) y, eta_L z)."""

    eta_L: float
    eta_S: float
    B0: float
    constants: PhysicalConstants = DEFAULT_CONSTANTS

    def evaluate(self, points: np.ndarray, on_interior: str = "raise") -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        B = np.empty_like(pts)
        B[:, 0] = self.B0 + self.eta_S * pts[:, 0]
        B[:, 1] = -(self.eta_L + self.eta_S) * pts[:, 1]
        B[:, 2] = self.eta_L * pts[:, 2]
        return B[0] if np.asarray(points).ndim == 1 else B


def device_field_model(config: ChipConfig, stage: StageSpec,
                       constants: PhysicalConstants = DEFAULT_CONSTANTS,
                       rect_method: str = "exact",
                       current_override: Optional[float] = None) -> FieldModel:
    """FieldModel of the physical chip for one protocol stage."""
    if current_override is not None:
        stage = StageSpec(stage.eta_sign, current_override, stage.end_rule,
                          stage.duration)
    return FieldModel(
        levitation=build_levitation_assembly(config),
        separation=build_separation_assembly(config, stage),
        B0=config.B0,
        constants=constants,
        rect_method=rect_method,
    )


def total_field(point, model) -> np.ndarray:
    """B at one point, as a length-3 array."""
    return model.evaluate(np.asarray(point, dtype=float))


def field_jacobian(point, model, step: float = 1e-8,
                   richardson_check: bool = False,
                   richardson_tol: float = 1e-3) -> np.ndarray:
    """Central-difference Jacobian J[i, j] = dB_i/dx_j (T/m).

    With ``richardson_check`` the stencil is repeated at half step and
    the two estimates must agree to ``richardson_tol`` relative.
    """
    point = np.asarray(point, dtype=float)

    def estimate(h):
        stencil = np.repeat(point[None, :], 6, axis=0)
        for j in range(3):
            stencil[2 * j, j] += h
            stencil[2 * j + 1, j] -= h
        B = model.evaluate(stencil)
        return np.stack([(B[2 * j] - B[2 * j + 1]) / (2 * h) for j in range(3)], axis=1)

    J = estimate(step)
    if richardson_check:
        J2 = estimate(step / 2)
        scale = max(float(np.max(np.abs(J2))), 1e-300)
        if float(np.max(np.abs(J2 - J))) > richardson_tol * scale:
            raise QuadratureConvergenceError(
                f"Jacobian stencil not converged at step {step:g}")
        return J2
    return J


# ---------------------------------------------------------------------------
# analytic central-gradient formulas (thin-wire estimates)

def eta_L_thin(a: float, b: float, I_L: float,
               constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Central gradient dB_z/dz of the four-thin-wire levitation quadrupole:
    (4 mu0 I_L / pi) * a b / (a^2 + b^2)^2."""
    if a <= 0 or b <= 0:
        raise ValueError("spacings must be positive")
    return 4 * constants.mu0 * I_L / np.pi * a * b / (a * a + b * b) ** 2


def eta_S_thin(L: float, I: float,
               constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Magnitude of the central gradient dB_x/dx of the separation
    quadrupole in the long-wire limit: mu0 I / (pi L^2). Estimate only;
    the trajectory code extracts the gradient from the composed field."""
    if L <= 0:
        raise ValueError("L must be positive")
    return constants.mu0 * I / (np.pi * L * L)


# ---------------------------------------------------------------------------
# grid maps

@dataclass(frozen=True)
class FieldMap:
    """Row-major grid of field samples on a coordinate plane."""

    points: np.ndarray    # (n*n, 3)
    B: np.ndarray         # (n*n, 3), nan rows are conductor interior
    shape: Tuple[int, int]

    @property
    def norm(self) -> np.ndarray:
        return np.sqrt(np.sum(self.B * self.B, axis=1))

    def write_csv(self, path) -> str:
        from .csvio import write_rows
        rows = np.column_stack([self.points, self.B, self.norm])
        return write_rows(path, "x_m,y_m,z_m,Bx_T,By_T,Bz_T,Bnorm_T", rows)


def field_map(plane: str, offset: float, extent: float, resolution: int,
              model) -> FieldMap:
    """Sample |B| and components on a square window of half-width
    ``extent`` centred on the device axis.

    plane "yz": slice at x = offset, grid over (y, z);
    plane "xy": slice at z = offset, grid over (x, y).
    Rows iterate the first grid coordinate, columns the second
    (row-major). Conductor-interior points carry nan fields.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    u = np.linspace(-extent, extent, resolution)
    v = np.linspace(-extent, extent, resolution)
    U, V = np.meshgrid(u, v, indexing="ij")
    pts = np.empty((resolution * resolution, 3))
    if plane == "yz":
        pts[:, 0] = offset
        pts[:, 1] = U.ravel()
        pts[:, 2] = V.ravel()
    elif plane == "xy":
        pts[:, 0] = U.ravel()
        pts[:, 1] = V.ravel()
        pts[:, 2] = offset
    else:
        raise ValueError("plane must be 'yz' or 'xy'")
    B = model.evaluate(pts, on_interior="nan")
    return FieldMap(points=pts, B=B, shape=(resolution, resolution))


__all__ = [
    "field_rect_wire", "rect_wire_field_exact", "field_thin_finite_wire",
    "field_thin_infinite", "FieldModel", "LinearFieldModel",
    "device_field_model", "total_field", "field_jacobian",
    "eta_L_thin", "eta_S_thin", "FieldMap", "field_map",
]
