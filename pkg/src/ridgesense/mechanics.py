"""Lumped-parameter scan dynamics for the magnet-elastomer sensor.

A rigid tip (flat, ridged, or spherically curved with ridges) rides the
kinematic contact envelope of a surface profile while translating at constant
velocity. The embedded magnet is suspended on three uncoupled spring-mass-
damper DOFs (z, x, rotation) driven by the envelope; fixed-step RK4 keeps the
trajectories deterministic.

Units: lateral mm, heights/displacements um, rotation mrad, time s.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import lfilter

from .surface import SurfaceProfile

PSI_TO_PA = 6894.757293168
MAGNET_DENSITY = 7500.0  # kg/m^3, sintered NdFeB
TILT_CLAMP_MRAD = 100.0


class PatchOutsideSurfaceError(ValueError):
    pass


class SimulationDivergedError(RuntimeError):
    def __init__(self, t_s):
        super().__init__(f"integration produced non-finite state at t = {t_s:.6f} s")
        self.t_s = t_s


@dataclass(frozen=True)
class TipGeometry:
    kind: str  # flat | flat-ridged | spherical-ridged
    contact_width_mm: float
    ridge_depth_um: float = 0.0
    ridge_width_um: float = 0.0
    ridge_wavelength_um: float = 0.0
    sphere_radius_mm: float = 0.0
    # fraction of the nominal ridge width forming the flat crest plateau;
    # the remainder is split between the two linear flanks
    crest_plateau_fraction: float = 0.25

    def __post_init__(self):
        if self.kind not in ("flat", "flat-ridged", "spherical-ridged"):
            raise ValueError(f"unknown tip kind {self.kind!r}")
        if self.contact_width_mm <= 0:
            raise ValueError("contact width must be positive")
        if self.ridged:
            if not self.ridge_wavelength_um > self.ridge_width_um > 0:
                raise ValueError("need ridge_wavelength > ridge_width > 0")
            if self.ridge_depth_um <= 0:
                raise ValueError("ridge depth must be positive")
            if not 0.0 < self.crest_plateau_fraction < 1.0:
                raise ValueError("crest plateau fraction must be in (0, 1)")
        if self.kind == "spherical-ridged" and self.sphere_radius_mm <= 0:
            raise ValueError("spherical tip needs a positive sphere radius")

    @property
    def ridged(self) -> bool:
        return self.kind in ("flat-ridged", "spherical-ridged")


@dataclass(frozen=True)
class ElastomerStack:
    epidermis_thickness_mm: float
    dermis_thickness_mm: float
    epidermis_modulus_psi: float
    dermis_modulus_psi: float

    def __post_init__(self):
        for v in (
            self.epidermis_thickness_mm,
            self.dermis_thickness_mm,
            self.epidermis_modulus_psi,
            self.dermis_modulus_psi,
        ):
            if v <= 0:
                raise ValueError("stack thicknesses and moduli must be positive")


# Default stack: 2 mm stiff epidermis over 3 mm soft dermis.
DEFAULT_STACK = ElastomerStack(2.0, 3.0, 96.0, 8.0)


@dataclass(frozen=True)
class LumpedModelParams:
    """Declared constants of the FEM-replacement model, not hidden magic."""

    bearing_shape_factor: float = 4.0  # confinement of the magnet footprint
    lateral_stiffness_ratio: float = 3.0  # k_x = k_z / ratio
    damping_ratio: float = 0.1
    friction_coefficient: float = 0.5  # tangential drive coupling
    elastomer_mass_participation: float = 0.3


@dataclass(frozen=True)
class SuspensionParams:
    k_x: float  # N/m
    k_z: float  # N/m
    k_theta: float  # N*m/rad
    m_eff: float  # kg
    zeta: float


@dataclass(frozen=True)
class ScanConfig:
    velocity_mm_s: float
    direction: int = +1  # +1 or -1 along x
    preload_depth_um: float = 50.0
    duration_s: float = 1.0
    sim_rate_hz: float = 20000.0
    output_rate_hz: float = 5000.0

    def __post_init__(self):
        if self.velocity_mm_s <= 0:
            raise ValueError("velocity must be positive")
        if self.direction not in (+1, -1):
            raise ValueError("direction must be +1 or -1")
        if self.output_rate_hz < 5000.0:
            raise ValueError("simulation output rate must be at least 5000 Hz")
        if self.sim_rate_hz < 4 * self.output_rate_hz:
            raise ValueError("sim_rate must be at least 4x output_rate")
        if abs(self.sim_rate_hz / self.output_rate_hz % 1.0) > 1e-9:
            raise ValueError("sim_rate must be an integer multiple of output_rate")


@dataclass(frozen=True)
class MagnetTrajectory:
    times_s: np.ndarray
    x_disp_um: np.ndarray
    z_disp_um: np.ndarray
    rotation_mrad: np.ndarray

    def __post_init__(self):
        n = len(self.times_s)
        if not (len(self.x_disp_um) == len(self.z_disp_um) == len(self.rotation_mrad) == n):
            raise ValueError("trajectory series must have equal length")
        dt = np.diff(self.times_s)
        if n > 1 and (np.any(dt <= 0) or not np.allclose(dt, dt[0], rtol=1e-9)):
            raise ValueError("times must be strictly increasing and uniform")
        for arr in (self.times_s, self.x_disp_um, self.z_disp_um, self.rotation_mrad):
            np.asarray(arr).setflags(write=False)


def tip_offset_profile(tip: TipGeometry, u_mm: np.ndarray, preload_depth_um: float = 0.0):
    """Height offset (um) of the tip underside at lateral offsets u from tip center.

    Ridges are trapezoidal in cross-section: a flat crest plateau
    (crest_plateau_fraction of the nominal ridge width), linear flanks over
    the rest of the width, and grooves at -ridge_depth. The spherical kind
    adds the sphere sagitta and returns -inf outside the preload-limited
    contact patch.
    """
    u = np.asarray(u_mm, dtype=float)
    off = np.zeros_like(u)
    if tip.ridged:
        lam = tip.ridge_wavelength_um / 1000.0  # mm
        frac = tip.crest_plateau_fraction
        plateau_half = tip.ridge_width_um * frac / 2.0 / 1000.0
        flank = tip.ridge_width_um * (1.0 - frac) / 2.0 / 1000.0
        # signed distance to the nearest crest center (crest at u = 0 mod lam)
        d = np.abs((u + lam / 2.0) % lam - lam / 2.0)
        off = np.where(
            d <= plateau_half,
            0.0,
            np.where(
                d <= plateau_half + flank,
                -tip.ridge_depth_um * (d - plateau_half) / flank,
                -tip.ridge_depth_um,
            ),
        )
    if tip.kind == "spherical-ridged":
        r = tip.sphere_radius_mm
        sag_mm = r - np.sqrt(np.maximum(r**2 - u**2, 0.0))
        off = off - sag_mm * 1000.0
        # circular-segment contact half-width from the preload depth
        delta_mm = max(preload_depth_um, 0.0) / 1000.0
        half_w = np.sqrt(max(2.0 * r * delta_mm, 0.0))
        off = np.where(np.abs(u) <= max(half_w, 1.0 / 1000.0), off, -np.inf)
    return off


def _patch_grid(tip: TipGeometry, resolution: float):
    """Symmetric lateral sample offsets covering the contact patch."""
    half = tip.contact_width_mm / 2.0
    m = int(np.floor(half * resolution + 1e-9))
    return np.arange(-m, m + 1) / resolution


def contact_envelope(
    tip: TipGeometry,
    surface: SurfaceProfile,
    x_center_mm: float,
    preload_depth_um: float,
):
    """Rigid-envelope contact at one patch position.

    Returns (z_base_um, tilt_mrad): the tip base height is the maximum of
    surface height plus tip offset over the patch, minus the preload; tilt is
    the slope through the two highest contact supports, clamped to +-100 mrad.
    """
    u = _patch_grid(tip, surface.resolution)
    xs = x_center_mm + u
    x_max = (surface.heights_um.size - 1) / surface.resolution
    if xs[0] < -1e-9 or xs[-1] > x_max + 1e-9:
        raise PatchOutsideSurfaceError(
            f"patch [{xs[0]:.3f}, {xs[-1]:.3f}] mm outside surface [0, {x_max:.3f}] mm"
        )
    h = np.interp(xs, surface.x_mm, surface.heights_um)
    contact = h + tip_offset_profile(tip, u, preload_depth_um)
    z_base, tilt = _envelope_and_tilt(contact[np.newaxis, :], u)
    return float(z_base[0] - preload_depth_um), float(tilt[0])


def _envelope_and_tilt(contact: np.ndarray, u: np.ndarray):
    """Max support height and top-two-support slope for rows of contact heights."""
    i1 = np.argmax(contact, axis=1)
    rows = np.arange(contact.shape[0])
    c1 = contact[rows, i1]
    masked = contact.copy()
    masked[rows, i1] = -np.inf
    i2 = np.argmax(masked, axis=1)
    c2 = masked[rows, i2]
    # um/mm == mrad
    with np.errstate(invalid="ignore"):
        tilt = (c1 - c2) / (u[i1] - u[i2])
    tilt = np.where(np.isfinite(tilt), tilt, 0.0)
    tilt = np.clip(tilt, -TILT_CLAMP_MRAD, TILT_CLAMP_MRAD)
    return c1, tilt


def envelope_series(
    tip: TipGeometry,
    surface: SurfaceProfile,
    preload_depth_um: float,
    chunk: int = 2048,
):
    """Envelope and tilt at every grid position where the patch fits.

    Returns (centers_mm, z_base_um, tilt_mrad). z_base already has the preload
    subtracted.
    """
    u = _patch_grid(tip, surface.resolution)
    off = tip_offset_profile(tip, u, preload_depth_um)
    w = u.size
    h = surface.heights_um
    n_centers = h.size - w + 1
    if n_centers < 2:
        raise PatchOutsideSurfaceError("surface shorter than the contact patch")
    centers = (np.arange(n_centers) + (w - 1) / 2.0) / surface.resolution
    windows = sliding_window_view(h, w)
    z_base = np.empty(n_centers)
    tilt = np.empty(n_centers)
    for start in range(0, n_centers, chunk):
        stop = min(start + chunk, n_centers)
        contact = windows[start:stop] + off
        z, t = _envelope_and_tilt(contact, u)
        z_base[start:stop] = z
        tilt[start:stop] = t
    return centers, z_base - preload_depth_um, tilt


def suspension_params(
    stack: ElastomerStack,
    tip: TipGeometry,
    magnet_size_mm: float,
    model: LumpedModelParams = LumpedModelParams(),
) -> SuspensionParams:
    """Equivalent spring/mass constants replacing the FEM elastomer model."""
    t_e = stack.epidermis_thickness_mm / 1000.0
    t_d = stack.dermis_thickness_mm / 1000.0
    e_e = stack.epidermis_modulus_psi * PSI_TO_PA
    e_d = stack.dermis_modulus_psi * PSI_TO_PA
    t_total = t_e + t_d
    e_series = t_total / (t_e / e_e + t_d / e_d)
    size_m = magnet_size_mm / 1000.0
    a_bearing = size_m**2 * model.bearing_shape_factor
    k_z = e_series * a_bearing / t_total
    k_x = k_z / model.lateral_stiffness_ratio
    k_theta = k_z * (size_m / 2.0) ** 2
    m_magnet = size_m**3 * MAGNET_DENSITY
    m_eff = m_magnet * (1.0 + model.elastomer_mass_participation)
    return SuspensionParams(k_x=k_x, k_z=k_z, k_theta=k_theta, m_eff=m_eff, zeta=model.damping_ratio)


def _rk4_lti_path(omega: float, zeta: float, drive_half: np.ndarray, h: float, p0: float, v0: float):
    """Positions of m p'' + 2 zeta omega p' + omega^2 p = drive(t), via fixed-step RK4.

    drive_half holds the drive at the RK4 half-step grid (2N+1 samples for N
    steps). The RK4 update of a linear system is an exact 2-term linear
    recurrence in the position; it is evaluated with lfilter, which reproduces
    the step-by-step RK4 trajectory to rounding error.
    """
    m_mat = np.array([[0.0, 1.0], [-omega**2, -2.0 * zeta * omega]])
    eye = np.eye(2)
    hm = h * m_mat
    a_mat = eye + hm @ (eye + hm @ (eye / 2.0 + hm @ (eye / 6.0 + hm / 24.0)))
    c1 = eye + hm @ (eye + hm @ (eye / 2.0 + hm / 4.0))
    c2 = 4.0 * eye + hm @ (2.0 * eye + hm / 2.0)
    # forcing enters through the velocity slot: g(t) = (0, drive(t))
    w1 = (h / 6.0) * c1[:, 1]
    w2 = (h / 6.0) * c2[:, 1]
    w4 = (h / 6.0) * np.array([0.0, 1.0])
    d_n = drive_half[0:-2:2]
    d_mid = drive_half[1:-1:2]
    d_next = drive_half[2::2]
    b = np.outer(d_n, w1) + np.outer(d_mid, w2) + np.outer(d_next, w4)  # (N, 2)

    tr_a = a_mat[0, 0] + a_mat[1, 1]
    det_a = a_mat[0, 0] * a_mat[1, 1] - a_mat[0, 1] * a_mat[1, 0]
    u0 = np.array([p0, v0])
    p1 = (a_mat @ u0 + b[0])[0]
    # p_{n+2} = tr(A) p_{n+1} - det(A) p_n + e0 . (b_{n+1} + (A - tr(A) I) b_n)
    shifted = a_mat - tr_a * eye
    f = b[1:] @ np.array([1.0, 0.0]) + b[:-1] @ shifted[0]
    x_in = np.concatenate(([p0, p1 - tr_a * p0], f))
    return lfilter([1.0], [1.0, -tr_a, det_a], x_in)


def simulate_scan(
    tip: TipGeometry,
    stack: ElastomerStack,
    surface: SurfaceProfile,
    scan: ScanConfig,
    magnet_size_mm: float = 2.0,
    model: LumpedModelParams = LumpedModelParams(),
) -> MagnetTrajectory:
    """Constant-velocity scan of the surface, returning the magnet pose series."""
    travel = scan.duration_s * scan.velocity_mm_s
    if travel > surface.length_mm - tip.contact_width_mm + 1e-9:
        raise ValueError(
            f"scan travel {travel:.2f} mm exceeds surface length "
            f"{surface.length_mm:.2f} mm minus contact width"
        )
    centers, z_b, tilt = envelope_series(tip, surface, scan.preload_depth_um)
    if scan.direction > 0:
        x_start = centers[0]
    else:
        x_start = centers[-1]

    n_steps = int(round(scan.duration_s * scan.sim_rate_hz))
    h = 1.0 / scan.sim_rate_hz
    t_half = np.arange(2 * n_steps + 1) * (h / 2.0)
    x_t = x_start + scan.direction * scan.velocity_mm_s * t_half
    zb_half = np.interp(x_t, centers, z_b)
    tilt_half = np.interp(x_t, centers, tilt)

    sus = suspension_params(stack, tip, magnet_size_mm, model)
    omega_z = np.sqrt(sus.k_z / sus.m_eff)
    omega_x = np.sqrt(sus.k_x / sus.m_eff)
    inertia = sus.m_eff * (magnet_size_mm / 2000.0) ** 2
    omega_t = np.sqrt(sus.k_theta / inertia)

    zb_mean = zb_half.mean()
    drive_z = omega_z**2 * zb_half
    drive_x = model.friction_coefficient * omega_z**2 * (zb_half - zb_mean)
    drive_t = omega_t**2 * tilt_half

    z_path = _rk4_lti_path(omega_z, sus.zeta, drive_z, h, zb_half[0], 0.0)
    x_path = _rk4_lti_path(omega_x, sus.zeta, drive_x, h, drive_x[0] / omega_x**2, 0.0)
    t_path = _rk4_lti_path(omega_t, sus.zeta, drive_t, h, tilt_half[0], 0.0)

    for path in (z_path, x_path, t_path):
        bad = np.flatnonzero(~np.isfinite(path))
        if bad.size:
            raise SimulationDivergedError(bad[0] * h)

    dec = int(round(scan.sim_rate_hz / scan.output_rate_hz))
    times = np.arange(0, n_steps + 1, dec) / scan.sim_rate_hz
    return MagnetTrajectory(
        times_s=times,
        x_disp_um=x_path[::dec],
        z_disp_um=z_path[::dec],
        rotation_mrad=t_path[::dec],
    )


def trajectory_to_csv(traj: MagnetTrajectory) -> str:
    buf = io.StringIO()
    buf.write("t_s,x_um,z_um,theta_mrad\n")
    for t, x, z, th in zip(traj.times_s, traj.x_disp_um, traj.z_disp_um, traj.rotation_mrad):
        buf.write(f"{float(t)!r},{float(x)!r},{float(z)!r},{float(th)!r}\n")
    return buf.getvalue()
