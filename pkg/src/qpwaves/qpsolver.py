"""Quasi-periodic traveling ansatz, torus residual, and Newton refinement.

A traveling embedding stores the profile U~ on the nu-torus; the physical
fields are U(phi, x) = U~(phi - v x) with integer velocity vector v, so
the transport identity v . d_phi U + d_x U = 0 holds structurally and is
never an equation to solve.  Modes on the sublattice v . l = 0 would have
zero x-wavenumber and are excluded (the zero-mean constraint).

The functional whose zeros are quasi-periodic solutions is

    F(omega, U) = omega . d_phi U - X_H(U),

evaluated spectrally: the profile is sampled on a Theta-grid, each sample
generates an x-slice whose water-wave vector field is computed by the
batched spectral core, and the slice values at x = 0 are transformed back
to profile modes.  Newton refinement solves the augmented system {F = 0,
amplitude constraints, phase conditions} for the profile modes and the
frequency vector by damped least squares on a growing truncation schedule.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.fft import next_fast_len

from . import normalform
from .resonance import TangentialSet
from .spectral import Field1D, change_jmax, grid_points
from .wavesys import GRAVITY, SurfaceState, vector_field_coeffs


class BasinError(RuntimeError):
    """Initial residual too large for the Newton basin."""


class NonConvergenceError(RuntimeError):
    """Newton iteration failed to reach the tolerance."""


class ConditioningError(RuntimeError):
    """The augmented Jacobian lost rank beyond the acceptable threshold."""


# ----------------------------------------------------------------------
# lattices and packing
# ----------------------------------------------------------------------

@lru_cache(maxsize=None)
def _lattice(lmax: int, nu: int) -> np.ndarray:
    axes = [np.arange(-lmax, lmax + 1)] * nu
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _mode_mask(lmax: int, velocity: tuple[int, ...]) -> np.ndarray:
    """Flat mask of modes carrying nonzero x-wavenumber."""
    lat = _lattice(lmax, len(velocity))
    return (lat @ np.array(velocity)) != 0


def _half_mask(lmax: int, nu: int) -> np.ndarray:
    """Lexicographically positive representatives of +-l pairs."""
    lat = _lattice(lmax, nu)
    out = np.zeros(len(lat), dtype=bool)
    for k, ell in enumerate(lat):
        for c in ell:
            if c > 0:
                out[k] = True
                break
            if c < 0:
                break
    return out


def _flip_index(lmax: int, nu: int) -> np.ndarray:
    """Flat index of -l for each flat l."""
    n = (2 * lmax + 1) ** nu
    return np.arange(n)[::-1].copy()


@dataclass(frozen=True)
class TorusEmbedding:
    """Traveling torus profile (eta~, psi~) with frequency omega.

    Coefficient arrays are nu-dimensional centered boxes |l_i| <= lmax;
    both components are real fields (Hermitian arrays) with zero mean and
    no modes on the sublattice v . l = 0.
    """

    sites: TangentialSet
    eta: np.ndarray
    psi: np.ndarray
    omega: np.ndarray

    @property
    def nu(self) -> int:
        return self.sites.nu

    @property
    def lmax(self) -> int:
        return (self.eta.shape[0] - 1) // 2

    @property
    def velocity(self) -> np.ndarray:
        return np.array(self.sites.velocity)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.eta) ** 2 + np.abs(self.psi) ** 2)))

    def with_lmax(self, lmax: int) -> "TorusEmbedding":
        if lmax == self.lmax:
            return self
        src = self.lmax
        eta = np.zeros((2 * lmax + 1,) * self.nu, dtype=complex)
        psi = np.zeros_like(eta)
        m = min(src, lmax)
        sl_dst = tuple(slice(lmax - m, lmax + m + 1) for _ in range(self.nu))
        sl_src = tuple(slice(src - m, src + m + 1) for _ in range(self.nu))
        eta[sl_dst] = self.eta[sl_src]
        psi[sl_dst] = self.psi[sl_src]
        return TorusEmbedding(self.sites, eta, psi, self.omega.copy())

    def shifted(self, theta) -> "TorusEmbedding":
        """Gauge shift Theta -> Theta + theta of all torus phases."""
        lat = _lattice(self.lmax, self.nu)
        phase = np.exp(1j * lat @ np.asarray(theta, dtype=float)).reshape(self.eta.shape)
        return TorusEmbedding(self.sites, self.eta * phase, self.psi * phase, self.omega.copy())

    def reversed(self) -> "TorusEmbedding":
        """The involution partner t -> -t, (eta, psi) -> (eta(-x), -psi(-x))."""
        rev = (slice(None, None, -1),) * self.nu
        return TorusEmbedding(self.sites, np.conj(self.eta[rev]), -np.conj(self.psi[rev]),
                              self.omega.copy())


def transport_defect(emb: TorusEmbedding) -> float:
    """sup of |v . l + j| over the support of the (l, j) representation.

    The slice geometry assigns x-wavenumber j = -(v . l) to profile mode
    l, so the transport identity v . d_phi U + d_x U = 0 holds exactly;
    this evaluates it through the same mapping the solver uses.
    """
    lat, xwave, _, _ = _slice_geometry(emb.lmax, emb.velocity, None)
    support = (np.abs(emb.eta.reshape(-1)) + np.abs(emb.psi.reshape(-1))) > 0
    if not np.any(support):
        return 0.0
    return float(np.max(np.abs((lat @ emb.velocity + xwave)[support])))


# ----------------------------------------------------------------------
# first-order ansatz and tangential amplitudes
# ----------------------------------------------------------------------

def first_order_ansatz(ts: TangentialSet, zeta, lmax: int = 1) -> TorusEmbedding:
    """Exact solution of the linearized system carrying amplitudes zeta.

    Site i contributes sqrt(2 zeta_i) |j_i|^(1/4) cos(Theta_i) to eta and
    -sqrt(2 zeta_i) |j_i|^(-1/4) sin(Theta_i) to psi, i.e. |u_{j_i}|^2 =
    zeta_i in this package's normalization.  The frequency starts at the
    first-order prediction of the twist matrix (with the 2 pi action
    conversion).
    """
    zeta = np.asarray(zeta, dtype=float)
    if zeta.shape != (ts.nu,):
        raise ValueError("one action per tangential site required")
    if np.any(zeta < 0):
        raise ValueError("actions must be nonnegative")
    nu = ts.nu
    shape = (2 * lmax + 1,) * nu
    eta = np.zeros(shape, dtype=complex)
    psi = np.zeros(shape, dtype=complex)
    for i, j in enumerate(ts.sites):
        amp_eta = np.sqrt(zeta[i] / 2.0) * abs(j) ** 0.25
        amp_psi = np.sqrt(zeta[i] / 2.0) * abs(j) ** -0.25
        idx_p = tuple(lmax + (1 if k == i else 0) for k in range(nu))
        idx_m = tuple(lmax - (1 if k == i else 0) for k in range(nu))
        eta[idx_p] = amp_eta
        eta[idx_m] = amp_eta
        psi[idx_p] = 1j * amp_psi
        psi[idx_m] = -1j * amp_psi
    omega = normalform.frequency_amplitude(ts, normalform.AMPLITUDE_ACTION_RATIO * zeta)
    return TorusEmbedding(ts, eta, psi, omega)


def tangential_amplitudes(emb: TorusEmbedding) -> np.ndarray:
    """Complex amplitudes a_i at the tangential modes e^{i Theta_i}.

    a_i = (|j_i|^(-1/4) eta_{e_i} - i |j_i|^(1/4) psi_{e_i}) / sqrt(2);
    the first-order ansatz has a_i = sqrt(zeta_i) real positive, and the
    solver pins exactly this quantity (actions and phases together).
    """
    lmax, nu = emb.lmax, emb.nu
    out = np.empty(nu, dtype=complex)
    for i, j in enumerate(emb.sites.sites):
        idx = tuple(lmax + (1 if k == i else 0) for k in range(nu))
        e, p = emb.eta[idx], emb.psi[idx]
        out[i] = (abs(j) ** -0.25 * e - 1j * abs(j) ** 0.25 * p) / np.sqrt(2.0)
    return out


def measured_actions(emb: TorusEmbedding) -> np.ndarray:
    return np.abs(tangential_amplitudes(emb)) ** 2


# ----------------------------------------------------------------------
# slices and the torus residual
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ResidualConfig:
    """Discretization of the residual evaluation."""

    dno_order: int = 8
    slice_jmax: int | None = None    # x-truncation; at least max |v . l|
    dealias: int = 2                 # Theta-grid oversampling factor
    sobolev_index: float = 4.0
    gravity: float = GRAVITY
    linearized: bool = False         # substitute the linearized vector field


def _slice_geometry(lmax: int, velocity: np.ndarray, slice_jmax: int | None):
    lat = _lattice(lmax, len(velocity))
    xwave = -(lat @ velocity)
    jneed = int(np.max(np.abs(xwave))) if len(xwave) else 0
    jx = max(slice_jmax or 0, jneed, 1)
    scatter = np.zeros((len(lat), 2 * jx + 1))
    scatter[np.arange(len(lat)), xwave + jx] = 1.0
    return lat, xwave, jx, scatter


def _theta_grid(lmax: int, nu: int, dealias: int):
    n = next_fast_len(dealias * (2 * lmax + 1))
    pts = grid_points(n)
    mesh = np.meshgrid(*([pts] * nu), indexing="ij")
    phis = np.stack([m.ravel() for m in mesh], axis=-1)
    return phis, n


def _grid_to_modes(values: np.ndarray, n: int, lmax: int, nu: int) -> np.ndarray:
    """FFT over the trailing Theta axes; returns flat centered-box modes.

    ``values`` has shape (..., n^nu); output (..., (2 lmax+1)^nu).
    """
    lead = values.shape[:-1]
    w = values.reshape(lead + (n,) * nu)
    spec = np.fft.fftn(w, axes=tuple(range(len(lead), len(lead) + nu))) / n ** nu
    idx = np.concatenate([np.arange(n - lmax, n), np.arange(lmax + 1)])
    for ax in range(nu):
        spec = np.take(spec, idx, axis=len(lead) + ax)
    return spec.reshape(lead + ((2 * lmax + 1) ** nu,))


def _slices_from_modes(flat_coeffs: np.ndarray, phis: np.ndarray,
                       lat: np.ndarray, scatter: np.ndarray) -> np.ndarray:
    """x-mode arrays of the slices x -> U~(phi - v x) for each phi.

    ``flat_coeffs`` is (..., n_modes); result (..., n_phi, 2 jx + 1).
    """
    phase = np.exp(1j * phis @ lat.T)                    # (n_phi, n_modes)
    return (flat_coeffs[..., None, :] * phase) @ scatter


@dataclass
class Residual:
    """F = omega . d_phi U - X_H(U) on the retained profile modes."""

    f_eta: np.ndarray
    f_psi: np.ndarray
    norm: float            # plain l2 norm of all retained modes
    sobolev_norm: float    # <l>^s weighted
    lmax: int
    nu: int


def _residual_flat(eta_flat, psi_flat, omega, ts: TangentialSet, lmax: int,
                   cfg: ResidualConfig):
    """Batched residual on flat mode arrays; omega has matching batch shape."""
    nu = ts.nu
    velocity = np.array(ts.velocity)
    lat, xwave, jx, scatter = _slice_geometry(lmax, velocity, cfg.slice_jmax)
    phis, n = _theta_grid(lmax, nu, cfg.dealias)

    eta_s = _slices_from_modes(eta_flat, phis, lat, scatter)
    psi_s = _slices_from_modes(psi_flat, phis, lat, scatter)
    lead = eta_s.shape[:-2]
    m = int(np.prod(lead)) if lead else 1
    eta_b = eta_s.reshape(m * len(phis), 2 * jx + 1)
    psi_b = psi_s.reshape(m * len(phis), 2 * jx + 1)

    if cfg.linearized:
        absd = np.abs(np.arange(-jx, jx + 1)).astype(float)
        de = absd * psi_b
        dp = -cfg.gravity * eta_b
    else:
        de, dp, _, _ = vector_field_coeffs(eta_b, psi_b, cfg.dno_order,
                                           g=cfg.gravity, check_decay=False)
    # value of the tangent field at x = 0 for every slice
    w_eta = de.sum(axis=-1).reshape(lead + (len(phis),))
    w_psi = dp.sum(axis=-1).reshape(lead + (len(phis),))
    w_eta_modes = _grid_to_modes(w_eta, n, lmax, nu)
    w_psi_modes = _grid_to_modes(w_psi, n, lmax, nu)

    phase = omega @ lat.T if omega.ndim > 1 else lat @ omega
    f_eta = 1j * phase * eta_flat - w_eta_modes
    f_psi = 1j * phase * psi_flat - w_psi_modes
    mask = _mode_mask(lmax, ts.velocity)
    f_eta = f_eta * mask
    f_psi = f_psi * mask
    return f_eta, f_psi, lat


def residual(emb: TorusEmbedding, cfg: ResidualConfig = ResidualConfig()) -> Residual:
    """Evaluate F at the embedding, with l2 and Sobolev norms."""
    lmax, nu = emb.lmax, emb.nu
    f_eta, f_psi, lat = _residual_flat(emb.eta.reshape(-1), emb.psi.reshape(-1),
                                       emb.omega, emb.sites, lmax, cfg)
    l2 = float(np.sqrt(np.sum(np.abs(f_eta) ** 2 + np.abs(f_psi) ** 2)))
    weights = (1.0 + np.sum(lat.astype(float) ** 2, axis=-1)) ** (cfg.sobolev_index / 2.0)
    sob = float(np.sqrt(np.sum(weights ** 2 * (np.abs(f_eta) ** 2 + np.abs(f_psi) ** 2))))
    shape = (2 * lmax + 1,) * nu
    return Residual(f_eta.reshape(shape), f_psi.reshape(shape), l2, sob, lmax, nu)


# ----------------------------------------------------------------------
# Newton refinement
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class SolveParams:
    """Newton controls: truncation schedule, constraints, tolerances."""

    actions: tuple            # prescribed amplitude actions zeta (> 0)
    schedule: tuple = ((8, 32),)     # stages of (lmax, slice_jmax), nondecreasing
    tol: float = 1e-11               # on the plain l2 residual norm
    max_iter: int = 30
    damping: float = 1.0
    basin_threshold: float = 0.5
    fd_step: float = 1e-6
    dno_order: int = 8
    dealias: int = 2
    sobolev_index: float = 4.0
    min_rcond: float = 1e-12

    def __post_init__(self):
        ls = [st[0] for st in self.schedule]
        js = [st[1] for st in self.schedule]
        if sorted(ls) != list(ls) or sorted(js) != list(js):
            raise ValueError("truncation schedule must be nondecreasing")
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")


class _Packing:
    """Real unknown vector <-> Hermitian profile arrays plus omega."""

    def __init__(self, ts: TangentialSet, lmax: int):
        self.ts = ts
        self.nu = ts.nu
        self.lmax = lmax
        mask = _mode_mask(lmax, ts.velocity)
        half = _half_mask(lmax, ts.nu) & mask
        self.idx = np.flatnonzero(half)
        self.flip = _flip_index(lmax, ts.nu)
        self.n_modes = (2 * lmax + 1) ** ts.nu
        self.n_half = len(self.idx)
        self.n_unknowns = 4 * self.n_half + ts.nu

    def pack(self, emb: TorusEmbedding) -> np.ndarray:
        e = emb.eta.reshape(-1)[self.idx]
        p = emb.psi.reshape(-1)[self.idx]
        return np.concatenate([e.real, e.imag, p.real, p.imag, emb.omega])

    def unpack(self, x: np.ndarray):
        """Rows of x -> (eta_flat, psi_flat, omega), batched."""
        x = np.atleast_2d(x)
        nh = self.n_half
        e = x[:, :nh] + 1j * x[:, nh:2 * nh]
        p = x[:, 2 * nh:3 * nh] + 1j * x[:, 3 * nh:4 * nh]
        omega = x[:, 4 * nh:]
        eta = np.zeros((len(x), self.n_modes), dtype=complex)
        psi = np.zeros_like(eta)
        eta[:, self.idx] = e
        psi[:, self.idx] = p
        eta[:, self.flip[self.idx]] = np.conj(e)
        psi[:, self.flip[self.idx]] = np.conj(p)
        return eta, psi, omega

    def embedding(self, x: np.ndarray) -> TorusEmbedding:
        eta, psi, omega = self.unpack(x)
        shape = (2 * self.lmax + 1,) * self.nu
        return TorusEmbedding(self.ts, eta[0].reshape(shape), psi[0].reshape(shape),
                              omega[0].copy())


def _amplitude_rows(pk: _Packing, eta_flat, psi_flat):
    """Complex tangential amplitudes a_i for batched flat arrays."""
    lmax, nu = pk.lmax, pk.nu
    out = []
    for i, j in enumerate(pk.ts.sites):
        idx = np.ravel_multi_index(
            tuple(lmax + (1 if k == i else 0) for k in range(nu)),
            (2 * lmax + 1,) * nu)
        a = (abs(j) ** -0.25 * eta_flat[..., idx] - 1j * abs(j) ** 0.25 * psi_flat[..., idx]) / np.sqrt(2.0)
        out.append(a)
    return np.stack(out, axis=-1)


def _residual_vector(pk: _Packing, xs: np.ndarray, cfg: ResidualConfig,
                     zeta: np.ndarray) -> np.ndarray:
    """Stacked real residual rows for a batch of unknown vectors."""
    eta, psi, omega = pk.unpack(xs)
    f_eta, f_psi, _ = _residual_flat(eta, psi, omega, pk.ts, pk.lmax, cfg)
    fe = f_eta[:, pk.idx]
    fp = f_psi[:, pk.idx]
    amps = _amplitude_rows(pk, eta, psi)
    cons = amps - np.sqrt(zeta)
    rows = np.concatenate([fe.real, fe.imag, fp.real, fp.imag,
                           cons.real, cons.imag], axis=1)
    return rows


def newton_refine(emb0: TorusEmbedding, params: SolveParams,
                  verbose: bool = False):
    """Refine an approximate traveling torus; returns (embedding, log).

    The augmented least-squares system carries 4 n_half + 2 nu equations
    (residual modes, amplitude and phase constraints) for 4 n_half + nu
    unknowns; the nu-fold gauge degeneracy of F makes the system
    consistent at a solution.
    """
    ts = emb0.sites
    zeta = np.asarray(params.actions, dtype=float)
    if zeta.shape != (ts.nu,):
        raise ValueError("one prescribed action per site required")
    log = []
    emb = emb0
    if emb.norm() == 0.0 and np.all(zeta == 0):
        return emb, [{"stage": 0, "iter": 0, "residual": 0.0, "note": "zero fixed point"}]

    for stage, (lmax, jx) in enumerate(params.schedule):
        cfg = ResidualConfig(dno_order=params.dno_order, slice_jmax=jx,
                             dealias=params.dealias,
                             sobolev_index=params.sobolev_index)
        pk = _Packing(ts, lmax)
        x = pk.pack(emb.with_lmax(lmax))
        r = _residual_vector(pk, x[None, :], cfg, zeta)[0]
        rnorm = float(np.linalg.norm(r))
        if stage == 0 and rnorm > params.basin_threshold:
            raise BasinError(f"initial residual {rnorm:.3e} exceeds basin threshold")
        for it in range(params.max_iter):
            log.append({"stage": stage, "iter": it, "residual": rnorm,
                        "omega": pk.unpack(x[None, :])[2][0].copy()})
            if verbose:
                print(f"stage {stage} iter {it}: |r| = {rnorm:.3e}")
            if rnorm <= params.tol:
                break
            # batched central-difference Jacobian: all columns in one call
            h = params.fd_step * np.maximum(1.0, np.abs(x))
            xs = np.repeat(x[None, :], 2 * pk.n_unknowns, axis=0)
            for c in range(pk.n_unknowns):
                xs[2 * c, c] += h[c]
                xs[2 * c + 1, c] -= h[c]
            rows = _residual_vector(pk, xs, cfg, zeta)
            jac = (rows[0::2] - rows[1::2]).T / (2.0 * h)
            sol, _, _, sv = np.linalg.lstsq(jac, -r, rcond=None)
            if sv[0] > 0 and sv[-1] / sv[0] < params.min_rcond:
                raise ConditioningError(
                    f"Jacobian nearly rank-deficient: smallest singular value {sv[-1]:.3e}")
            alpha = params.damping
            for _ in range(6):
                x_new = x + alpha * sol
                r_new = _residual_vector(pk, x_new[None, :], cfg, zeta)[0]
                if np.linalg.norm(r_new) < rnorm:
                    break
                alpha *= 0.5
            x, r = x_new, r_new
            rnorm = float(np.linalg.norm(r))
        else:
            if rnorm > params.tol:
                raise NonConvergenceError(
                    f"stage {stage}: residual {rnorm:.3e} after {params.max_iter} iterations")
        log.append({"stage": stage, "iter": "final", "residual": rnorm,
                    "omega": pk.unpack(x[None, :])[2][0].copy()})
        emb = pk.embedding(x)
    return emb, log


def solve_traveling_wave(ts: TangentialSet, zeta, params: SolveParams,
                         max_halvings: int = 4):
    """Ansatz + Newton, with amplitude continuation on basin failure.

    On a BasinError the prescribed actions are approached through
    geometric sub-steps (halving), re-seeding each solve with the previous
    converged embedding.
    """
    zeta = np.asarray(zeta, dtype=float)
    lmax0 = params.schedule[0][0]
    try:
        emb0 = first_order_ansatz(ts, zeta, lmax=lmax0)
        return newton_refine(emb0, replace(params, actions=tuple(zeta)))
    except BasinError:
        pass
    n_steps = 2
    for _ in range(max_halvings):
        try:
            fractions = np.linspace(1.0 / n_steps, 1.0, n_steps)
            emb = first_order_ansatz(ts, zeta * fractions[0], lmax=lmax0)
            full_log = []
            for f in fractions:
                emb, log = newton_refine(emb, replace(params, actions=tuple(zeta * f)))
                full_log.extend(log)
            return emb, full_log
        except BasinError:
            n_steps *= 2
    raise BasinError(f"continuation failed down to {n_steps // 2} sub-steps")


# ----------------------------------------------------------------------
# full embedding: evaluation and dynamical consistency
# ----------------------------------------------------------------------

def evaluate(emb: TorusEmbedding, phi, x):
    """U(phi, x) = U~(phi - v x); phi (..., nu) and x (...) broadcast."""
    phi = np.asarray(phi, dtype=float)
    x = np.asarray(x, dtype=float)
    theta = phi - x[..., None] * emb.velocity
    lat = _lattice(emb.lmax, emb.nu)
    phase = np.exp(1j * theta @ lat.T)
    eta = phase @ emb.eta.reshape(-1)
    psi = phase @ emb.psi.reshape(-1)
    return eta.real, psi.real


def surface_state(emb: TorusEmbedding, phi, jmax: int) -> SurfaceState:
    """The x-slice at torus angle phi as a SurfaceState."""
    lat, xwave, jx, scatter = _slice_geometry(emb.lmax, emb.velocity, jmax)
    phase = np.exp(1j * np.asarray(phi, dtype=float) @ lat.T)
    eta = (emb.eta.reshape(-1) * phase) @ scatter
    psi = (emb.psi.reshape(-1) * phase) @ scatter
    eta = change_jmax(0.5 * (eta + np.conj(eta[::-1])), jmax)
    psi = change_jmax(0.5 * (psi + np.conj(psi[::-1])), jmax)
    return SurfaceState(Field1D(eta, _checked=True), Field1D(psi, _checked=True))


def snapshot_grid(emb: TorusEmbedding, times, n_x: int):
    """eta(t_k, x_m) on a uniform space-time grid (for CSV export)."""
    xs = grid_points(n_x)
    out = np.empty((len(times), n_x))
    for k, t in enumerate(times):
        phi = np.broadcast_to(emb.omega * t, (n_x, emb.nu))
        eta, _ = evaluate(emb, phi, xs)
        out[k] = eta
    return xs, out


def evolve_consistency(emb: TorusEmbedding, T: float, dt: float, jmax: int,
                       dno_order: int = 8, n_checks: int = 5) -> float:
    """Max discrepancy between evolve(U(0, .)) and direct evaluation.

    Feeds the embedding's t = 0 slice to the validation integrator and
    compares against U(omega t, .) at sample times.
    """
    from .dno import DnoConfig
    from .wavesys import evolve
    cfg = DnoConfig(order=dno_order, jmax=jmax)
    s0 = surface_state(emb, np.zeros(emb.nu), jmax)
    n_steps = int(round(T / dt))
    every = max(1, n_steps // n_checks)
    traj = evolve(s0, T, dt, cfg, record_every=every)
    worst = 0.0
    for k, t in enumerate(traj.times):
        ref = surface_state(emb, emb.omega * t, jmax)
        got = traj.state(k)
        diff = max((got.eta - ref.eta).norm(), (got.psi - ref.psi).norm())
        worst = max(worst, diff)
    return worst
