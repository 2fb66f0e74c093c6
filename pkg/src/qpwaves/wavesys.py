"""The gravity water-wave system on the zero-mean subspace.

State is the pair (eta, psi): surface elevation and trace of the velocity
potential, both real zero-mean fields on T.  The evolution is

    eta_t = G(eta) psi
    psi_t = -g eta - psi_x^2 / 2 + (eta_x psi_x + G(eta) psi)^2 / (2 (1 + eta_x^2))

with the Hamiltonian H = (1/2) int psi G(eta) psi + (1/2) int eta^2 and
momentum M = int eta_x psi.  The x-averages decouple: eta's mean is frozen
and psi's mean falls linearly with slope -g * mean(eta); the integrator
carries them as scalar side channels driven by the *computed* means, so
conservation tests probe the discretization honestly instead of asserting
the identities by construction.

Gravity defaults to g = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.fft import next_fast_len

from .dno import DnoConfig, dno_apply_coeffs, dno_bilinear
from .spectral import (
    Field1D,
    TWO_PI,
    change_jmax,
    derivative,
    drop_mean,
    from_grid,
    jmax_of,
    l2_norm,
    mean_mode,
    pairing,
    product,
    reflect,
    shift,
    to_grid,
    wavenumbers,
)

GRAVITY = 1.0


@dataclass(frozen=True)
class SurfaceState:
    """Phase-space point: real zero-mean (eta, psi)."""

    eta: Field1D
    psi: Field1D

    def __post_init__(self):
        for name, f in (("eta", self.eta), ("psi", self.psi)):
            if not f.real:
                raise ValueError(f"{name} must be real-valued")
            if abs(f.mean()) > 1e-14 * max(1.0, f.norm()):
                raise ValueError(f"{name} must have zero mean")

    @classmethod
    def zero(cls, jmax: int) -> "SurfaceState":
        return cls(Field1D.zero(jmax), Field1D.zero(jmax))

    def with_jmax(self, jmax: int) -> "SurfaceState":
        return SurfaceState(self.eta.with_jmax(jmax), self.psi.with_jmax(jmax))

    def norm(self) -> float:
        return float(np.hypot(self.eta.norm(), self.psi.norm()))


# ----------------------------------------------------------------------
# vector field and invariants
# ----------------------------------------------------------------------

def vector_field_coeffs(eta: np.ndarray, psi: np.ndarray, order: int,
                        g: float = GRAVITY, check_decay: bool = True):
    """Right-hand side in coefficients, batched over leading axes.

    Returns (eta_dot, psi_dot, mean_eta_dot, mean_psi_dot_nonlin): the two
    zero-meaned tangent fields plus the computed means, which vanish
    analytically (divergence form of G; vertical translation invariance of
    the kinetic energy) and are reported so drift stays observable.
    """
    jmax = jmax_of(psi)
    gpsi = dno_apply_coeffs(eta, psi, order, check_decay=check_decay)
    eta_x = derivative(eta)
    psi_x = derivative(psi)
    num = product(eta_x, psi_x, jmax) + gpsi
    # rational term on a 3x collocation grid (the reciprocal is not
    # band-limited; 3x oversampling keeps aliasing at roundoff for the
    # small slopes this laboratory works with)
    n3 = next_fast_len(3 * (2 * jmax + 1))
    num_g = to_grid(num, n3)
    etax_g = to_grid(eta_x, n3)
    w = from_grid(num_g * num_g / (1.0 + etax_g * etax_g), jmax)
    nonlin = -0.5 * product(psi_x, psi_x, jmax) + 0.5 * w
    psi_dot = -g * eta + nonlin
    mean_eta_dot = mean_mode(gpsi)
    mean_psi_nl = mean_mode(nonlin)
    return drop_mean(gpsi), drop_mean(psi_dot), mean_eta_dot, mean_psi_nl


def vector_field(s: SurfaceState, cfg: DnoConfig, g: float = GRAVITY) -> SurfaceState:
    """Hamiltonian vector field at s (zero-mean tangent state)."""
    e = change_jmax(s.eta.coeffs, cfg.jmax)
    p = change_jmax(s.psi.coeffs, cfg.jmax)
    de, dp, _, _ = vector_field_coeffs(e, p, cfg.order, g=g, check_decay=cfg.check_decay)
    de = 0.5 * (de + np.conj(de[::-1]))
    dp = 0.5 * (dp + np.conj(dp[::-1]))
    return SurfaceState(Field1D(de, _checked=True), Field1D(dp, _checked=True))


def hamiltonian(s: SurfaceState, cfg: DnoConfig, g: float = GRAVITY) -> float:
    """H = kinetic + potential = (1/2) int psi G(eta) psi + (g/2) int eta^2."""
    kinetic = 0.5 * dno_bilinear(s.eta, s.psi, s.psi, cfg)
    potential = 0.5 * g * float(np.real(pairing(s.eta.coeffs, s.eta.coeffs)))
    return kinetic + potential


def momentum(s: SurfaceState) -> float:
    """M = int eta_x psi dx."""
    return float(np.real(pairing(derivative(s.eta.coeffs), s.psi.coeffs)))


def translate(s: SurfaceState, a: float) -> SurfaceState:
    return SurfaceState(Field1D(shift(s.eta.coeffs, a), _checked=True),
                        Field1D(shift(s.psi.coeffs, a), _checked=True))


# ----------------------------------------------------------------------
# complex coordinates
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ComplexState:
    """Coefficients u_j, j != 0, of the diagonalizing complex variable.

    u = (|D|^{-1/4} eta + i |D|^{1/4} psi) / sqrt(2); mode j evolves as
    e^{-i sqrt(|j|) t} under the linearized flow.  The j = 0 slot is kept
    in the array but always zero.
    """

    coeffs: np.ndarray

    @property
    def jmax(self) -> int:
        return jmax_of(self.coeffs)

    def action(self, j: int) -> float:
        """|u_j|^2 carried by the single signed mode j."""
        return float(np.abs(self.coeffs[j + self.jmax]) ** 2)


def to_complex(s: SurfaceState) -> ComplexState:
    jmax = s.eta.jmax
    j = wavenumbers(jmax)
    scale_m = np.zeros(2 * jmax + 1)
    scale_p = np.zeros(2 * jmax + 1)
    nz = j != 0
    scale_m[nz] = np.abs(j[nz]) ** -0.25
    scale_p[nz] = np.abs(j[nz]) ** 0.25
    psi = change_jmax(s.psi.coeffs, jmax)
    u = (scale_m * s.eta.coeffs + 1j * scale_p * psi) / np.sqrt(2.0)
    return ComplexState(u)


def from_complex(u: ComplexState) -> SurfaceState:
    jmax = u.jmax
    j = wavenumbers(jmax)
    nz = j != 0
    uc = u.coeffs
    ucr = np.conj(uc[::-1])  # conj(u_{-j}) at slot j
    eta = np.zeros(2 * jmax + 1, dtype=complex)
    psi = np.zeros(2 * jmax + 1, dtype=complex)
    eta[nz] = np.abs(j[nz]) ** 0.25 * (uc[nz] + ucr[nz]) / np.sqrt(2.0)
    psi[nz] = -1j * np.abs(j[nz]) ** -0.25 * (uc[nz] - ucr[nz]) / np.sqrt(2.0)
    return SurfaceState(Field1D(eta), Field1D(psi))


# ----------------------------------------------------------------------
# symmetries
# ----------------------------------------------------------------------

def involution(s: SurfaceState) -> SurfaceState:
    """S(eta, psi)(x) = (eta(-x), -psi(-x)); the flow is S-reversible."""
    return SurfaceState(Field1D(reflect(s.eta.coeffs), _checked=True),
                        Field1D(-reflect(s.psi.coeffs), _checked=True))


def is_even(f: Field1D, tol: float = 1e-13) -> bool:
    return float(np.max(np.abs(f.coeffs - reflect(f.coeffs)))) <= tol * max(1.0, f.norm())


def symmetry_check(s: SurfaceState, cfg: DnoConfig) -> dict:
    """Reversibility and parity diagnostics of the vector field at s.

    Checks X o S = -S o X, and that x-even states map to x-even tangents.
    """
    xs = vector_field(s, cfg)
    x_rev = vector_field(involution(s), cfg)
    srev = involution(xs)
    defect = SurfaceState(x_rev.eta + srev.eta, x_rev.psi + srev.psi)
    report = {
        "reversibility_defect": defect.norm(),
        "field_norm": xs.norm(),
        "state_is_even": is_even(s.eta) and is_even(s.psi),
        "evenness_defect": None,
    }
    if report["state_is_even"]:
        de = xs.eta.coeffs - reflect(xs.eta.coeffs)
        dp = xs.psi.coeffs - reflect(xs.psi.coeffs)
        report["evenness_defect"] = float(max(np.max(np.abs(de)), np.max(np.abs(dp))))
    return report


# ----------------------------------------------------------------------
# validation integrator
# ----------------------------------------------------------------------

class StepSizeError(RuntimeError):
    """Estimated local error of a step exceeded the requested tolerance."""


@dataclass
class Trajectory:
    """Recorded evolution samples plus conservation diagnostics."""

    times: np.ndarray
    eta_coeffs: np.ndarray          # (n_rec, 2*jmax+1)
    psi_coeffs: np.ndarray
    mean_eta: np.ndarray
    mean_psi: np.ndarray
    energy: np.ndarray
    momentum: np.ndarray
    g: float = GRAVITY

    def state(self, k: int) -> SurfaceState:
        return SurfaceState(Field1D(self.eta_coeffs[k], _checked=True),
                            Field1D(self.psi_coeffs[k], _checked=True))

    def conservation_report(self) -> dict:
        h0, m0 = self.energy[0], self.momentum[0]
        h_scale = max(abs(h0), 1e-30)
        m_scale = max(abs(m0), max(abs(self.momentum.max()), abs(self.momentum.min())), 1e-30)
        # psi's mean must fall linearly with slope -g*mean(eta)
        linear = self.mean_psi[0] - self.g * self.mean_eta[0] * (self.times - self.times[0])
        return {
            "energy_rel_drift": float(np.max(np.abs(self.energy - h0)) / h_scale),
            "momentum_rel_drift": float(np.max(np.abs(self.momentum - m0)) / m_scale),
            "mean_eta_drift": float(np.max(np.abs(self.mean_eta - self.mean_eta[0]))),
            "mean_psi_linear_defect": float(np.max(np.abs(self.mean_psi - linear))),
        }

    def mode_amplitudes(self, js: list[int]) -> dict[int, np.ndarray]:
        jmax = (self.eta_coeffs.shape[1] - 1) // 2
        return {j: np.abs(self.eta_coeffs[:, j + jmax]) for j in js}

    def complex_mode(self, j: int) -> np.ndarray:
        """Time series of u_j along the trajectory."""
        jmax = (self.eta_coeffs.shape[1] - 1) // 2
        s = np.abs(j) ** 0.25
        return (self.eta_coeffs[:, j + jmax] / s + 1j * s * self.psi_coeffs[:, j + jmax]) / np.sqrt(2.0)

    def export_csv(self, path, js: list[int] | None = None):
        jmax = (self.eta_coeffs.shape[1] - 1) // 2
        js = js if js is not None else [j for j in range(1, min(jmax, 8) + 1)]
        header = ["t", "H", "M", "mean_eta", "mean_psi"] + [f"amp_eta_{j}" for j in js]
        amps = self.mode_amplitudes(js)
        with open(path, "w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for k in range(len(self.times)):
                row = [self.times[k], self.energy[k], self.momentum[k],
                       self.mean_eta[k], self.mean_psi[k]] + [amps[j][k] for j in js]
                fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def evolve(s0: SurfaceState, T: float, dt: float, cfg: DnoConfig,
           g: float = GRAVITY, record_every: int = 10,
           mean_eta0: float = 0.0, mean_psi0: float = 0.0,
           local_error_tol: float | None = None, error_check_every: int = 100) -> Trajectory:
    """Classical fixed-step 4th-order integration of the full system.

    The scalar means are advanced with the computed right-hand sides, so
    their drift measures the divergence-form and translation-invariance
    identities rather than assuming them.  With ``local_error_tol`` set, a
    step-doubling error estimate is formed every ``error_check_every``
    steps and a StepSizeError is raised when it exceeds the tolerance.
    """
    jmax = cfg.jmax
    eta = change_jmax(s0.eta.coeffs, jmax)
    psi = change_jmax(s0.psi.coeffs, jmax)
    y = np.concatenate([eta, psi, [complex(mean_eta0), complex(mean_psi0)]])
    n = 2 * jmax + 1

    def rhs(yv: np.ndarray) -> np.ndarray:
        de, dp, me_dot, mp_nl = vector_field_coeffs(
            yv[:n], yv[n:2 * n], cfg.order, g=g, check_decay=cfg.check_decay)
        # psi's mean feels gravity through eta's mean, plus the computed
        # nonlinear mean (analytically zero)
        dmean_psi = -g * yv[2 * n] + mp_nl
        return np.concatenate([de, dp, [me_dot, dmean_psi]])

    def step(yv: np.ndarray, h: float) -> np.ndarray:
        k1 = rhs(yv)
        k2 = rhs(yv + 0.5 * h * k1)
        k3 = rhs(yv + 0.5 * h * k2)
        k4 = rhs(yv + h * k3)
        return yv + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    n_steps = int(round(T / dt))
    rec_t, rec_eta, rec_psi, rec_me, rec_mp, rec_h, rec_m = [], [], [], [], [], [], []

    def record(t, yv):
        st = SurfaceState(Field1D(0.5 * (yv[:n] + np.conj(yv[:n][::-1])), _checked=True),
                          Field1D(0.5 * (yv[n:2 * n] + np.conj(yv[n:2 * n][::-1])), _checked=True))
        rec_t.append(t)
        rec_eta.append(st.eta.coeffs)
        rec_psi.append(st.psi.coeffs)
        rec_me.append(float(np.real(yv[2 * n])))
        rec_mp.append(float(np.real(yv[2 * n + 1])))
        rec_h.append(hamiltonian(st, cfg, g=g))
        rec_m.append(momentum(st))

    record(0.0, y)
    for k in range(n_steps):
        if local_error_tol is not None and error_check_every > 0 and k % error_check_every == 0:
            full = step(y, dt)
            half = step(step(y, 0.5 * dt), 0.5 * dt)
            err = float(np.max(np.abs(full - half)))
            if err > local_error_tol:
                raise StepSizeError(
                    f"local error estimate {err:.3e} exceeds tolerance at t={k * dt:.4f}; reduce dt")
            y = half
        else:
            y = step(y, dt)
        if (k + 1) % record_every == 0 or k == n_steps - 1:
            record((k + 1) * dt, y)

    return Trajectory(np.array(rec_t), np.array(rec_eta), np.array(rec_psi),
                      np.array(rec_me), np.array(rec_mp),
                      np.array(rec_h), np.array(rec_m), g=g)


def phase_frequency(times: np.ndarray, series: np.ndarray) -> float:
    """Dominant rotation rate of a complex time series.

    Least-squares slope of the unwrapped phase; for u_j(t) = r e^{-i w t}
    it returns -w up to the nonlinear wobble of r and w.
    """
    phase = np.unwrap(np.angle(series))
    tt = times - times.mean()
    return float(np.dot(tt, phase - phase.mean()) / np.dot(tt, tt))
