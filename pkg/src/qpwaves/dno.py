"""Dirichlet-Neumann operator for the infinite-depth periodic problem.

The operator maps the trace psi of a harmonic potential (decaying as
y -> -infinity) on the surface y = eta(x) to its rescaled normal
derivative there.  On the flat surface it is the multiplier |D|.

Evaluation uses the Taylor expansion in powers of the surface.  Writing
phi for the potential restricted to y = 0 and extending harmonically,

    psi        = T(eta) phi,   T = sum_m (eta^m / m!) |D|^m,
    G(eta) psi = B(eta) phi,   B = sum_m (eta^m / m!) |D|^(m+1)
                                   - eta_x (eta^(m-1) / (m-1)!) |D|^(m-1) d_x,

so G = B T^{-1}, expanded and truncated at total degree M in eta.  Every
product is a dealiased truncated convolution, which keeps the expansion
exactly graded by degree; as a consequence G(eta + c) = G(eta) holds at
every truncation order up to roundoff, not just in the limit.

All routines broadcast over leading batch axes of the coefficient arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import (
    Field1D,
    derivative,
    jmax_of,
    l2_norm,
    change_jmax,
    mean_mode,
    pairing,
    product,
    wavenumbers,
)


class DnoDivergenceError(RuntimeError):
    """Expansion terms stopped decaying: surface too large for the order."""


@dataclass(frozen=True)
class DnoConfig:
    """Expansion order and truncation; accuracy is O(|eta|^(order+1))."""

    order: int = 8
    jmax: int = 128
    check_decay: bool = True

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("expansion order must be >= 0")


# decay monitor: flag when ratios of consecutive term norms exceed this
# for three consecutive orders while the terms are still above roundoff
_DECAY_RATIO = 0.9
_FLOOR = 1e-13


def dno_apply_coeffs(eta: np.ndarray, psi: np.ndarray, order: int,
                     check_decay: bool = True) -> np.ndarray:
    """G(eta) psi in coefficients; batched over leading axes.

    ``eta`` and ``psi`` must share the mode axis length.  ``eta`` may be a
    single field broadcast against a batch of ``psi`` or vice versa.
    """
    eta = np.asarray(eta, dtype=complex)
    psi = np.asarray(psi, dtype=complex)
    jmax = jmax_of(psi)
    if jmax_of(eta) != jmax:
        raise ValueError("eta and psi must share a truncation")
    absd = np.abs(wavenumbers(jmax)).astype(float)

    # truncated powers eta^m / m!, built by repeated dealiased products
    pw = [None] * (order + 1)
    if order >= 1:
        pw[1] = eta
        for m in range(2, order + 1):
            pw[m] = product(pw[m - 1], eta, jmax) / m
    eta_x = derivative(eta)

    def mul(f, g):
        return product(f, g, jmax)

    # phi = T^{-1} psi, order by order
    phi = [psi]
    for k in range(1, order + 1):
        acc = np.zeros_like(psi)
        for m in range(1, k + 1):
            acc = acc + mul(pw[m], absd ** m * phi[k - m])
        phi.append(-acc)

    # G psi = sum over total degree of B_a phi[b]
    total = np.zeros_like(psi)
    terms = []
    for m in range(order + 1):
        g_m = absd * phi[m]  # B_0 phi[m]
        for a in range(1, m + 1):
            chunk = mul(pw[a], absd ** (a + 1) * phi[m - a])
            if a > 1:
                grad_part = mul(pw[a - 1], absd ** (a - 1) * derivative(phi[m - a]))
            else:
                grad_part = derivative(phi[m - a])
            chunk = chunk - mul(eta_x, grad_part)
            g_m = g_m + chunk
        total = total + g_m
        terms.append(g_m)

    if check_decay and order >= 3:
        norms = np.stack([l2_norm(t) for t in terms])  # (order+1, batch...)
        flat = norms.reshape(order + 1, -1)
        base = np.maximum(flat[0], _FLOOR)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = flat[1:] / np.where(flat[:-1] > 0, flat[:-1], np.inf)
        bad = (ratios > _DECAY_RATIO) & (flat[1:] > _FLOOR * base)
        run = np.zeros(flat.shape[1], dtype=int)
        worst = np.zeros(flat.shape[1], dtype=int)
        for m in range(bad.shape[0]):
            run = np.where(bad[m], run + 1, 0)
            worst = np.maximum(worst, run)
        if np.any(worst >= 3):
            idx = int(np.argmax(worst))
            raise DnoDivergenceError(
                "expansion terms fail to decay geometrically "
                f"(batch element {idx}); eta too large for order {order}")

    return total


def dno_apply(eta: Field1D, psi: Field1D, cfg: DnoConfig) -> Field1D:
    """G(eta) psi for real zero-mean psi; real-valued result."""
    if abs(psi.mean()) > 0:
        raise ValueError("psi must have zero mean")
    e = change_jmax(eta.coeffs, cfg.jmax)
    p = change_jmax(psi.coeffs, cfg.jmax)
    out = dno_apply_coeffs(e, p, cfg.order, check_decay=cfg.check_decay)
    real = eta.real and psi.real
    if real:
        out = 0.5 * (out + np.conj(out[::-1]))
    return Field1D(out, real=real, _checked=True)


def dno_bilinear(eta: Field1D, psi1: Field1D, psi2: Field1D, cfg: DnoConfig) -> float:
    """int_T psi1 G(eta) psi2 dx (the kinetic-energy pairing)."""
    g = dno_apply(eta, psi2, cfg)
    val = pairing(psi1.coeffs, g.coeffs)
    return float(np.real(val))


def dno_matrix(eta: Field1D, cfg: DnoConfig, jmax: int | None = None) -> np.ndarray:
    """Dense matrix of G(eta) on the basis e^{ijx}, |j| <= jmax.

    Column j holds the modes of G(eta) e^{ijx}; the j = 0 column is zero
    (constants have zero normal flux at every order).
    """
    jmax = cfg.jmax if jmax is None else jmax
    n = 2 * jmax + 1
    basis = np.eye(n, dtype=complex)
    e = np.broadcast_to(change_jmax(eta.coeffs, jmax), (n, n))
    cols = dno_apply_coeffs(e, basis, cfg.order, check_decay=False)
    return cols.T


def mean_flux(eta: Field1D, psi: Field1D, cfg: DnoConfig) -> float:
    """x-average of G(eta) psi; vanishes analytically (divergence form)."""
    g = dno_apply(eta, psi, cfg)
    return float(np.real(mean_mode(g.coeffs)))
