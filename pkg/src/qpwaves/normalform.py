"""Quartic normal form on the tangential sites: twist matrix and maps.

Restricted to the tangential modes, the quartic part of the normalized
Hamiltonian is the quadratic form (1/2) A I . I in the actions, with

    A_kk        = |k|^3 / (2 pi)
    A_{k1 k2}   = max(|k1|, |k2|) min(|k1|, |k2|)^2 / pi   if sign k1 = sign k2
    A_{k1 k2}   = 0                                        otherwise,

so the frequency-to-amplitude map is omega(I) = omega_bar + A I to first
order (the quadratic remainder carries no computable coefficients and is
measured downstream instead of modeled).

Action convention: these formulas take the action normalization in which
the quadratic energy reads sum sqrt(|j|) I_j.  The explicit first-order
solution built by the solver parameterizes amplitudes by zeta with
|u_j|^2 = zeta_j in this package's Fourier convention; the two differ by
the factor AMPLITUDE_ACTION_RATIO = 2 pi, which the solver cross-check
measures empirically.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .resonance import TangentialSet

AMPLITUDE_ACTION_RATIO = 2.0 * np.pi


class SingularTwistError(np.linalg.LinAlgError):
    """The twist matrix is singular; the frequency map cannot be inverted."""


class NegativeActionWarning(UserWarning):
    """Inversion landed outside the positive cone of actions."""


def _int_matrix(ts: TangentialSet) -> list[list[int]]:
    """2 pi A as an exact integer matrix."""
    sites = ts.sites
    nu = len(sites)
    mat = [[0] * nu for _ in range(nu)]
    for i, ki in enumerate(sites):
        for j, kj in enumerate(sites):
            if i == j:
                mat[i][j] = abs(ki) ** 3
            elif (ki > 0) == (kj > 0):
                hi, lo = max(abs(ki), abs(kj)), min(abs(ki), abs(kj))
                mat[i][j] = 2 * hi * lo * lo
    return mat


def _int_det(mat: list[list[int]]) -> int:
    """Fraction-free (Bareiss) determinant of a small integer matrix."""
    a = [row[:] for row in mat]
    n = len(a)
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for r in range(k + 1, n):
                if a[r][k] != 0:
                    a[k], a[r] = a[r], a[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


@dataclass(frozen=True)
class TwistMatrix:
    """Symmetric nu x nu action Hessian of the quartic normal form."""

    sites: tuple[int, ...]
    matrix: np.ndarray          # float entries, 1/(2 pi) times the integers
    integer_numerator: tuple    # exact 2 pi A

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix))

    def det_exact_numerator(self) -> int:
        """det(2 pi A) as an exact integer; zero iff A is singular."""
        return _int_det([list(r) for r in self.integer_numerator])


def twist_matrix(ts: TangentialSet) -> TwistMatrix:
    num = _int_matrix(ts)
    mat = np.array(num, dtype=float) / (2.0 * np.pi)
    return TwistMatrix(ts.sites, mat, tuple(tuple(r) for r in num))


def twist_det_exact(ts: TangentialSet) -> int:
    """det(2 pi A) as an integer, for exact nondegeneracy certificates."""
    return _int_det(_int_matrix(ts))


def linear_frequencies(ts: TangentialSet) -> np.ndarray:
    """omega_bar = (sqrt(|j|) for the tangential sites, in site order."""
    return ts.frequencies()


def frequency_amplitude(ts: TangentialSet, zeta) -> np.ndarray:
    """First-order frequency of the torus with actions zeta: omega_bar + A zeta."""
    zeta = np.asarray(zeta, dtype=float)
    if zeta.shape != (ts.nu,):
        raise ValueError("actions must have one component per site")
    return linear_frequencies(ts) + twist_matrix(ts).matrix @ zeta


def invert_frequency_amplitude(ts: TangentialSet, omega_target) -> np.ndarray:
    """Actions with frequency omega_target, solving A zeta = omega - omega_bar.

    Raises SingularTwistError if A is singular (exact integer test) and
    warns when the solution leaves the positive cone.
    """
    omega_target = np.asarray(omega_target, dtype=float)
    tw = twist_matrix(ts)
    if tw.det_exact_numerator() == 0:
        raise SingularTwistError(f"twist matrix of sites {ts.sites} is singular")
    zeta = np.linalg.solve(tw.matrix, omega_target - linear_frequencies(ts))
    if np.any(zeta <= 0):
        warnings.warn(
            f"actions {zeta} are not all positive: outside the bifurcation cone",
            NegativeActionWarning, stacklevel=2)
    return zeta


def birkhoff_energy(ts: TangentialSet, actions) -> float:
    """Restricted normal-form energy sum sqrt(|k|) I_k + (1/2) A I . I."""
    actions = np.asarray(actions, dtype=float)
    if np.any(actions < 0):
        raise ValueError("actions must be nonnegative")
    a = twist_matrix(ts).matrix
    return float(linear_frequencies(ts) @ actions + 0.5 * actions @ a @ actions)
