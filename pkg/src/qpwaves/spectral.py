"""Fourier-side representation of periodic fields on the circle and on tori.

Convention: a field f on T = R/(2 pi Z) is stored through its modes

    f(x) = sum_{|j| <= jmax} c_j e^{i j x},

kept as a dense complex array whose last axis has length 2*jmax + 1 and
index k corresponds to wavenumber k - jmax.  No 2 pi factor sits in the
basis, so integrals over T carry an explicit 2 pi weight.  Products are
formed on zero-padded grids (2x resolution for quadratic terms, 3x for
cubic ones), which makes truncated products of band-limited fields exact
convolutions.

All array-level helpers broadcast over leading axes, so a batch of fields
can be transformed, multiplied and filtered in single vectorized calls.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.fft import next_fast_len

TWO_PI = 2.0 * np.pi


# ----------------------------------------------------------------------
# array-level primitives (coefficients on the last axis, batched)
# ----------------------------------------------------------------------

def wavenumbers(jmax: int) -> np.ndarray:
    return np.arange(-jmax, jmax + 1)


def grid_points(n: int) -> np.ndarray:
    return np.arange(n) * (TWO_PI / n)


def jmax_of(coeffs: np.ndarray) -> int:
    n = coeffs.shape[-1]
    if n % 2 == 0:
        raise ValueError("coefficient arrays must have odd length 2*jmax+1")
    return (n - 1) // 2


def change_jmax(coeffs: np.ndarray, jmax_new: int) -> np.ndarray:
    """Zero-pad or truncate the centered mode axis to |j| <= jmax_new."""
    jmax = jmax_of(coeffs)
    if jmax_new == jmax:
        return coeffs
    out = np.zeros(coeffs.shape[:-1] + (2 * jmax_new + 1,), dtype=complex)
    m = min(jmax, jmax_new)
    out[..., jmax_new - m:jmax_new + m + 1] = coeffs[..., jmax - m:jmax + m + 1]
    return out


def to_grid(coeffs: np.ndarray, n: int) -> np.ndarray:
    """Values f(x_m) on the uniform grid x_m = 2 pi m / n (n > 2*jmax)."""
    jmax = jmax_of(coeffs)
    if n < 2 * jmax + 1:
        raise ValueError("grid too coarse for the stored modes")
    spec = np.zeros(coeffs.shape[:-1] + (n,), dtype=complex)
    spec[..., :jmax + 1] = coeffs[..., jmax:]
    spec[..., n - jmax:] = coeffs[..., :jmax]
    return np.fft.ifft(spec, axis=-1) * n


def from_grid(values: np.ndarray, jmax: int) -> np.ndarray:
    """Modes |j| <= jmax of grid samples (exact for band-limited data)."""
    n = values.shape[-1]
    if n < 2 * jmax + 1:
        raise ValueError("grid too coarse for the requested modes")
    spec = np.fft.fft(values, axis=-1) / n
    return np.concatenate([spec[..., n - jmax:], spec[..., :jmax + 1]], axis=-1)


def product(c1: np.ndarray, c2: np.ndarray, jmax_out: int | None = None) -> np.ndarray:
    """Dealiased product of two fields, truncated to jmax_out.

    The working grid has 2x the base resolution, which holds every mode of
    the quadratic product exactly; the result is the exact convolution
    restricted to |j| <= jmax_out.
    """
    jmax = max(jmax_of(c1), jmax_of(c2))
    if jmax_out is None:
        jmax_out = jmax
    n = next_fast_len(2 * (2 * jmax + 1))
    vals = to_grid(change_jmax(c1, jmax), n) * to_grid(change_jmax(c2, jmax), n)
    return from_grid(vals, jmax_out)


def derivative(coeffs: np.ndarray) -> np.ndarray:
    return 1j * wavenumbers(jmax_of(coeffs)) * coeffs


def mean_mode(coeffs: np.ndarray) -> np.ndarray:
    return coeffs[..., jmax_of(coeffs)]


def drop_mean(coeffs: np.ndarray) -> np.ndarray:
    out = coeffs.copy()
    out[..., jmax_of(coeffs)] = 0.0
    return out


def integral(coeffs: np.ndarray) -> np.ndarray:
    """int_T f dx = 2 pi c_0."""
    return TWO_PI * mean_mode(coeffs)


def pairing(c1: np.ndarray, c2: np.ndarray) -> np.ndarray:
    """int_T f g dx = 2 pi sum_j c1_j c2_{-j} (no conjugation)."""
    j1, j2 = jmax_of(c1), jmax_of(c2)
    jmax = max(j1, j2)
    a = change_jmax(c1, jmax)
    b = change_jmax(c2, jmax)
    return TWO_PI * np.sum(a * b[..., ::-1], axis=-1)


def l2_norm(coeffs: np.ndarray) -> np.ndarray:
    """L2(T) norm, sqrt(2 pi sum |c_j|^2)."""
    return np.sqrt(TWO_PI * np.sum(np.abs(coeffs) ** 2, axis=-1))


def shift(coeffs: np.ndarray, a: float) -> np.ndarray:
    """Modes of x -> f(x + a)."""
    return coeffs * np.exp(1j * wavenumbers(jmax_of(coeffs)) * a)


def reflect(coeffs: np.ndarray) -> np.ndarray:
    """Modes of x -> f(-x)."""
    return coeffs[..., ::-1]


def hermitian_defect(coeffs: np.ndarray) -> float:
    """Max deviation from c_{-j} = conj(c_j)."""
    return float(np.max(np.abs(coeffs - np.conj(coeffs[..., ::-1]))))


def hermitize(coeffs: np.ndarray) -> np.ndarray:
    return 0.5 * (coeffs + np.conj(coeffs[..., ::-1]))


# ----------------------------------------------------------------------
# single fields on the circle
# ----------------------------------------------------------------------

class Field1D:
    """One real or complex periodic field, |j| <= jmax.

    Thin value-type wrapper over a centered coefficient vector; the heavy
    lifting lives in the array helpers above so batches of fields can skip
    the wrapper entirely.  Instances are immutable by convention.
    """

    __slots__ = ("coeffs", "jmax", "real")

    def __init__(self, coeffs: np.ndarray, real: bool = True, _checked: bool = False):
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.ndim != 1:
            raise ValueError("Field1D stores a single field; use array helpers for batches")
        self.coeffs = coeffs
        self.jmax = jmax_of(coeffs)
        self.real = real
        if real and not _checked:
            defect = hermitian_defect(coeffs)
            scale = max(1.0, float(np.max(np.abs(coeffs))))
            if defect > 1e-12 * scale:
                raise ValueError(f"coefficients violate Hermitian symmetry (defect {defect:.3e})")

    # -- constructors ---------------------------------------------------

    @classmethod
    def zero(cls, jmax: int) -> "Field1D":
        return cls(np.zeros(2 * jmax + 1, dtype=complex), _checked=True)

    @classmethod
    def from_modes(cls, jmax: int, modes: dict, real: bool = True) -> "Field1D":
        """Build from {wavenumber: coefficient}; Hermitian completion if real.

        For real fields a mode given only at j > 0 is mirrored to -j.
        """
        c = np.zeros(2 * jmax + 1, dtype=complex)
        for j, v in modes.items():
            if abs(j) > jmax:
                raise ValueError(f"mode {j} outside truncation {jmax}")
            c[j + jmax] = v
        if real:
            for j, v in modes.items():
                if j != 0 and (-j) not in modes:
                    c[-j + jmax] = np.conj(v)
        return cls(c, real=real)

    @classmethod
    def from_function(cls, fn: Callable[[np.ndarray], np.ndarray], jmax: int,
                      oversample: int = 4, real: bool = True) -> "Field1D":
        """Collocate a smooth function; accurate once its spectrum fits 4x jmax."""
        n = next_fast_len(oversample * (2 * jmax + 1))
        vals = fn(grid_points(n))
        return cls(from_grid(np.asarray(vals, dtype=complex), jmax), real=real)

    # -- algebra ---------------------------------------------------------

    def __add__(self, other: "Field1D") -> "Field1D":
        jmax = max(self.jmax, other.jmax)
        return Field1D(change_jmax(self.coeffs, jmax) + change_jmax(other.coeffs, jmax),
                       real=self.real and other.real, _checked=True)

    def __sub__(self, other: "Field1D") -> "Field1D":
        jmax = max(self.jmax, other.jmax)
        return Field1D(change_jmax(self.coeffs, jmax) - change_jmax(other.coeffs, jmax),
                       real=self.real and other.real, _checked=True)

    def __rmul__(self, a: float) -> "Field1D":
        return Field1D(a * self.coeffs, real=self.real and not isinstance(a, complex), _checked=True)

    def __mul__(self, other):
        if isinstance(other, Field1D):
            return Field1D(product(self.coeffs, other.coeffs, max(self.jmax, other.jmax)),
                           real=self.real and other.real, _checked=True)
        return self.__rmul__(other)

    def dx(self) -> "Field1D":
        return Field1D(derivative(self.coeffs), real=self.real, _checked=True)

    def with_jmax(self, jmax: int) -> "Field1D":
        return Field1D(change_jmax(self.coeffs, jmax), real=self.real, _checked=True)

    # -- queries ----------------------------------------------------------

    def coeff(self, j: int) -> complex:
        return complex(self.coeffs[j + self.jmax])

    def mean(self) -> complex:
        return complex(mean_mode(self.coeffs))

    def norm(self) -> float:
        return float(l2_norm(self.coeffs))

    def grid(self, n: int | None = None) -> np.ndarray:
        n = n if n is not None else next_fast_len(2 * (2 * self.jmax + 1))
        vals = to_grid(self.coeffs, n)
        return vals.real if self.real else vals

    def __repr__(self) -> str:
        return f"Field1D(jmax={self.jmax}, norm={self.norm():.3e}, real={self.real})"


# ----------------------------------------------------------------------
# Fourier multipliers
# ----------------------------------------------------------------------

class MeanModeError(ValueError):
    """A multiplier undefined at j = 0 met a field with nonzero mean."""


@dataclass(frozen=True)
class Multiplier:
    """Real Fourier multiplier j -> symbol(j).

    ``zero_mean_only`` marks symbols undefined at j = 0 (negative powers of
    |D|); applying one to a field with a nonzero mean raises MeanModeError.
    """

    symbol: Callable[[np.ndarray], np.ndarray]
    name: str = "multiplier"
    zero_mean_only: bool = False

    def values(self, jmax: int) -> np.ndarray:
        j = wavenumbers(jmax)
        vals = np.empty(2 * jmax + 1)
        nz = j != 0
        vals[nz] = self.symbol(j[nz])
        vals[jmax] = 0.0 if self.zero_mean_only else float(self.symbol(np.array([0]))[0])
        return vals

    def apply_coeffs(self, coeffs: np.ndarray) -> np.ndarray:
        jmax = jmax_of(coeffs)
        if self.zero_mean_only and np.any(mean_mode(coeffs) != 0):
            raise MeanModeError(f"{self.name} is undefined at j=0 but the field has a mean component")
        return coeffs * self.values(jmax)

    def __call__(self, f: Field1D) -> Field1D:
        return Field1D(self.apply_coeffs(f.coeffs), real=f.real, _checked=True)


def multiplier_apply(f: Field1D, m: Multiplier) -> Field1D:
    return m(f)


def abs_d(power: float = 1.0) -> Multiplier:
    """|D|^power; undefined at the mean mode for negative powers."""
    return Multiplier(lambda j: np.abs(j) ** float(power), name=f"|D|^{power}",
                      zero_mean_only=power < 0)


def sign_d() -> Multiplier:
    return Multiplier(lambda j: np.sign(j).astype(float), name="sign(D)")


def zero_mean_projection() -> Multiplier:
    return Multiplier(lambda j: np.ones_like(j, dtype=float) * (j != 0), name="P0")


# ----------------------------------------------------------------------
# fields on T^nu tori (phi modes, optionally a trailing x-mode axis)
# ----------------------------------------------------------------------

def torus_to_grid(coeffs: np.ndarray, axes_sizes: tuple[int, ...]) -> np.ndarray:
    """Inverse transform over the leading len(axes_sizes) centered mode axes."""
    out = coeffs
    for ax, n in enumerate(axes_sizes):
        lmax = (out.shape[ax] - 1) // 2
        if n < 2 * lmax + 1:
            raise ValueError("torus grid too coarse")
        sl_lo = [slice(None)] * out.ndim
        spec_shape = list(out.shape)
        spec_shape[ax] = n
        spec = np.zeros(spec_shape, dtype=complex)
        sl_a = sl_lo.copy(); sl_a[ax] = slice(0, lmax + 1)
        sl_b = sl_lo.copy(); sl_b[ax] = slice(n - lmax, n)
        sl_c = sl_lo.copy(); sl_c[ax] = slice(lmax, 2 * lmax + 1)
        sl_d = sl_lo.copy(); sl_d[ax] = slice(0, lmax)
        spec[tuple(sl_a)] = out[tuple(sl_c)]
        spec[tuple(sl_b)] = out[tuple(sl_d)]
        out = np.fft.ifft(spec, axis=ax) * n
    return out


def torus_from_grid(values: np.ndarray, lmax: int, naxes: int) -> np.ndarray:
    """Centered modes |l_i| <= lmax from grid samples over the leading axes."""
    out = values.astype(complex)
    for ax in range(naxes):
        n = out.shape[ax]
        if n < 2 * lmax + 1:
            raise ValueError("torus grid too coarse")
        spec = np.fft.fft(out, axis=ax) / n
        sl = [slice(None)] * out.ndim
        sl_a = sl.copy(); sl_a[ax] = slice(n - lmax, n)
        sl_b = sl.copy(); sl_b[ax] = slice(0, lmax + 1)
        out = np.concatenate([spec[tuple(sl_a)], spec[tuple(sl_b)]], axis=ax)
    return out


def torus_wavevectors(lmax: int, nu: int) -> np.ndarray:
    """All lattice points of the box |l|_inf <= lmax, shape ((2L+1)^nu, nu)."""
    axes = [wavenumbers(lmax)] * nu
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass(frozen=True)
class TorusField:
    """Modes u_{l,j} e^{i(l.phi + j x)}, |l|_inf <= lmax, |j| <= jmax.

    ``coeffs`` has nu leading centered axes for l and one trailing centered
    axis for j.  Components of vector-valued fields are separate instances.
    """

    coeffs: np.ndarray
    nu: int = field(default=1)

    def __post_init__(self):
        if self.coeffs.ndim != self.nu + 1:
            raise ValueError("expected nu phi-axes plus one x-axis")

    @property
    def lmax(self) -> int:
        return (self.coeffs.shape[0] - 1) // 2

    @property
    def jmax(self) -> int:
        return (self.coeffs.shape[-1] - 1) // 2

    def hermitian_defect(self) -> float:
        flipped = self.coeffs[(slice(None, None, -1),) * (self.nu + 1)]
        return float(np.max(np.abs(self.coeffs - np.conj(flipped))))


def torus_directional_derivative(w: TorusField, omega: np.ndarray) -> TorusField:
    """omega . d/dphi as the multiplier i (omega . l)."""
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (w.nu,):
        raise ValueError("frequency vector length must match the torus dimension")
    lmax = w.lmax
    phase = np.zeros(w.coeffs.shape[:w.nu])
    for ax in range(w.nu):
        shape = [1] * w.nu
        shape[ax] = 2 * lmax + 1
        phase = phase + omega[ax] * wavenumbers(lmax).reshape(shape)
    return TorusField(1j * phase[..., None] * w.coeffs, nu=w.nu)
