"""Linearized operator at a traveling embedding and its diagonal model.

The operator acting on two-component functions of (phi, x) is

    omega . d_phi + [ d_x V + G(eta) B      -G(eta)        ]
                    [ (1 + B V_x) + B G B   V d_x - B G    ]

with V and B the horizontal and vertical fluid velocities at the surface.
Because the embedding travels, every coefficient is a function of
Theta = phi - v x, so matrix entries vanish unless v.(l - l') + (j - j')
= 0 and the operator splits into momentum classes c = v . l + j.
Assembly works per class; a reference assembly on the full product basis
(no momentum bookkeeping) backs the structural tests.

Diagonalizing the blocks and tracking the branches labeled by (l = 0, j)
yields the diagonal model

    d_j = m1 j + (1 + m_half) sqrt(|j|) + m0 sign(j) + r_j,

whose coefficients quantify the transport correction, the dispersion
shift, and the same-modulus gap opening.  The transport-straightening
solver for the reduced vector field (omega - V~ v) . d_Theta lives here
too, since the average of V~ is the first-order transport coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import next_fast_len

from .dno import dno_apply_coeffs
from .qpsolver import TorusEmbedding, _grid_to_modes, _lattice, _slice_geometry, _slices_from_modes
from .spectral import (Field1D, change_jmax, derivative, from_grid, grid_points,
                       jmax_of, product, to_grid, torus_to_grid)
from .wavesys import SurfaceState


class BranchTrackingError(RuntimeError):
    """No eigenvector with the required dominant-mode mass was found."""


class SmallDivisorError(RuntimeError):
    """A divisor fell below the working diophantine threshold."""


# ----------------------------------------------------------------------
# surface velocities
# ----------------------------------------------------------------------

def compute_vb_coeffs(eta: np.ndarray, psi: np.ndarray, order: int):
    """V = psi_x - eta_x B and B = (G psi + eta_x psi_x) / (1 + eta_x^2).

    Batched over leading axes; returns (V, B) coefficient arrays.
    """
    jmax = jmax_of(psi)
    gpsi = dno_apply_coeffs(eta, psi, order, check_decay=False)
    eta_x = derivative(eta)
    psi_x = derivative(psi)
    num = product(eta_x, psi_x, jmax) + gpsi
    n3 = next_fast_len(3 * (2 * jmax + 1))
    etax_g = to_grid(eta_x, n3)
    b = from_grid(to_grid(num, n3) / (1.0 + etax_g * etax_g), jmax)
    v = psi_x - product(eta_x, b, jmax)
    return v, b


def compute_VB(s: SurfaceState, cfg) -> tuple[Field1D, Field1D]:
    """Public single-state wrapper; cfg is a DnoConfig."""
    e = change_jmax(s.eta.coeffs, cfg.jmax)
    p = change_jmax(s.psi.coeffs, cfg.jmax)
    v, b = compute_vb_coeffs(e, p, cfg.order)
    v = 0.5 * (v + np.conj(v[::-1]))
    b = 0.5 * (b + np.conj(b[::-1]))
    return Field1D(v, _checked=True), Field1D(b, _checked=True)


# ----------------------------------------------------------------------
# traveling coefficient profiles
# ----------------------------------------------------------------------

def velocity_profiles(emb: TorusEmbedding, lmax_out: int, n_theta: int,
                      slice_jmax: int, order: int):
    """Theta-profiles of V, B and of the slice fields, as flat mode arrays.

    Traveling structure makes the x = 0 values over a Theta-grid a faithful
    sample of the profiles.
    """
    nu = emb.nu
    lat, _, jx, scatter = _slice_geometry(emb.lmax, emb.velocity, slice_jmax)
    n = n_theta
    pts = grid_points(n)
    mesh = np.meshgrid(*([pts] * nu), indexing="ij")
    phis = np.stack([m.ravel() for m in mesh], axis=-1)
    eta_s = _slices_from_modes(emb.eta.reshape(-1), phis, lat, scatter)
    psi_s = _slices_from_modes(emb.psi.reshape(-1), phis, lat, scatter)
    v_s, b_s = compute_vb_coeffs(eta_s, psi_s, order)
    v_prof = _grid_to_modes(v_s.sum(axis=-1), n, lmax_out, nu)
    b_prof = _grid_to_modes(b_s.sum(axis=-1), n, lmax_out, nu)
    return v_prof, b_prof, phis


def _profile_product(p1: np.ndarray, p2: np.ndarray, lmax: int, nu: int) -> np.ndarray:
    """Dealiased product of two flat Theta-profiles at box lmax."""
    n = next_fast_len(2 * (2 * lmax + 1))
    shape = (n,) * nu
    a = torus_to_grid(p1.reshape((2 * lmax + 1,) * nu), shape)
    b = torus_to_grid(p2.reshape((2 * lmax + 1,) * nu), shape)
    return _grid_to_modes((a * b).reshape(-1), n, lmax, nu)


# ----------------------------------------------------------------------
# operator assembly
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class LinopTruncation:
    lmax: int                  # phi-box of the operator basis
    jmax: int                  # x-truncation (j = 0 excluded: zero-mean space)
    dno_order: int = 8
    n_theta: int | None = None


@dataclass
class ClassBlock:
    momentum: int
    ells: np.ndarray          # (n_c, nu) lattice rows
    js: np.ndarray            # x-wavenumbers, j = c - v . l, never 0
    matrix: np.ndarray        # (2 n_c, 2 n_c), eta rows first


@dataclass
class LinearizedOperator:
    """Momentum-block matrices of the linearized operator at an embedding."""

    blocks: dict[int, ClassBlock]
    omega: np.ndarray
    velocity: np.ndarray
    truncation: LinopTruncation
    flat: bool = False

    def eigenvalues(self) -> np.ndarray:
        vals = [np.linalg.eigvals(b.matrix) for b in self.blocks.values() if len(b.js)]
        return np.concatenate(vals) if vals else np.array([])

    def max_real_part(self, exclude_zero_class: bool = False) -> float:
        worst = 0.0
        for c, b in self.blocks.items():
            if exclude_zero_class and c == 0:
                continue
            if len(b.js):
                worst = max(worst, float(np.max(np.abs(np.real(np.linalg.eigvals(b.matrix))))))
        return worst


def _g_slice_matrices(emb: TorusEmbedding, jmax: int, order: int, phis: np.ndarray):
    """Per-slice DNO matrices on the basis |j| <= jmax for each Theta sample."""
    lat, _, jx_e, scatter = _slice_geometry(emb.lmax, emb.velocity, jmax)
    eta_s = _slices_from_modes(emb.eta.reshape(-1), phis, lat, scatter)  # (n_s, 2 jx_e + 1)
    n_s = eta_s.shape[0]
    nb = 2 * jmax + 1
    basis = np.zeros((nb, 2 * jx_e + 1), dtype=complex)
    basis[np.arange(nb), np.arange(-jmax, jmax + 1) + jx_e] = 1.0
    eta_b = np.broadcast_to(eta_s[:, None, :], (n_s, nb, 2 * jx_e + 1)).reshape(n_s * nb, -1)
    psi_b = np.broadcast_to(basis[None, :, :], (n_s, nb, 2 * jx_e + 1)).reshape(n_s * nb, -1)
    out = dno_apply_coeffs(eta_b, psi_b, order, check_decay=False)
    out = change_jmax(out, jmax).reshape(n_s, nb, nb)
    return np.swapaxes(out, 1, 2)  # (n_s, row j', column j)


def _kernel_from_slices(slice_mats: np.ndarray, n: int, mmax: int, nu: int) -> np.ndarray:
    """phi-Fourier transform of per-slice matrices, centered box |m| <= mmax.

    Returns shape ((2 mmax + 1)^nu, nb, nb) with the flat m-axis leading.
    """
    n_s, nb, _ = slice_mats.shape
    w = slice_mats.reshape((n,) * nu + (nb, nb))
    spec = np.fft.fftn(w, axes=tuple(range(nu))) / n ** nu
    idx = np.concatenate([np.arange(n - mmax, n), np.arange(mmax + 1)])
    for ax in range(nu):
        spec = np.take(spec, idx, axis=ax)
    return spec.reshape((2 * mmax + 1) ** nu, nb, nb)


def _box_flat_index(m: np.ndarray, mmax: int, nu: int) -> np.ndarray:
    """Flat index of lattice rows m inside the centered box of half-width mmax."""
    idx = np.zeros(m.shape[:-1], dtype=int)
    for ax in range(nu):
        idx = idx * (2 * mmax + 1) + (m[..., ax] + mmax)
    return idx


def assemble_linearized(emb: TorusEmbedding, trunc: LinopTruncation) -> LinearizedOperator:
    """Momentum-block assembly of the displayed operator at the embedding.

    The basis is e^{i(l . phi + j x)} with |l|_inf <= lmax, 0 < |j| <= jmax,
    organized by momentum class c = v . l + j.  Finite-rank corrections of
    the full theory are not reproduced; the spectrum of the displayed
    operator is the object under study.
    """
    nu, v = emb.nu, emb.velocity
    lmax, jmax = trunc.lmax, trunc.jmax
    if jmax < 2 * max(abs(s) for s in emb.sites.sites):
        raise ValueError("x-truncation too small: need jmax >= 2 max |S|")
    mmax = 2 * lmax
    n_theta = trunc.n_theta or next_fast_len(max(3 * (2 * lmax + 1), 2 * mmax + 2))

    slice_jmax_vb = max(jmax, 2 * int(np.sum(np.abs(v))) * emb.lmax)
    v_prof, b_prof, phis = velocity_profiles(emb, mmax, n_theta, slice_jmax_vb, trunc.dno_order)
    lat_m = _lattice(mmax, nu)
    vx_prof = -1j * (lat_m @ v) * v_prof               # d_x of a traveling profile
    bvx_prof = _profile_product(b_prof, vx_prof, mmax, nu)
    w_prof = bvx_prof.copy()
    w_prof[_box_flat_index(np.zeros((1, nu), dtype=int), mmax, nu)[0]] += 1.0  # 1 + B V_x

    g_slices = _g_slice_matrices(emb, jmax, trunc.dno_order, phis)
    g_kernel = _kernel_from_slices(g_slices, n_theta, mmax, nu)

    lat = _lattice(lmax, nu)
    vl = lat @ v
    blocks: dict[int, ClassBlock] = {}
    c_values = np.unique(np.concatenate([vl + j for j in range(-jmax, jmax + 1)]))
    for c in c_values:
        js = c - vl
        keep = (np.abs(js) <= jmax) & (js != 0)
        if not np.any(keep):
            continue
        ells = lat[keep]
        jlist = js[keep]
        n_c = len(jlist)
        diff = _box_flat_index(ells[:, None, :] - ells[None, :, :], mmax, nu)
        mv = v_prof[diff]
        mb = b_prof[diff]
        mw = w_prof[diff]
        jcol = jlist + jmax
        g = g_kernel[diff, jcol[:, None], jcol[None, :]]
        dx = np.diag(1j * jlist.astype(float))
        a11 = dx @ mv + g @ mb
        a12 = -g
        a21 = mw + mb @ g @ mb
        a22 = mv @ dx - mb @ g
        block = np.block([[a11, a12], [a21, a22]])
        freq = 1j * (ells @ emb.omega)
        block[np.arange(2 * n_c), np.arange(2 * n_c)] += np.concatenate([freq, freq])
        blocks[int(c)] = ClassBlock(int(c), ells, jlist, block)
    return LinearizedOperator(blocks, emb.omega.copy(), v.copy(), trunc)


def assemble_full_reference(emb: TorusEmbedding, trunc: LinopTruncation):
    """Dense assembly on the full product basis, no momentum bookkeeping.

    Returns (matrix, basis) where basis is a list of (l tuple, j, component).
    Independent of the class-block path: multiplication kernels come from a
    joint (phi, x)-grid transform and retain any momentum-violating entries
    they numerically have, so scans of the block structure are meaningful.
    """
    nu, v = emb.nu, emb.velocity
    lmax, jmax = trunc.lmax, trunc.jmax
    mmax = 2 * lmax
    n_theta = trunc.n_theta or next_fast_len(max(3 * (2 * lmax + 1), 2 * mmax + 2))
    slice_jmax_vb = max(jmax, 2 * int(np.sum(np.abs(v))) * emb.lmax)

    # sample V, B on a (phi, x) product grid through their slices
    lat_e, _, jx, scatter = _slice_geometry(emb.lmax, v, slice_jmax_vb)
    pts = grid_points(n_theta)
    mesh = np.meshgrid(*([pts] * nu), indexing="ij")
    phis = np.stack([m.ravel() for m in mesh], axis=-1)
    eta_s = _slices_from_modes(emb.eta.reshape(-1), phis, lat_e, scatter)
    psi_s = _slices_from_modes(emb.psi.reshape(-1), phis, lat_e, scatter)
    v_s, b_s = compute_vb_coeffs(eta_s, psi_s, trunc.dno_order)
    vx_s = derivative(v_s)

    djmax = 2 * jmax
    nxg = next_fast_len(2 * (2 * djmax + 1))

    def joint_kernel(slices):
        vals = to_grid(change_jmax(slices, djmax), nxg)  # (n_s, nxg)
        spec = np.fft.fft(vals, axis=-1) / nxg
        idx = np.concatenate([np.arange(nxg - djmax, nxg), np.arange(djmax + 1)])
        xmodes = spec[:, idx]                            # (n_s, 2 djmax + 1)
        return _grid_to_modes(np.moveaxis(xmodes, -1, 0), n_theta, mmax, nu)  # (2djmax+1, (2mmax+1)^nu)

    kv = joint_kernel(v_s)
    kb = joint_kernel(b_s)
    kbvx = joint_kernel(product(b_s, vx_s, djmax))
    g_slices = _g_slice_matrices(emb, jmax, trunc.dno_order, phis)
    g_kernel = _kernel_from_slices(g_slices, n_theta, mmax, nu)

    lat = _lattice(lmax, nu)
    basis = [(tuple(l), j) for l in lat for j in range(-jmax, jmax + 1) if j != 0]
    nb = len(basis)

    def mult_matrix(kernel):
        m = np.zeros((nb, nb), dtype=complex)
        for r, (l1, j1) in enumerate(basis):
            for s, (l2, j2) in enumerate(basis):
                dj = j1 - j2
                if abs(dj) > djmax:
                    continue
                dl = np.array(l1) - np.array(l2)
                if np.max(np.abs(dl)) > mmax:
                    continue
                m[r, s] = kernel[dj + djmax, _box_flat_index(dl, mmax, nu)]
        return m

    mv, mb, mbvx = mult_matrix(kv), mult_matrix(kb), mult_matrix(kbvx)
    mw = mbvx + np.eye(nb)
    g = np.zeros((nb, nb), dtype=complex)
    for r, (l1, j1) in enumerate(basis):
        for s, (l2, j2) in enumerate(basis):
            dl = np.array(l1) - np.array(l2)
            if np.max(np.abs(dl)) > mmax:
                continue
            g[r, s] = g_kernel[_box_flat_index(dl, mmax, nu), j1 + jmax, j2 + jmax]
    dx = np.diag([1j * j for _, j in basis])
    freq = np.diag([1j * float(np.dot(l, emb.omega)) for l, _ in basis])
    a11 = dx @ mv + g @ mb + freq
    a12 = -g
    a21 = mw + mb @ g @ mb
    a22 = mv @ dx - mb @ g + freq
    full = np.block([[a11, a12], [a21, a22]])
    return full, [(l, j, comp) for comp in ("eta", "psi") for l, j in basis]


def flat_operator(ts, omega: np.ndarray, trunc: LinopTruncation) -> LinearizedOperator:
    """The operator at the zero embedding (V = B = 0, G = |D|)."""
    emb = TorusEmbedding(ts, np.zeros((3,) * ts.nu, dtype=complex),
                         np.zeros((3,) * ts.nu, dtype=complex), np.asarray(omega, dtype=float))
    op = assemble_linearized(emb.with_lmax(trunc.lmax), trunc)
    op.flat = True
    return op


# ----------------------------------------------------------------------
# spectrum extraction and the diagonal model
# ----------------------------------------------------------------------

@dataclass
class DiagonalModel:
    """Fitted d_j = transport j + (1 + sqrt_correction) sqrt|j|
    + sign_offset sign(j) + r_j."""

    transport: float
    sqrt_correction: float
    sign_offset: float
    residual_js: np.ndarray
    residuals: np.ndarray
    fit_rms: float
    sup_weighted_tail: float          # sup_j |j|^{-1/2} |r_j|
    d_values: dict
    max_real_part: float = 0.0

    def d(self, j):
        j = np.asarray(j, dtype=float)
        base = (self.transport * j + (1.0 + self.sqrt_correction) * np.sqrt(np.abs(j))
                + self.sign_offset * np.sign(j))
        return base

    def tail_bound(self, radius: float) -> float:
        """2 sup_{|n| >= radius} |r_n| over the fitted range."""
        sel = np.abs(self.residual_js) >= radius
        if not np.any(sel):
            return 0.0
        return 2.0 * float(np.max(np.abs(self.residuals[sel])))


def ideal_model(transport: float = 0.0, sqrt_correction: float = 0.0,
                sign_offset: float = 0.0) -> DiagonalModel:
    """Closed-form model with no tail, for small-divisor studies."""
    return DiagonalModel(transport, sqrt_correction, sign_offset,
                         np.array([]), np.array([]), 0.0, 0.0, {})


def branch_values(op: LinearizedOperator, js, dominance: float = 0.5) -> dict:
    """d_j for the requested labels via dominant-mode eigenvector matching.

    For label j the class c = j is diagonalized; among eigenvectors whose
    (l = 0, j) mass reaches ``dominance``, the one rotating like the
    complex variable u (rather than its conjugate) defines d_j.
    """
    out = {}
    for j in js:
        blk = op.blocks.get(int(j))
        if blk is None:
            raise BranchTrackingError(f"class {j} outside the assembled truncation")
        sel = np.flatnonzero((blk.js == j) & np.all(blk.ells == 0, axis=1))
        if len(sel) != 1:
            raise BranchTrackingError(f"label (l=0, j={j}) not in the class basis")
        k0 = int(sel[0])
        n_c = len(blk.js)
        vals, vecs = np.linalg.eig(blk.matrix)
        best, best_mass = None, dominance
        for i in range(len(vals)):
            w = vecs[:, i]
            mass = (abs(w[k0]) ** 2 + abs(w[n_c + k0]) ** 2) / float(np.sum(np.abs(w) ** 2))
            if mass < best_mass:
                continue
            u_amp = abs(abs(j) ** -0.25 * w[k0] + 1j * abs(j) ** 0.25 * w[n_c + k0])
            ubar_amp = abs(abs(j) ** -0.25 * w[k0] - 1j * abs(j) ** 0.25 * w[n_c + k0])
            if u_amp <= ubar_amp:
                continue
            best, best_mass = float(np.imag(vals[i])), mass
        if best is None:
            raise BranchTrackingError(
                f"no u-branch eigenvector with mass >= {dominance} at j={j}")
        out[int(j)] = best
    return out


def diagonalize_and_fit(op: LinearizedOperator, j_min: int | None = None,
                        j_fit: int | None = None, dominance: float = 0.5,
                        max_site: int | None = None) -> DiagonalModel:
    """Fit the diagonal model on the window j_min <= |j| <= j_fit.

    Defaults: j_min = max |S| + 3 (clear of tangential hybridization) and
    j_fit = jmax / 2 (clear of truncation edge effects).
    """
    jmax = op.truncation.jmax
    if max_site is None:
        max_site = int(np.max(np.abs(op.velocity)))
    j_min = j_min if j_min is not None else max_site + 3
    j_fit = j_fit if j_fit is not None else jmax // 2
    js = [j for a in range(j_min, j_fit + 1) for j in (a, -a)]
    d = branch_values(op, js, dominance=dominance)
    jarr = np.array(sorted(d.keys()), dtype=float)
    darr = np.array([d[int(j)] for j in jarr])
    y = darr - np.sqrt(np.abs(jarr))
    design = np.stack([jarr, np.sqrt(np.abs(jarr)), np.sign(jarr)], axis=1)
    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    sup_w = float(np.max(np.abs(resid) / np.sqrt(np.abs(jarr))))
    return DiagonalModel(
        transport=float(coef[0]), sqrt_correction=float(coef[1]), sign_offset=float(coef[2]),
        residual_js=jarr, residuals=resid, fit_rms=float(np.sqrt(np.mean(resid ** 2))),
        sup_weighted_tail=sup_w, d_values={int(j): d[int(j)] for j in jarr},
        max_real_part=op.max_real_part())


# ----------------------------------------------------------------------
# transport straightening on the reduced torus
# ----------------------------------------------------------------------

def straighten_transport(v_profile: np.ndarray, omega: np.ndarray, velocity,
                         gamma: float, tau: float, tol: float = 1e-12,
                         max_sweeps: int = 50):
    """Straighten (omega - V~(Theta) v) . d_Theta to constant coefficients.

    Iteratively solves (omega - V~ v) . d_Theta q = V~ - m1 with m1 fixed
    each sweep by the solvability average.  Divisors below
    gamma <l>^{-tau} / 2 abort with SmallDivisorError.  Returns
    (m1, q_profile, defect) where the defect is the sup-norm of
    (omega - V~ v) . d_Theta (Theta + v q) - (omega - m1 v).
    """
    v_profile = np.asarray(v_profile, dtype=complex)
    nu = v_profile.ndim
    omega = np.asarray(omega, dtype=float)
    vel = np.array(velocity)
    lmax = (v_profile.shape[0] - 1) // 2
    lat = _lattice(lmax, nu)
    omega_l = (lat @ omega).reshape(v_profile.shape)
    vl = (lat @ vel).reshape(v_profile.shape)
    bracket = np.sqrt(1.0 + np.sum(lat.astype(float) ** 2, axis=1)).reshape(v_profile.shape)
    nz = np.ones_like(omega_l, dtype=bool)
    nz[(lmax,) * nu] = False
    small = nz & (np.abs(omega_l) < 0.5 * gamma * bracket ** (-tau))
    if np.any(small):
        where = lat[small.reshape(-1)][0]
        raise SmallDivisorError(f"divisor below gamma <l>^-tau / 2 at ell={tuple(where)}")

    n = next_fast_len(2 * (2 * lmax + 1))
    shape = (n,) * nu
    from .spectral import torus_to_grid
    v_mean = float(np.real(v_profile[(lmax,) * nu]))
    q = np.zeros_like(v_profile)
    m1 = v_mean
    defect = np.inf
    for _ in range(max_sweeps):
        # transported term (V~ v) . d_Theta q on the grid
        dq = 1j * vl * q
        prod = _grid_to_modes((torus_to_grid(v_profile, shape) * torus_to_grid(dq, shape)).reshape(-1),
                              n, lmax, nu).reshape(v_profile.shape)
        rhs = v_profile + prod
        m1 = float(np.real(rhs[(lmax,) * nu]))
        rhs = rhs.copy()
        rhs[(lmax,) * nu] = 0.0
        q_new = np.zeros_like(rhs)
        q_new[nz] = rhs[nz] / (1j * omega_l[nz])
        # defect of the current straightening
        dq_new = 1j * vl * q_new
        conj_term = _grid_to_modes(
            (torus_to_grid(v_profile, shape) * torus_to_grid(dq_new, shape)).reshape(-1),
            n, lmax, nu).reshape(v_profile.shape)
        delta = 1j * omega_l * q_new - conj_term - v_profile
        delta[(lmax,) * nu] += m1
        defect_new = float(np.max(np.abs(torus_to_grid(delta, shape)))) * float(np.linalg.norm(vel))
        q = q_new
        if defect_new <= tol or abs(defect_new - defect) < 1e-16:
            defect = defect_new
            break
        defect = defect_new
    return m1, q, defect
