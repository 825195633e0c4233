"""Operator kernels, the twisted representation, and the Moyal product.

The quantization map sends a phase-space symbol a to the integral kernel

    K_a(Y, Z) = alpha(Y, Z) (2 pi)^{-d} INT a(m(Y,Z), xi) e^{i<xi, Y*(-Z)>} dxi

with m(Y, Z) = INT_0^1 (s(Z*(-Y))) * Y ds, the group midpoint (equal to
(Y+Z)/2 on algebras of class <= 1). With the phase-space cell
(2 pi)^{-d} h^d dxi^d on symbols and h^{2d} on kernels the map is isometric,
which fixes every constant downstream.

Discretization notes. The partial transform b(m, w) of the symbol decays in
w, but a plain DFT evaluation would make it periodic with period 2L, folding
O(1) mass onto the far anti-diagonal of the kernel where the true values
vanish. All evaluations therefore use zero-extension semantics: b is taken
as zero outside its |w_i| < L data window on axes where w is an on-grid
difference, and axes where w picks up off-grid bracket terms use a doubled
spectral grid (2N modes at spacing dxi/2, the exact representation of the
zero-padded window on |w| < 2L) plus explicit masking beyond. The midpoint
slot is evaluated by exact trigonometric interpolation: spectral zero
padding for half-grid points, nonuniform mode sums in general. Both give
the same interpolant a plain nonuniform-DFT definition would, so the fast
and the general assembly agree to round-off where both apply.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import lie_core, magnetic
from .errors import ShapeError, WrongClass
from .symbol_space import ConfigField, SymbolField, centered_dft, fourier_g

TWO_PI = 2.0 * np.pi
_PAIR_BUDGET = 1 << 17
_MAX_WORK_BYTES = 1.2e9


class IntegralKernel:
    """Kernel matrix on the position grid: rows indexed by Y, columns by Z."""

    def __init__(self, grid, values):
        values = np.asarray(values, dtype=complex)
        n = grid.points_per_axis ** grid.dim
        if values.shape != (n, n):
            raise ShapeError(f"kernel must be a {n} x {n} matrix, got {values.shape}")
        self.grid = grid
        self.values = values

    @property
    def cell_volume(self):
        g = self.grid
        return g.h ** (2 * g.dim)


@dataclass(eq=False)
class WeylContext:
    """Bundles the algebra, the potential, and the grid for kernel work."""

    algebra: lie_core.NilpotentLieAlgebra
    potential: magnetic.MagneticPotential
    grid: object
    use_twostep_fastpath: bool = True
    threads: int = None
    _cache: dict = field(default_factory=dict, repr=False)


def make_context(algebra, potential, grid, use_twostep_fastpath=True, threads=None):
    if grid.dim != algebra.dim:
        raise ShapeError(f"grid dimension {grid.dim} != algebra dimension {algebra.dim}")
    if potential.algebra.dim != algebra.dim:
        raise ShapeError("potential lives on an algebra of different dimension")
    return WeylContext(algebra, potential, grid, use_twostep_fastpath, threads)


def _thread_count(ctx):
    if ctx.threads is not None:
        return max(1, int(ctx.threads))
    return max(1, int(os.environ.get("MAGWEYL_THREADS", "1")))


def _grid_points(ctx):
    """Flattened position-grid coordinates, shape (N^d, d). Cached."""
    if "points" not in ctx._cache:
        g = ctx.grid
        mesh = np.meshgrid(*([g.axis_x] * g.dim), indexing="ij")
        ctx._cache["points"] = np.stack([m.ravel() for m in mesh], axis=-1)
    return ctx._cache["points"]


def _alpha_matrix(ctx):
    """alpha(Y, Z) on all grid pairs, shape (N^d, N^d). Cached."""
    if "alpha" not in ctx._cache:
        pts = _grid_points(ctx)
        n = pts.shape[0]
        out = np.empty((n, n), dtype=complex)
        block = max(1, _PAIR_BUDGET // n)
        for start in range(0, n, block):
            ys = pts[start:start + block, None, :]
            out[start:start + block] = magnetic.alpha_phase(ctx.potential, ys, pts[None, :, :])
        ctx._cache["alpha"] = out
    return ctx._cache["alpha"]


def _derived_axes(alg):
    """Coordinate axes that receive bracket values ([g, g] support)."""
    hit = np.abs(alg.structure_constants).sum(axis=(0, 1)) > 0
    return [k for k in range(alg.dim) if hit[k]]


def _upsample2(values, axes):
    """Refine the grid by 2 along the given axes via spectral zero-padding.

    Returns samples of the trigonometric interpolant at half-step points:
    output index u corresponds to (u - N) h / 2 when the input index j
    corresponds to (j - N/2) h. Exact at the original nodes (u = 2j).
    """
    out = values
    for ax in axes:
        n = out.shape[ax]
        spec = centered_dft(out, [ax], inverse=False)
        pad = [(0, 0)] * out.ndim
        pad[ax] = (n // 2, n // 2)
        out = centered_dft(np.pad(spec, pad), [ax], inverse=True) / n
    return out


def _fine_spectrum(values, axes):
    """Replace window samples along axes by doubled-grid spectral modes.

    Input samples g_j sit at w = (j - N/2) h on the |w| < L window; the 2N
    output coefficients c_k per axis represent the zero-extended window as
    g(w) = sum_k c_k exp(i zeta_k w), zeta_k = (k - N) dxi / 2, faithful for
    |w| < 2L (the representation is 4L-periodic beyond; callers mask).
    """
    out = values
    for ax in axes:
        n = out.shape[ax]
        pad = [(0, 0)] * out.ndim
        pad[ax] = (n // 2, n // 2)
        out = centered_dft(np.pad(out, pad), [ax], inverse=False) / (2 * n)
    return out


def _fine_dual_axis(grid):
    n = grid.points_per_axis
    return (np.arange(2 * n) - n) * (grid.dxi / 2.0)


def _contract_modes(val, lead, phases):
    """Contract the mode axes of val (those after position `lead`) one by one.

    Each entry of phases has the shape of val's leading axes plus one mode
    axis; contraction order matches the order of the trailing axes.
    """
    for ph in phases:
        if val.ndim > lead + 1:
            val = np.moveaxis(val, lead, -1)
        val = np.einsum('...k,...k->...', val, ph)
    return val


def _trig_eval(f, points):
    """Evaluate the band-limited interpolant of a config field anywhere.

    Uses f(x) = (2 pi)^{-d/2} dxi^d sum_k F_k exp(i <xi_k, x>) with F the
    unitary forward transform; reproduces grid samples exactly.
    """
    g = f.grid
    d = g.dim
    fhat = fourier_g(f, forward=True).values.ravel()
    mesh = np.meshgrid(*([g.axis_xi] * d), indexing="ij")
    modes = np.stack([m.ravel() for m in mesh], axis=-1)
    scale = (g.dxi / np.sqrt(TWO_PI)) ** d
    shape = np.asarray(points).shape[:-1]
    pts = np.asarray(points, dtype=float).reshape(-1, d)
    out = np.empty(pts.shape[0], dtype=complex)
    block = max(1, int(2e8 / (16 * modes.shape[0])))
    for start in range(0, pts.shape[0], block):
        phases = np.exp(1j * pts[start:start + block] @ modes.T)
        out[start:start + block] = phases @ fhat
    return scale * out.reshape(shape)


def _spectral_gradient(f):
    """All partials of the interpolant at the grid nodes, shape (N^d, d)."""
    g = f.grid
    d = g.dim
    fhat = fourier_g(f, forward=True)
    mesh = np.meshgrid(*([g.axis_xi] * d), indexing="ij")
    cols = []
    for i in range(d):
        gi = ConfigField(g, 1j * mesh[i] * fhat.values, space="gstar")
        cols.append(fourier_g(gi, forward=False).values.ravel())
    return np.stack(cols, axis=-1)


def _pi_general(ctx, phase_fn, g_elt, f):
    """e^{i phase(Y)} f((-g) * Y) with exact interpolant evaluation."""
    pts = _grid_points(ctx)
    shifted = lie_core.bch(ctx.algebra, -np.asarray(g_elt, dtype=float), pts)
    vals = _trig_eval(f, shifted)
    n = ctx.grid.points_per_axis
    out = np.exp(1j * phase_fn(pts)) * vals
    return ConfigField(ctx.grid, out.reshape((n,) * ctx.grid.dim))


def pi_action(ctx, X, xi, f):
    """The twisted representation applied to a config field.

    Returns Y -> e^{i Phi(Y)} f((-X) * Y) with
    Phi(Y) = INT_0^1 [<xi, W_s> + <A(W_s), (R_{W_s})'_0 X>] ds, W_s = (-sX)*Y;
    the quadrature is exact for polynomial potentials and the shift uses the
    trigonometric interpolant of f.
    """
    if not isinstance(f, ConfigField) or f.space != "g":
        raise ShapeError("pi_action expects a position-space config field")
    if f.grid != ctx.grid:
        raise ShapeError("field grid does not match the context grid")
    X = np.asarray(X, dtype=float)
    xi = np.asarray(xi, dtype=float)
    nodes, weights = lie_core.gauss01(magnetic._alpha_nodes(ctx.potential))
    alg, A = ctx.algebra, ctx.potential

    def phase(pts):
        total = 0.0
        for s, w in zip(nodes, weights):
            ws = lie_core.bch(alg, -s * X, pts)
            total = total + w * magnetic.theta0_eval(A, X, xi, ws)
        return total

    return _pi_general(ctx, phase, X, f)


def _check_work_bytes(nbytes):
    if nbytes > _MAX_WORK_BYTES:
        raise ShapeError(
            f"kernel assembly would need ~{nbytes / 1e9:.1f} GB working memory; "
            "reduce N or the dimension")


def _kernel_twostep(ctx, a):
    """Dealphaed kernel for class <= 1: on-grid differences, fine central axes.

    Exploits w = Y*(-Z) having plain differences y_i - z_i outside the
    derived subalgebra's coordinate support and the midpoint (Y+Z)/2 lying
    on the half-step grid, so every evaluation is an exact interpolant value
    obtained by indexing, spectral upsampling, or a short mode sum. Assembly
    runs in slabs of constant j - k along the first non-central axis.
    """
    alg, grid = ctx.algebra, ctx.grid
    d, N = grid.dim, grid.points_per_axis
    h, L, dxi = grid.h, grid.box_half_width, grid.dxi
    half = N // 2
    der = _derived_axes(alg)
    reg = [i for i in range(d) if i not in der]
    if not reg:
        return _kernel_general(ctx, a)
    q = reg[0]

    # b[X axes..., w axes...]: inverse transform over xi with the kernel
    # measure, doubled-grid spectra on the central axes, then the w block
    # reordered to (regular axes..., central mode axes...)
    b = (dxi / TWO_PI) ** d * centered_dft(a.values, range(d, 2 * d), inverse=True)
    b = _fine_spectrum(b, [d + ax for ax in der])
    order = list(range(d)) + [d + ax for ax in reg] + [d + ax for ax in der]
    b = np.transpose(b, order)
    _check_work_bytes(16 * b.size * (1 + 2 ** d / N))

    x = grid.axis_x
    zeta = _fine_dual_axis(grid)
    cstr = alg.structure_constants
    ktensor = np.zeros((N,) * (2 * d), dtype=complex)

    if d == 1:
        up = _upsample2(b, [0])
        for r in range(-half, half):
            js = np.arange(max(0, r), min(N, N + r))
            ktensor[js, js - r] = up[2 * js - r, r + half]
        return ktensor.reshape(N, N)

    # index grids over the remaining (j_i, k_i) pairs, axes (j_rest..., k_rest...)
    rest = [i for i in range(d) if i != q]
    m = d - 1
    grids = np.meshgrid(*([np.arange(N)] * (2 * m)), indexing="ij")
    JJ = {ax: grids[i] for i, ax in enumerate(rest)}
    KK = {ax: grids[m + i] for i, ax in enumerate(rest)}
    ufine = tuple(JJ[ax] + KK[ax] for ax in rest)
    ridx, rmask = [], np.ones(grids[0].shape, dtype=bool)
    for ax in rest:
        if ax in reg:
            rr = JJ[ax] - KK[ax]
            rmask &= (rr >= -half) & (rr < half)
            ridx.append(np.clip(rr + half, 0, N - 1))
    ridx = tuple(ridx)
    Ybase = np.zeros(grids[0].shape + (d,))
    Zbase = np.zeros(grids[0].shape + (d,))
    for ax in rest:
        Ybase[..., ax] = x[JJ[ax]]
        Zbase[..., ax] = x[KK[ax]]

    def do_slab(r):
        sl = np.take(b, r + half, axis=d)
        up = _upsample2(sl, range(d))
        out = []
        for j_q in range(max(0, r), min(N, N + r)):
            k_q = j_q - r
            E = np.take(up, j_q + k_q, axis=q)
            val = E[ufine + ridx]
            Ys, Zs = Ybase.copy(), Zbase.copy()
            Ys[..., q], Zs[..., q] = x[j_q], x[k_q]
            br = np.einsum('ijk,...i,...j->...k', cstr, Ys, Zs)
            phases = []
            for ax in der:
                w_c = Ys[..., ax] - Zs[..., ax] - 0.5 * br[..., ax]
                ph = np.exp(1j * np.multiply.outer(w_c, zeta))
                ph[np.abs(w_c) >= 2 * L] = 0.0
                phases.append(ph)
            val = _contract_modes(val, 2 * m, phases)
            out.append((j_q, k_q, np.where(rmask, val, 0.0)))
        return out

    workers = _thread_count(ctx)
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(do_slab, range(-half, half)))
    else:
        results = [do_slab(r) for r in range(-half, half)]
    for slab in results:
        for j_q, k_q, val in slab:
            idx = [slice(None)] * (2 * d)
            idx[q], idx[d + q] = j_q, k_q
            ktensor[tuple(idx)] = val
    return ktensor.reshape(N ** d, N ** d)


def _joint_spectrum(ctx, a):
    """Joint mode representation: value(m, w) = sum J e^{i<chi,m> + i<zeta,w>}.

    chi runs over the N^d position-dual modes, zeta over the doubled (2N)^d
    modes representing the zero-extended w window; shape (N^d, (2N)^d).
    """
    grid = ctx.grid
    d, N = grid.dim, grid.points_per_axis
    b = (grid.dxi / TWO_PI) ** d * centered_dft(a.values, range(d, 2 * d), inverse=True)
    b = _fine_spectrum(b, range(d, 2 * d))
    J = centered_dft(b, range(d), inverse=False) / N ** d
    return J.reshape(N ** d, (2 * N) ** d)


def _mode_coords(grid, fine):
    d = grid.dim
    axis = _fine_dual_axis(grid) if fine else grid.axis_xi
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([mm.ravel() for mm in mesh], axis=-1)


def _kernel_general(ctx, a):
    """Dealphaed kernel for any class via nonuniform mode sums.

    Exact quadrature midpoints and full nonuniform evaluation in both slots;
    cost O(N^{2d} (2N)^d N^d), intended for cross-validation and small grids.
    """
    alg, grid = ctx.algebra, ctx.grid
    L = grid.box_half_width
    J = _joint_spectrum(ctx, a)
    _check_work_bytes(32 * J.size)
    chi = _mode_coords(grid, fine=False)
    zeta = _mode_coords(grid, fine=True)
    pts = _grid_points(ctx)
    n = pts.shape[0]
    K = np.empty((n, n), dtype=complex)
    for row in range(n):
        Yr = pts[row]
        W = lie_core.bch(alg, Yr, -pts)
        M = -lie_core.psi_map(alg, W, -Yr)
        vals = np.einsum('pc,pc->p', np.exp(1j * M @ chi.T) @ J,
                         np.exp(1j * W @ zeta.T))
        bad = np.any(np.abs(W) >= 2 * L, axis=-1) | np.any(np.abs(M) > L, axis=-1)
        vals[bad] = 0.0
        K[row] = vals
    return K


def kernel_from_symbol(ctx, a):
    """The integral kernel of the operator quantizing the symbol a."""
    if not isinstance(a, SymbolField):
        raise ShapeError("kernel_from_symbol expects a phase-space symbol field")
    if a.grid != ctx.grid:
        raise ShapeError("symbol grid does not match the context grid")
    if ctx.algebra.nilpotency_class <= 1 and ctx.use_twostep_fastpath:
        K = _kernel_twostep(ctx, a)
    else:
        K = _kernel_general(ctx, a)
    return IntegralKernel(ctx.grid, K * _alpha_matrix(ctx))


def _multilinear(tensor, frac_idx):
    """Multilinear interpolation at fractional indices, zero outside the grid."""
    nd = tensor.ndim
    pts = frac_idx.reshape(-1, nd)
    out = np.zeros(pts.shape[0], dtype=tensor.dtype)
    shape = np.array(tensor.shape)
    block = max(1, int(2e7 / nd))
    for start in range(0, pts.shape[0], block):
        p = pts[start:start + block]
        base = np.floor(p).astype(int)
        t = p - base
        acc = np.zeros(p.shape[0], dtype=tensor.dtype)
        for corner in range(1 << nd):
            offs = np.array([(corner >> i) & 1 for i in range(nd)])
            idx = base + offs
            ok = np.all((idx >= 0) & (idx < shape), axis=1)
            w = np.prod(np.where(offs, t, 1.0 - t), axis=1)
            vals = np.zeros(p.shape[0], dtype=tensor.dtype)
            vals[ok] = tensor[tuple(idx[ok].T)]
            acc += w * vals
        out[start:start + block] = acc
    return out.reshape(frac_idx.shape[:-1])


def _sigma_inverse(ctx, V, W):
    """The (Y, Z) pair with group midpoint V and difference Y*(-Z) = W."""
    alg = ctx.algebra
    Y = -lie_core.psi_inverse(alg, W, -V)
    Z = lie_core.bch(alg, -W, Y)
    return Y, Z


def _symbol_interp(ctx, M):
    """Inversion via interpolation of the dealphaed kernel at midpoint pairs."""
    grid = ctx.grid
    d, N, h = grid.dim, grid.points_per_axis, grid.h
    pts = _grid_points(ctx)
    n = pts.shape[0]
    tensor = M.reshape((N,) * (2 * d))
    G = np.empty((n, n), dtype=complex)
    block = max(1, _PAIR_BUDGET // n)
    for start in range(0, n, block):
        nb = pts[start:start + block].shape[0]
        V = np.broadcast_to(pts[start:start + block, None, :], (nb, n, d))
        W = np.broadcast_to(pts[None, :, :], (nb, n, d))
        Y, Z = _sigma_inverse(ctx, V, W)
        frac = np.concatenate([Y, Z], axis=-1) / h + N // 2
        G[start:start + block] = _multilinear(tensor, frac)
    G = G.reshape((N,) * (2 * d))
    return h ** d * centered_dft(G, range(d, 2 * d), inverse=False)


def _symbol_twostep_adjoint(ctx, M):
    """Invert the class <= 1 quantization by running its chain backwards.

    The forward map samples a twice-upsampled midpoint table at the parity
    cells (j + l, j - l), with the derived difference coordinates living on
    the doubled window |w| < 2L and shifted per cell by the bracket term.
    Scattering the kernel back into that fine table, projecting each
    midpoint axis onto its centered band (which kills the parity alias
    exactly), undoing the bracket shifts spectrally, and folding the doubled
    windows recovers the symbol.  Exact up to band truncation at the box
    corners, so tail-level for symbols that decay inside the box.
    """
    alg, grid = ctx.algebra, ctx.grid
    d, N, h = grid.dim, grid.points_per_axis, grid.h
    half = N // 2
    der = _derived_axes(alg)
    nc = [i for i in range(d) if i not in der]
    K = M.reshape((N,) * (2 * d))
    wsize = tuple(2 * N if i in der else N for i in range(d))

    jl = np.meshgrid(*([np.arange(N)] * (2 * d)), indexing="ij")
    keep = np.ones(jl[0].shape, dtype=bool)
    for i in nc:
        diff = jl[i] - jl[d + i]
        keep &= (diff >= -half) & (diff < half)
    udest = [jl[i] + jl[d + i] for i in range(d)]
    wdest = [jl[i] - jl[d + i] + (N if i in der else half) for i in range(d)]

    # assemble in blocks of the last difference axis so the fine table and
    # its transforms stay inside the work budget
    per_slab = 16 * (2 * N) ** d * int(np.prod(wsize[:-1]))
    block = max(1, int(_MAX_WORK_BYTES / (3 * per_slab)))
    bbar = np.zeros((N,) * d + wsize, dtype=complex)
    for start in range(0, wsize[-1], block):
        nb = min(block, wsize[-1] - start)
        sel = keep & (wdest[-1] >= start) & (wdest[-1] < start + nb)
        fine = np.zeros((2 * N,) * d + wsize[:-1] + (nb,), dtype=complex)
        dest = tuple(u[sel] for u in udest) + tuple(w[sel] for w in wdest[:-1])
        fine[dest + (wdest[-1][sel] - start,)] = K[sel]
        for ax in range(d):
            spec = centered_dft(fine, [ax], inverse=False)
            crop = np.take(spec, np.arange(N - half, N + half), axis=ax)
            fine = centered_dft(crop, [ax], inverse=True) / N
        bbar[(Ellipsis,) + (slice(start, start + nb),)] = fine

    if der:
        # the projected table holds b at w_c = (r - N) h + [m, W]_c / 2;
        # translate each fiber back onto the plain lattice through the
        # doubled-window modes, then fold |w| < 2L onto the xi-dual window
        x = grid.axis_x
        cstr = alg.structure_constants
        kfine = (np.arange(2 * N) - N) * grid.dxi / 2
        for c in der:
            s = 0.0
            for i in nc:
                for j in nc:
                    if cstr[i, j, c] == 0.0:
                        continue
                    mi = x.reshape((N,) + (1,) * (2 * d - 1 - i))
                    wj = x.reshape((N,) + (1,) * (d - 1 - j))
                    s = s + 0.5 * cstr[i, j, c] * mi * wj
            spec = centered_dft(bbar, [d + c], inverse=False)
            ramp = np.exp(-1j * kfine.reshape((-1,) + (1,) * (d - 1 - c)) * s)
            bbar = centered_dft(spec * ramp, [d + c], inverse=True) / (2 * N)
        for c in der:
            A = np.moveaxis(bbar, d + c, -1)
            B = np.zeros(A.shape[:-1] + (N,), dtype=complex)
            for r in range(2 * N):
                B[..., (r - half) % N] += A[..., r]
            bbar = np.moveaxis(B, -1, d + c)

    return h ** d * centered_dft(bbar, range(d, 2 * d), inverse=False)


def symbol_from_kernel(ctx, K):
    """Invert the quantization map: recover the symbol of a kernel."""
    if not isinstance(K, IntegralKernel):
        raise ShapeError("symbol_from_kernel expects an integral kernel")
    if K.grid != ctx.grid:
        raise ShapeError("kernel grid does not match the context grid")
    M = np.conj(_alpha_matrix(ctx)) * K.values
    if ctx.algebra.nilpotency_class <= 1:
        vals = _symbol_twostep_adjoint(ctx, M)
    else:
        vals = _symbol_interp(ctx, M)
    return SymbolField(ctx.grid, vals)


def apply_operator(K, f):
    """(K f)(Y) = h^d sum_Z K(Y, Z) f(Z)."""
    if not isinstance(K, IntegralKernel) or not isinstance(f, ConfigField):
        raise ShapeError("apply_operator expects (kernel, config field)")
    if f.grid != K.grid or f.space != "g":
        raise ShapeError("field must live on the kernel's position grid")
    g = K.grid
    out = g.h ** g.dim * (K.values @ f.values.ravel())
    return ConfigField(g, out.reshape(f.values.shape))


def compose_kernels(K1, K2):
    """Kernel of the composed operator: matrix product weighted by h^d."""
    if not isinstance(K1, IntegralKernel) or not isinstance(K2, IntegralKernel):
        raise ShapeError("compose_kernels expects two integral kernels")
    if K1.grid != K2.grid:
        raise ShapeError("kernels live on different grids")
    g = K1.grid
    return IntegralKernel(g, g.h ** g.dim * (K1.values @ K2.values))


def moyal_product(ctx, a, b):
    """The twisted product of symbols, via compose-then-invert."""
    Ka = kernel_from_symbol(ctx, a)
    Kb = kernel_from_symbol(ctx, b)
    return symbol_from_kernel(ctx, compose_kernels(Ka, Kb))


def _half_transform_table(ctx, symbol):
    """Table for At(X, u) = INT symbol(X, z) e^{i<z, u>} dz.

    Layout (N^d flat X, u on regular axes..., modes on central axes...):
    regular axes carry the on-grid |u| < L window (zero outside), central
    axes stay spectral on the doubled mode grid.
    """
    grid = ctx.grid
    d, N = grid.dim, grid.points_per_axis
    der = _derived_axes(ctx.algebra)
    reg = [i for i in range(d) if i not in der]
    vals = grid.dxi ** d * centered_dft(symbol.values, range(d, 2 * d), inverse=True)
    vals = _fine_spectrum(vals, [d + ax for ax in der])
    order = list(range(d)) + [d + ax for ax in reg] + [d + ax for ax in der]
    vals = np.transpose(vals, order)
    return np.ascontiguousarray(vals.reshape((N ** d,) + vals.shape[d:]))


def moyal_2step_point(ctx, a, b, X, xi):
    """The twisted product of two symbols at one phase-space point, directly.

    Reduces the two spectral integrals of the explicit class <= 1
    composition formula analytically, leaving a double Riemann sum with the
    triangular phase correction:

        (a#b)(X, xi) = pi^{-2d} h^{2d} SUM_{Z,T} beta(X;Z,T) At(Z, u)
                       Bt(T, v) e^{-i <xi, 2(Z-T) + [X, Z-T]>},
        u = 2(X-T) + [Z, X-T],   v = 2(Z-X) + [T, Z-X],
        beta = conj(alpha(Y0, Z0)) alpha(Y0, S) alpha(S, Z0),
        Y0 = X+Z-T,  Z0 = X+T-Z,  S = Z+T-X,

    with At, Bt the inverse transforms of the symbols over the covector
    slot. Independent of the kernel machinery, so it cross-checks the
    compose-then-invert route. X must lie on the position grid (only then
    are u and v on-grid in the non-central coordinates).
    """
    alg, grid, A = ctx.algebra, ctx.grid, ctx.potential
    if alg.nilpotency_class > 1:
        raise WrongClass("the direct product formula needs an algebra of class <= 1")
    d, N = grid.dim, grid.points_per_axis
    h, L = grid.h, grid.box_half_width
    half = N // 2
    X = np.asarray(X, dtype=float)
    xi = np.asarray(xi, dtype=float)
    p_idx = X / h + half
    if not np.allclose(p_idx, np.round(p_idx), atol=1e-9):
        raise ShapeError("the probe point X must lie on the position grid")

    der = _derived_axes(alg)
    reg = [i for i in range(d) if i not in der]
    Ca = _half_transform_table(ctx, a)
    Cb = _half_transform_table(ctx, b)
    zeta = _fine_dual_axis(grid)
    pts = _grid_points(ctx)
    n = pts.shape[0]
    cstr = alg.structure_constants

    def gather(table, first_idx, u):
        ok = np.ones(first_idx.shape, dtype=bool)
        iu = []
        for ax in reg:
            r = np.round(u[..., ax] / h).astype(int)
            ok &= (r >= -half) & (r < half)
            iu.append(np.clip(r + half, 0, N - 1))
        val = table[(first_idx,) + tuple(iu)]
        phases = []
        for ax in der:
            ph = np.exp(1j * np.multiply.outer(u[..., ax], zeta))
            ph[np.abs(u[..., ax]) >= 2 * L] = 0.0
            phases.append(ph)
        val = _contract_modes(val, first_idx.ndim, phases)
        return np.where(ok, val, 0.0)

    total = 0.0 + 0.0j
    block = max(1, _PAIR_BUDGET // n)
    z_flat = np.arange(n)
    for t0 in range(0, n, block):
        T = pts[t0:t0 + block]
        nt = T.shape[0]
        Zb = np.broadcast_to(pts[None, :, :], (nt, n, d))
        Tb = np.broadcast_to(T[:, None, :], (nt, n, d))
        XmT = X - Tb
        ZmX = Zb - X
        u = 2 * XmT + np.einsum('ijk,...i,...j->...k', cstr, Zb, XmT)
        v = 2 * ZmX + np.einsum('ijk,...i,...j->...k', cstr, Tb, ZmX)
        At = gather(Ca, np.broadcast_to(z_flat[None, :], (nt, n)), u)
        Bt = gather(Cb, np.broadcast_to(np.arange(t0, t0 + nt)[:, None], (nt, n)), v)
        Y0 = X + Zb - Tb
        Z0 = X + Tb - Zb
        S = Zb + Tb - X
        beta = (np.conj(magnetic.alpha_phase(A, Y0, Z0))
                * magnetic.alpha_phase(A, Y0, S)
                * magnetic.alpha_phase(A, S, Z0))
        diff = Zb - Tb
        phase_vec = 2 * diff + np.einsum('ijk,i,...j->...k', cstr, X, diff)
        phase = np.exp(-1j * np.einsum('k,...k->...', xi, phase_vec))
        total += np.sum(beta * At * Bt * phase)
    return complex(total * h ** (2 * d) / np.pi ** (2 * d))


def magnetic_derivative_check(ctx, P0, f, tau=1e-3):
    """Finite-difference check of the generator of t -> pi(t P0, 0).

    Central differences of the orbit at steps tau and 2 tau are compared
    with the exact generator: the directional derivative of the interpolant
    along the right-translation field plus i times the potential pairing.
    Reports the relative error at tau and the ratio between the two step
    sizes, which approaches 4 for a clean second-order difference.
    """
    P0 = np.asarray(P0, dtype=float)
    zero = np.zeros(ctx.grid.dim)
    orbit = {t: pi_action(ctx, t * P0, zero, f).values
             for t in (tau, -tau, 2 * tau, -2 * tau)}
    d1 = (orbit[tau] - orbit[-tau]) / (2 * tau)
    d2 = (orbit[2 * tau] - orbit[-2 * tau]) / (4 * tau)
    pts = _grid_points(ctx)
    grad = _spectral_gradient(f)
    R = lie_core.right_translation_differential(ctx.algebra, pts, P0)
    exact = (-np.einsum('pi,pi->p', grad, R)
             + 1j * magnetic.pairing_AR(ctx.potential, pts, P0) * f.values.ravel())
    exact = exact.reshape(f.values.shape)
    norm = np.linalg.norm(exact)
    e1 = np.linalg.norm(d1 - exact) / norm
    e2 = np.linalg.norm(d2 - exact) / norm
    return {"check": "derivative_generator", "relative_error": float(e1),
            "ratio": float(e2 / e1), "tau": float(tau)}


def gauge_covariance_check(ctx, A1, a, tolerance=1e-9):
    """Verify the kernel conjugation identity between two gauges.

    With psi the gauge function of (A1, A) the kernel computed in gauge A1
    must equal e^{i psi(Y)} K_A(Y, Z) e^{-i psi(Z)} entrywise; reports the
    maximum deviation relative to the kernel's sup norm. Raises FieldsDiffer
    (from the gauge-function probe) when the two potentials do not generate
    the same field.
    """
    psi = magnetic.gauge_function(A1, ctx.potential)
    K = kernel_from_symbol(ctx, a)
    ctx1 = make_context(ctx.algebra, A1, ctx.grid, ctx.use_twostep_fastpath,
                        ctx.threads)
    K1 = kernel_from_symbol(ctx1, a)
    ph = np.exp(1j * psi(_grid_points(ctx)))
    expected = ph[:, None] * K.values * np.conj(ph)[None, :]
    err = np.abs(K1.values - expected).max() / np.abs(K1.values).max()
    return {"check": "gauge_covariance", "value": float(err),
            "tolerance": float(tolerance), "pass": bool(err <= tolerance)}
