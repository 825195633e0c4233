"""Exact computations in finite-dimensional nilpotent Lie algebras.

An algebra is described by its structure constants c[i, j, k], meaning
[e_i, e_j] = sum_k c[i, j, k] e_k in a fixed user basis. Algebra elements are
plain float arrays of coordinates in that basis; every operation accepts
arrays of shape (..., dim) and broadcasts over leading axes.

The group product attached to the algebra (in exponential coordinates) is the
Dynkin commutator series truncated at word length class + 1, which is exact
here: for a nilpotent algebra of class n (abelian has class 0, two-step
algebras class 1) all brackets of word length n + 2 or more vanish. Every
s-integral below has a polynomial integrand of known degree, so a fixed
Gauss-Legendre rule evaluates it to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import ceil, factorial

import numpy as np

from .errors import (
    AbelianHasNoQuotient,
    ClassTooLarge,
    JacobiViolation,
    NotNilpotent,
    ShapeError,
)

PIVOT_TOL = 1e-10
JACOBI_TOL = 1e-12
MAX_CLASS = 6


@dataclass(eq=False)
class NilpotentLieAlgebra:
    """A nilpotent Lie algebra in a fixed basis.

    nilpotency_class counts from zero: abelian algebras have class 0 and
    two-step algebras (Heisenberg) have class 1. Much of the literature calls
    these classes 1 and 2; here class n means brackets of word length n + 2
    vanish. lcs_dims lists the dimensions of the lower central series
    g = g_0 > g_1 > ... > g_n. The columns of adapted_change_of_basis are a
    basis of g whose last lcs_dims[k] columns span g_k for every k; in
    particular the last block spans the central layer g_n.
    """

    dim: int
    structure_constants: np.ndarray
    nilpotency_class: int
    lcs_dims: list[int]
    adapted_change_of_basis: np.ndarray
    _quotient: tuple = field(default=None, repr=False)


def _row_reduce(rows, tol=PIVOT_TOL):
    """Row echelon basis of the span of `rows`, dropping pivots below tol."""
    rows = np.array(rows, dtype=float)
    basis = []
    for row in rows:
        for b in basis:
            j = int(np.argmax(np.abs(b)))
            row = row - b * (row[j] / b[j])
        if np.max(np.abs(row), initial=0.0) > tol:
            basis.append(row / np.max(np.abs(row)))
    return np.array(basis) if basis else np.zeros((0, rows.shape[1]))


def _bracket_span(c, basis):
    """Span of [g, V] for V spanned by the rows of `basis`."""
    if basis.shape[0] == 0:
        return basis
    # [e_i, v] for every generator e_i and basis row v
    prods = np.einsum('ijk,rj->irk', c, basis).reshape(-1, c.shape[0])
    return _row_reduce(prods)


def new_algebra(dim, structure_constants):
    """Validate structure constants and build the algebra.

    Checks antisymmetry and the Jacobi identity, computes the lower central
    series by iterated bracket spans (rank decisions via row reduction with
    pivot threshold 1e-10), derives the nilpotency class, and assembles a
    change of basis adapted to the series. Raises NotNilpotent when the
    series stabilizes at a nonzero subspace.
    """
    c = np.asarray(structure_constants, dtype=float)
    if c.shape != (dim, dim, dim):
        raise ShapeError(f"structure constants must have shape {(dim, dim, dim)}, got {c.shape}")
    if not np.all(np.isfinite(c)):
        raise ShapeError("structure constants contain non-finite entries")
    if np.max(np.abs(c + np.swapaxes(c, 0, 1)), initial=0.0) > JACOBI_TOL:
        raise ValueError("structure constants are not antisymmetric")
    jac = (
        np.einsum('jkm,mil->ijkl', c, c)
        + np.einsum('kim,mjl->ijkl', c, c)
        + np.einsum('ijm,mkl->ijkl', c, c)
    )
    worst = np.max(np.abs(jac), initial=0.0)
    if worst > JACOBI_TOL:
        raise JacobiViolation(f"Jacobi identity violated by {worst:.3e}")

    series = [np.eye(dim)]
    while series[-1].shape[0] > 0:
        nxt = _bracket_span(c, series[-1])
        if nxt.shape[0] == series[-1].shape[0]:
            raise NotNilpotent(
                f"lower central series stabilizes at dimension {nxt.shape[0]}")
        series.append(nxt)
    # series = [g_0, g_1, ..., g_n, g_{n+1} = 0]
    nclass = len(series) - 2
    lcs_dims = [b.shape[0] for b in series[:-1]]

    # Flag-adapted basis: walk the series from the deepest layer outward so
    # that for every k the last lcs_dims[k] columns span g_k.
    chosen = []
    echelon = []
    for level in range(nclass, -1, -1):
        for row in series[level]:
            red = row.copy()
            for b in echelon:
                j = int(np.argmax(np.abs(b)))
                red = red - b * (red[j] / b[j])
            if np.max(np.abs(red), initial=0.0) > PIVOT_TOL:
                chosen.append(row)
                echelon.append(red / np.max(np.abs(red)))
    change = np.array(chosen[::-1]).T  # columns, deepest layer last
    return NilpotentLieAlgebra(dim, c, nclass, lcs_dims, change)


def bracket(alg, X, Y):
    """[X, Y] by contraction with the structure constants."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    return np.einsum('ijk,...i,...j->...k', alg.structure_constants, X, Y)


@lru_cache(maxsize=None)
def _dynkin_words(max_degree):
    """Words and net coefficients of the Dynkin expansion of log(exp X exp Y).

    Each entry is (coeff, letters) with letters a tuple over {0, 1} (0 for X,
    1 for Y); the word value is the right-nested commutator
    [l_0, [l_1, [... , l_{m-1}]]] and a length-1 word is the letter itself.
    Words whose last two letters agree vanish identically and are dropped, as
    are words whose coefficients cancel.
    """
    acc = {}

    def extend(letters, nblocks, denom, used):
        if letters:
            key = tuple(letters)
            coeff = (-1.0) ** (nblocks - 1) / (nblocks * len(letters) * denom)
            acc[key] = acc.get(key, 0.0) + coeff
        if used >= max_degree:
            return
        room = max_degree - used
        for r in range(room + 1):
            for s in range(room - r + 1):
                if r + s == 0:
                    continue
                extend(letters + [0] * r + [1] * s,
                       nblocks + 1,
                       denom * factorial(r) * factorial(s),
                       used + r + s)

    extend([], 0, 1.0, 0)
    words = [
        (coeff, letters) for letters, coeff in acc.items()
        if abs(coeff) > 1e-16 and not (len(letters) >= 2 and letters[-1] == letters[-2])
    ]
    words.sort(key=lambda t: (len(t[1]), t[1]))
    return tuple(words)


def _eval_words(alg, words, X, Y):
    """Sum coeff * [word](X, Y) over a word list, batched over leading axes."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    shape = np.broadcast_shapes(X.shape, Y.shape)
    X = np.broadcast_to(X, shape)
    Y = np.broadcast_to(Y, shape)
    c = alg.structure_constants
    # (ad_X)[..., k, j] = sum_i X_i c[i, j, k]
    ads = (np.einsum('...i,ijk->...kj', X, c), np.einsum('...i,ijk->...kj', Y, c))
    vecs = (X, Y)
    out = np.zeros(shape)
    for coeff, letters in words:
        v = vecs[letters[-1]]
        for l in letters[-2::-1]:
            v = np.einsum('...kj,...j->...k', ads[l], v)
        out = out + coeff * v
    return out


def bch(alg, X, Y):
    """The group product X * Y in exponential coordinates.

    Dynkin series truncated at word length class + 1 (exact for nilpotent
    algebras). Satisfies X * 0 = X, X * (-X) = 0 and associativity to
    round-off.
    """
    n = alg.nilpotency_class
    if n > MAX_CLASS:
        raise ClassTooLarge(f"nilpotency class {n} exceeds supported bound {MAX_CLASS}")
    return _eval_words(alg, _dynkin_words(n + 1), X, Y)


@lru_cache(maxsize=None)
def _dynkin_words_linear(max_degree):
    """Dynkin words that are degree one in the first argument."""
    return tuple(
        (coeff, letters) for coeff, letters in _dynkin_words(max_degree)
        if sum(1 for l in letters if l == 0) == 1
    )


def right_translation_differential(alg, Y, X):
    """Differential at 0 of W -> W * Y, applied to X.

    Equals d/dt at t = 0 of (tX) * Y; computed exactly by keeping the Dynkin
    words that contain X exactly once. For two-step algebras this is
    X + [X, Y] / 2.
    """
    n = alg.nilpotency_class
    if n > MAX_CLASS:
        raise ClassTooLarge(f"nilpotency class {n} exceeds supported bound {MAX_CLASS}")
    return _eval_words(alg, _dynkin_words_linear(n + 1), X, Y)


@lru_cache(maxsize=None)
def gauss01(n):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(int(n))
    return 0.5 * (x + 1.0), 0.5 * w


def psi_map(alg, V, Y):
    """The averaged right translation Y -> integral of Y * (sV) over s in [0, 1].

    The integrand is polynomial in s of degree at most class + 1, so the
    fixed Gauss-Legendre rule is exact.
    """
    n = alg.nilpotency_class
    nodes, weights = gauss01(ceil((n + 2) / 2))
    V = np.asarray(V, dtype=float)
    Y = np.asarray(Y, dtype=float)
    out = 0.0
    for s, w in zip(nodes, weights):
        out = out + w * bch(alg, Y, s * V)
    return out


def _quotient_cached(alg):
    if alg._quotient is None:
        alg._quotient = quotient_by_top_layer(alg)
    return alg._quotient


def quotient_by_top_layer(alg):
    """Quotient by the central layer g_n, with projection and section.

    Returns (quotient_algebra, q, iota) where q is the (m x dim) projection
    matrix and iota the (dim x m) coordinate section, both in user-basis
    coordinates, with q @ iota = identity on the quotient.
    """
    if alg.nilpotency_class == 0:
        raise AbelianHasNoQuotient("abelian algebra has no top layer to remove")
    m = alg.dim - alg.lcs_dims[-1]
    change = alg.adapted_change_of_basis
    inv = np.linalg.inv(change)
    c_adapted = np.einsum('ia,jb,ijk,lk->abl', change, change,
                          alg.structure_constants, inv)
    quotient = new_algebra(m, c_adapted[:m, :m, :m])
    q = inv[:m, :]
    iota = change[:, :m]
    return quotient, q, iota


def psi_inverse(alg, V, Z):
    """Inverse of psi_map in its second argument.

    Induction on the nilpotency class: the abelian base case returns
    Z - V / 2; otherwise recurse on the quotient by the central layer, lift
    through the coordinate section and correct by one more psi_map. The
    round trip psi_map(V, psi_inverse(V, Z)) = Z holds to round-off.
    """
    V = np.asarray(V, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if alg.nilpotency_class == 0:
        return Z - 0.5 * V
    quotient, q, iota = _quotient_cached(alg)
    phi = psi_inverse(quotient, V @ q.T, Z @ q.T)
    lift = phi @ iota.T
    return Z - psi_map(alg, V, lift) + lift


def algebra_preset(name):
    """Built-in algebras: 'abelian:<d>', 'heisenberg:<2k+1>', 'filiform3:4'."""
    kind, _, arg = name.partition(":")
    if kind == "abelian":
        d = int(arg)
        if d < 1:
            raise ValueError(f"abelian dimension must be positive, got {d}")
        return new_algebra(d, np.zeros((d, d, d)))
    if kind == "heisenberg":
        d = int(arg)
        if d < 3 or d % 2 == 0:
            raise ValueError(f"heisenberg dimension must be odd and >= 3, got {d}")
        k = (d - 1) // 2
        c = np.zeros((d, d, d))
        for i in range(k):
            c[i, k + i, d - 1] = 1.0
            c[k + i, i, d - 1] = -1.0
        return new_algebra(d, c)
    if name == "filiform3:4":
        c = np.zeros((4, 4, 4))
        c[0, 1, 2], c[1, 0, 2] = 1.0, -1.0
        c[0, 2, 3], c[2, 0, 3] = 1.0, -1.0
        return new_algebra(4, c)
    raise ValueError(f"unknown algebra preset {name!r}")


def algebra_from_dict(data):
    """Build an algebra from {'dim': d, 'brackets': [{'i', 'j', 'coeffs'}]}.

    Bracket indices are 1-based and the antisymmetric closure is applied, so
    each unordered pair appears once.
    """
    dim = int(data["dim"])
    c = np.zeros((dim, dim, dim))
    for entry in data.get("brackets", []):
        i, j = int(entry["i"]) - 1, int(entry["j"]) - 1
        coeffs = np.asarray(entry["coeffs"], dtype=float)
        if coeffs.shape != (dim,):
            raise ShapeError(f"bracket coeffs must have length {dim}")
        c[i, j, :] = coeffs
        c[j, i, :] = -coeffs
    return new_algebra(dim, c)
