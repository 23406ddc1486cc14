"""Crofton-formula area estimates for zero sets of functions on S^3.

A hypersurface in S^3 has area 2 pi times the mean number of intersections
with a uniformly random great circle (the constant is fixed by the great
sphere, which meets almost every great circle exactly twice).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

CROFTON_CONSTANT = 2 * np.pi


def great_circles(lines: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniform great circles on S^3 as orthonormal pairs (u, w)."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((lines, 4, 2))
    Q, R = np.linalg.qr(A)
    # fix the QR sign ambiguity so the pair is a Haar-uniform 2-frame
    Q = Q * np.sign(np.diagonal(R, axis1=1, axis2=2))[:, None, :]
    return Q[:, :, 0], Q[:, :, 1]


def _refine(h, u, w, lo, hi, vlo, tol):
    """Bisection of sign-change brackets [lo, hi] to width ``tol``."""
    while np.any(hi - lo > tol):
        mid = 0.5 * (lo + hi)
        pts = np.cos(mid)[:, None] * u + np.sin(mid)[:, None] * w
        vm = np.asarray(h(pts), dtype=float)
        if not np.all(np.isfinite(vm)):
            raise ValueError("h returned non-finite values")
        left = np.sign(vm) == np.sign(vlo)
        lo = np.where(left, mid, lo)
        vlo = np.where(left, vm, vlo)
        hi = np.where(left, hi, mid)
    return 0.5 * (lo + hi)


def crossing_counts(h: Callable[[np.ndarray], np.ndarray], u: np.ndarray, w: np.ndarray,
                    samples: int = 512, tol: float = 1e-6, return_angles: bool = False):
    """Sign changes of h along each great circle cos(t) u + sin(t) w."""
    t = 2 * np.pi * np.arange(samples) / samples
    c, s = np.cos(t), np.sin(t)
    L = len(u)
    pts = (c[None, :, None] * u[:, None, :] + s[None, :, None] * w[:, None, :]).reshape(-1, 4)
    v = np.asarray(h(pts), dtype=float).reshape(L, samples)
    if not np.all(np.isfinite(v)):
        raise ValueError("h returned non-finite values")
    sg = np.where(v >= 0, 1, -1)
    change = sg != np.roll(sg, -1, axis=1)
    counts = change.sum(axis=1)
    if not return_angles:
        return counts
    li, si = np.nonzero(change)
    lo = t[si]
    hi = lo + 2 * np.pi / samples
    roots = _refine(h, u[li], w[li], lo, hi, v[li, si], tol)
    return counts, li, roots


def crofton_mass(h: Callable[[np.ndarray], np.ndarray], lines: int, seed: int,
                 samples: int = 512, chunk: int = 4096, refine: bool = True) -> tuple[float, int]:
    """Area of {h = 0} in S^3: (estimate, max crossings on one line).

    Crossings are located by sign changes on ``samples`` equally spaced
    angles and refined by bisection to 1e-6 rad.
    """
    if lines < 1:
        raise ValueError("need at least one line")
    u, w = great_circles(lines, seed)
    total, top = 0, 0
    for a in range(0, lines, chunk):
        if refine:
            counts, _, _ = crossing_counts(h, u[a:a + chunk], w[a:a + chunk], samples, return_angles=True)
        else:
            counts = crossing_counts(h, u[a:a + chunk], w[a:a + chunk], samples)
        total += int(counts.sum())
        top = max(top, int(counts.max()))
    return CROFTON_CONSTANT * total / lines, top


# ---------------------------------------------------------------------------
# degree <= 2 harmonics as quadratic forms


@dataclass(frozen=True)
class QuadraticHarmonic:
    """h(x) = x^T Q x + b.x + c restricted to S^3."""

    Q: np.ndarray
    b: np.ndarray
    c: float
    name: str = ""

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        return np.einsum("ij,jk,ik->i", x, self.Q, x) + x @ self.b + self.c


def harmonic_basis() -> list[QuadraticHarmonic]:
    """The 14 spherical harmonics of degree <= 2 on S^3.

    Index 0 is the constant, 1..4 the coordinates, 5 the Clifford form
    x1^2 + x2^2 - x3^2 - x4^2, 6..7 the other traceless diagonals and
    8..13 the mixed products x_i x_j.
    """
    Z = np.zeros((4, 4))
    z = np.zeros(4)
    out = [QuadraticHarmonic(Z, z, 1.0, "1")]
    for i in range(4):
        e = np.zeros(4)
        e[i] = 1.0
        out.append(QuadraticHarmonic(Z, e, 0.0, f"x{i + 1}"))
    for signs, nm in (((1, 1, -1, -1), "x1^2+x2^2-x3^2-x4^2"),
                      ((1, -1, 1, -1), "x1^2-x2^2+x3^2-x4^2"),
                      ((1, -1, -1, 1), "x1^2-x2^2-x3^2+x4^2")):
        out.append(QuadraticHarmonic(np.diag(np.array(signs, float)), z, 0.0, nm))
    for i in range(4):
        for j in range(i + 1, 4):
            Q = np.zeros((4, 4))
            Q[i, j] = Q[j, i] = 0.5
            out.append(QuadraticHarmonic(Q, z, 0.0, f"x{i + 1}x{j + 1}"))
    return out


def combine(basis: list[QuadraticHarmonic], a) -> QuadraticHarmonic:
    a = np.asarray(a, dtype=float)
    if a.shape != (len(basis),):
        raise ValueError("coefficient length does not match the basis")
    if not np.any(a):
        raise ValueError("all-zero coefficient vector")
    Q = sum(ai * h.Q for ai, h in zip(a, basis))
    b = sum(ai * h.b for ai, h in zip(a, basis))
    c = float(sum(ai * h.c for ai, h in zip(a, basis)))
    return QuadraticHarmonic(np.asarray(Q, float), np.asarray(b, float), c)


class LineSet:
    """A fixed seeded set of great circles with cached trigonometric sampling.

    Restricted to a great circle, a quadratic h is the trigonometric
    polynomial c0 + c1 cos t + c2 sin t + c3 cos^2 t + c4 cos t sin t
    + c5 sin^2 t, so every member of a harmonic family is evaluated on all
    lines with one small matrix product (common random numbers).
    """

    def __init__(self, lines: int, seed: int, samples: int = 512):
        self.lines, self.seed, self.samples = lines, seed, samples
        self.u, self.w = great_circles(lines, seed)
        t = 2 * np.pi * np.arange(samples) / samples
        c, s = np.cos(t), np.sin(t)
        self.t = t
        self.trig = np.stack([np.ones_like(t), c, s, c * c, c * s, s * s])

    def coefficients(self, h: QuadraticHarmonic) -> np.ndarray:
        u, w = self.u, self.w
        Qu, Qw = u @ h.Q, w @ h.Q
        return np.stack([
            np.full(len(u), h.c), u @ h.b, w @ h.b,
            np.sum(Qu * u, 1), 2 * np.sum(Qu * w, 1), np.sum(Qw * w, 1),
        ], axis=1)

    def counts(self, h: QuadraticHarmonic, chunk: int = 8192) -> np.ndarray:
        C = self.coefficients(h)
        out = np.empty(self.lines, dtype=np.int64)
        for a in range(0, self.lines, chunk):
            v = C[a:a + chunk] @ self.trig
            sg = v >= 0
            out[a:a + chunk] = np.sum(sg != np.roll(sg, -1, axis=1), axis=1)
        return out

    def mass(self, h: QuadraticHarmonic) -> tuple[float, int]:
        c = self.counts(h)
        return CROFTON_CONSTANT * float(c.mean()), int(c.max())

    def batch_counts(self, harmonics: list, A, chunk: int = 8) -> np.ndarray:
        """(members, lines) crossing counts of sum_i a_i h_i for each row a of A.

        Line coefficients are linear in a, so they are assembled from the
        per-harmonic coefficients once."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        H = np.stack([self.coefficients(h) for h in harmonics])
        out = np.empty((len(A), self.lines), dtype=np.int64)
        for i in range(0, len(A), chunk):
            C = np.einsum("bh,hlk->blk", A[i:i + chunk], H)
            sg = (C @ self.trig) >= 0
            out[i:i + chunk] = np.sum(sg != np.roll(sg, -1, axis=2), axis=2)
        return out


def exact_trig_roots(coef: np.ndarray) -> np.ndarray:
    """Number of distinct zeros in [0, 2 pi) of the trigonometric polynomial
    with coefficients (c0, c1 cos, c2 sin, c3 cos^2, c4 cos sin, c5 sin^2),
    counting only sign changes (odd multiplicity)."""
    out = np.zeros(len(coef), dtype=np.int64)
    for i, (c0, c1, c2, c3, c4, c5) in enumerate(coef):
        # in terms of cos 2t, sin 2t: A + B cos t + C sin t + D cos 2t + E sin 2t
        A = c0 + 0.5 * (c3 + c5)
        D = 0.5 * (c3 - c5)
        E = 0.5 * c4
        # z = e^{it}: z^2 p(z) = sum of Laurent terms, degree-4 polynomial
        poly = np.array([
            0.5 * (D - 1j * E), 0.5 * (c1 - 1j * c2), A, 0.5 * (c1 + 1j * c2), 0.5 * (D + 1j * E),
        ])
        while len(poly) > 1 and abs(poly[0]) < 1e-14:
            poly = poly[1:]
        if len(poly) <= 1:
            continue
        roots = np.roots(poly)
        on = roots[np.abs(np.abs(roots) - 1) < 1e-7]
        if len(on) == 0:
            continue
        ang = np.sort(np.mod(np.angle(on), 2 * np.pi))
        # merge repeated roots and keep those where the sign changes
        groups = [[ang[0]]]
        for x in ang[1:]:
            if x - groups[-1][-1] < 1e-5:
                groups[-1].append(x)
            else:
                groups.append([x])
        if len(groups) > 1 and 2 * np.pi - groups[-1][-1] + groups[0][0] < 1e-5:
            groups[0] = groups[-1] + groups[0]
            groups.pop()
        out[i] = sum(1 for g in groups if len(g) % 2 == 1)
    return out
