"""Explicit sweepout families.

Polynomial families over RP^p (sublevel sets of P_a(f)), the linear loop
over a circle, the bend-and-cancel map with its region pushforward, and
zero-set families of spherical harmonics on S^3 measured by Crofton.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .almgren import ChainFamily
from .chains import AmbientComplex, ChainError
from .crofton import CROFTON_CONSTANT, LineSet, QuadraticHarmonic, combine, harmonic_basis
from .models import ModelError, ScalarField, field_from_function


# ---------------------------------------------------------------------------
# polynomial families


def poly_values(values: np.ndarray, A: np.ndarray) -> np.ndarray:
    """P_a(values) for a batch of coefficient rows a = (a_0, ..., a_p)."""
    A = np.atleast_2d(A)
    P = np.repeat(A[:, -1:], len(values), axis=1)
    for i in range(A.shape[1] - 2, -1, -1):
        P = P * values[None, :] + A[:, i:i + 1]
    return P


def poly_rule(values: np.ndarray, A: np.ndarray) -> np.ndarray:
    P = poly_values(values, A)
    if np.any(P == 0):
        raise ChainError("P_a vanishes at a cell center; perturb the parameter")
    return P < 0


def roots_rule(values: np.ndarray, R: np.ndarray) -> np.ndarray:
    """{prod_j (t - r_j) < 0} computed from signs only; rows of R are root sets."""
    R = np.atleast_2d(R)
    neg = np.zeros((len(R), len(values)), dtype=bool)
    for j in range(R.shape[1]):
        d = values[None, :] - R[:, j:j + 1]
        if np.any(d == 0):
            raise ChainError("a root equals a cell value; perturb the parameter")
        neg ^= d < 0
    return neg


def sphere_param(x: np.ndarray) -> np.ndarray:
    """Cube-boundary coordinates in [0,1]^(p+1) to points of S^p."""
    a = 2 * np.asarray(x, dtype=float) - 1
    n = np.linalg.norm(a, axis=-1, keepdims=True)
    if np.any(n == 0):
        raise ChainError("parameter at the cube center")
    return a / n


def rp_generator(p: int):
    def gamma(s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.zeros((len(s), p + 1))
        out[:, 0] = np.cos(np.pi * s)
        out[:, 1] = np.sin(np.pi * s)
        return out
    return gamma


def roots_to_coeffs(roots, p: int) -> np.ndarray:
    """Unit coefficient vector of prod (t - r_j), padded to degree p."""
    c = np.array([1.0])
    for r in roots:
        c = np.convolve(c, [1.0, -r])
    a = np.zeros(p + 1)
    a[:len(c)] = c[::-1]
    return a / np.linalg.norm(a)


def guth_family(f: ScalarField, p: int) -> ChainFamily:
    """a -> boundary{x : P_a(f(x)) < 0} over RP^p, evaluated at cell centers."""
    if p < 1:
        raise ChainError("need p >= 1")
    vals = np.asarray(f.center_values, dtype=float)
    fam = ChainFamily(
        complex=f.complex,
        regions=lambda A: poly_rule(vals, A),
        param_dim=p + 1, domain_kind="rp", p=p, to_param=sphere_param,
        generator=rp_generator(p), kind="guth",
        descriptor={"field": f.to_json()}, field=f, transport=lambda x: x,
        rule=poly_rule, level_intervals=[(float(vals.min()), float(vals.max()))],
        root_regions=lambda R: roots_rule(vals, R))
    return fam


def level_roots(fam: ChainFamily, a) -> np.ndarray:
    """Real roots of P_a inside the range of field values."""
    a = np.asarray(a, dtype=float)
    nz = np.flatnonzero(np.abs(a) > 1e-14)
    if len(nz) == 0 or nz[-1] == 0:
        return np.zeros(0)
    r = np.roots(a[:nz[-1] + 1][::-1])
    r = r[np.abs(r.imag) < 1e-9].real
    lo, hi = fam.level_intervals[0][0], fam.level_intervals[-1][1]
    return np.sort(r[(r > lo) & (r < hi)])


def linear_sweepout(f: ScalarField) -> ChainFamily:
    """theta -> boundary{f < -cot(theta/2)}, theta in [0, 2 pi]."""
    vals = np.asarray(f.center_values, dtype=float)

    def regions(T):
        T = np.atleast_2d(T)[:, 0]
        A = np.stack([np.cos(T / 2), np.sin(T / 2)], axis=1)
        return poly_rule(vals, A)

    return ChainFamily(
        complex=f.complex, regions=regions, param_dim=1, domain_kind="circle", p=1,
        to_param=lambda x: 2 * np.pi * np.atleast_2d(x)[:, :1],
        generator=lambda s: 2 * np.pi * np.atleast_1d(s)[:, None],
        kind="linear", descriptor={"field": f.to_json()}, field=f, transport=lambda x: x)


def pencil_sweepout(f1: ScalarField, f2: ScalarField) -> ChainFamily:
    """theta -> boundary{cos(theta/2) f1 + sin(theta/2) f2 < 0}, theta in [0, 2 pi].

    With f1, f2 = cos, sin of 2 pi x_1 on a torus every member is a pair of
    parallel circles half a period apart.
    """
    if f1.complex is not f2.complex:
        raise ChainError("fields live on different complexes")
    V = np.stack([f1.center_values, f2.center_values])

    def regions(T):
        T = np.atleast_2d(T)[:, 0]
        P = np.cos(T / 2)[:, None] * V[0] + np.sin(T / 2)[:, None] * V[1]
        if np.any(P == 0):
            raise ChainError("pencil member vanishes at a cell center")
        return P < 0

    return ChainFamily(
        complex=f1.complex, regions=regions, param_dim=1, domain_kind="circle", p=1,
        to_param=lambda x: 2 * np.pi * np.atleast_2d(x)[:, :1],
        generator=lambda s: 2 * np.pi * np.atleast_1d(s)[:, None],
        kind="pencil", descriptor={"fields": [f1.to_json(), f2.to_json()]})


def torus_rotation_sweepout(cx: AmbientComplex, axis: int = 0, phase: float = (math.sqrt(2) - 1) / 100) -> ChainFamily:
    """Pencil of cos, sin of 2 pi (x_axis - phase) on a torus model.

    The default phase is irrational so no member vanishes on a grid center
    at the dyadic loop parameters used for detection.
    """
    if cx.metric != "torus":
        raise ModelError("rotation sweepout needs a torus model")
    f1 = field_from_function(cx, lambda x: np.cos(2 * np.pi * (x[:, axis] - phase)))
    f2 = field_from_function(cx, lambda x: np.sin(2 * np.pi * (x[:, axis] - phase)))
    fam = pencil_sweepout(f1, f2)
    fam.descriptor = {"axis": axis, "phase": phase}
    fam.kind = "torus-rotation"
    return fam


# ---------------------------------------------------------------------------
# bend and cancel

EPS0 = 0.25


def smoothstep_cutoff(t):
    """1 for t <= 1/2, 0 for t >= 1, cubic smoothstep between."""
    s = np.clip(2 * np.asarray(t, dtype=float) - 1, 0, 1)
    return 1 - s * s * (3 - 2 * s)


def _to_ball(y):
    n2 = np.linalg.norm(y, axis=1, keepdims=True)
    ninf = np.abs(y).max(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(n2 > 0, y * ninf / n2, 0.0)


def _to_cube(z):
    n2 = np.linalg.norm(z, axis=1, keepdims=True)
    ninf = np.abs(z).max(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(ninf > 0, z * n2 / ninf, 0.0)


@dataclass
class BendMap:
    """Cellwise radial retraction of a torus model onto the skeleton of its
    3^-k cube decomposition, away from balls around the cell centers.

    Inside each cell (cube coordinates y in [-1,1]^D, straightened to the unit
    ball by y -> y |y|_inf / |y|_2) the map is
    h(z) = eta(|z|/delta) z + (1 - eta(|z|/delta)) z/|z|, delta = eps L.
    """

    complex: AmbientComplex
    k: int
    eps: float
    L: float = 1.0
    info: dict = field(default_factory=dict)

    @property
    def delta(self) -> float:
        return self.eps * self.L

    @property
    def h(self) -> float:
        return 3.0 ** -self.k

    @property
    def D(self) -> int:
        return self.complex.dim

    def _local(self, x):
        x = np.mod(np.atleast_2d(np.asarray(x, dtype=float)), 1.0)
        sig = np.floor(x / self.h)
        sig = np.minimum(sig, 3**self.k - 1)
        y = 2 * (x / self.h - sig) - 1
        return sig, np.clip(y, -1, 1)

    def _global(self, sig, y):
        return np.mod((sig + 0.5 * (y + 1)) * self.h, 1.0)

    def _radial(self, rho):
        eta = smoothstep_cutoff(rho / self.delta)
        return eta * rho + (1 - eta)

    def __call__(self, x) -> np.ndarray:
        sig, y = self._local(x)
        z = _to_ball(y)
        rho = np.linalg.norm(z, axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            zn = np.where(rho > 0, z * self._radial(rho) / rho, 0.0)
        return self._global(sig, _to_cube(zn))

    def ball_radius(self, x) -> np.ndarray:
        """|z| in straightened cell coordinates (inner ball is |z| < delta)."""
        _, y = self._local(x)
        return np.linalg.norm(_to_ball(y), axis=1)

    def inner_preimage(self, x, iters: int = 60) -> np.ndarray:
        """The preimage inside the central ball of points in open cells."""
        sig, y = self._local(x)
        z = _to_ball(y)
        rho_t = np.linalg.norm(z, axis=1)
        if np.any(rho_t >= 1 - 1e-15):
            raise ModelError("point on the skeleton has no inner preimage")
        d = self.delta
        lo = np.full_like(rho_t, 0.5 * d)
        hi = np.full_like(rho_t, d)
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            below = self._radial(mid) < rho_t
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        rho = np.where(rho_t <= 0.5 * d, rho_t, 0.5 * (lo + hi))
        with np.errstate(invalid="ignore", divide="ignore"):
            z0 = np.where(rho_t[:, None] > 0, z * (rho / rho_t)[:, None], 0.0)
        return self._global(sig, _to_cube(z0))

    def centers(self) -> np.ndarray:
        m = 3**self.k
        g = np.stack(np.meshgrid(*[np.arange(m)] * self.D, indexing="ij"), -1).reshape(-1, self.D)
        return (g + 0.5) * self.h

    def skeleton_distance(self, x) -> np.ndarray:
        """Distance (in cell units) to the nearest skeleton hyperplane."""
        u = np.mod(np.atleast_2d(x), 1.0) / self.h
        return np.abs(u - np.round(u)).min(axis=1)

    def expansion(self, samples: int = 4096, seed: int = 0) -> dict:
        """Finite-difference estimate of max |DF| (operator norm)."""
        rng = np.random.default_rng(seed)
        D = self.D
        # half the points uniform, half in and around the transition shell
        x1 = rng.random((samples // 2, D))
        dirs = rng.standard_normal((samples - samples // 2, D))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        rho = self.delta * rng.uniform(0.3, 1.1, len(dirs))[:, None]
        sig = rng.integers(0, 3**self.k, (len(dirs), D))
        x2 = self._global(sig, _to_cube(dirs * rho))
        x = np.vstack([x1, x2])
        step = 1e-4 * self.delta * self.h
        J = np.empty((len(x), D, D))
        for i in range(D):
            e = np.zeros(D)
            e[i] = step
            dF = self(x + e) - self(x - e)
            dF = dF - np.round(dF)
            J[:, :, i] = dF / (2 * step)
        norms = np.linalg.norm(J, ord=2, axis=(1, 2))
        top = float(norms.max())
        return {"max_expansion": top, "C1": top * self.eps, "samples": len(x), "k": self.k, "eps": self.eps}

    def skeleton_check(self, samples: int = 4096, seed: int = 0) -> dict:
        """Points outside the central balls must land on the skeleton."""
        rng = np.random.default_rng(seed)
        x = rng.random((samples, self.D))
        out = self.ball_radius(x) >= self.delta
        d = self.skeleton_distance(self(x[out]))
        fixed = rng.random((samples, self.D))
        fixed[:, 0] = np.round(fixed[:, 0] * 3**self.k) / 3**self.k
        moved = np.abs((self(fixed) - fixed + 0.5) % 1.0 - 0.5).max()
        cen = self.centers()
        return {"checked": int(out.sum()), "violations": int((d > 1e-9).sum()),
                "skeleton_moved": float(moved),
                "center_moved": float(np.abs(self(cen) - cen).max())}

    def to_json(self) -> dict:
        return {"model": self.complex.name, "k": self.k, "eps": self.eps, "L": self.L, **self.info}


def bend_and_cancel(model: AmbientComplex, k: int, eps: float = EPS0) -> BendMap:
    if model.metric != "torus":
        raise ModelError("bend-and-cancel is implemented on torus models")
    if not (0 < eps <= EPS0):
        raise ModelError(f"eps must lie in (0, {EPS0}]")
    if k < 0:
        raise ModelError("k must be nonnegative")
    return BendMap(model, int(k), float(eps))


def choose_k(p: int, n: int) -> int:
    """Integer k with 3^k <= p^(1/(n+1)) <= 3^(k+1)."""
    return int(math.floor(math.log(p) / ((n + 1) * math.log(3)) + 1e-12))


def field_lipschitz(f: ScalarField, samples: int = 4096, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    D = f.complex.dim
    x = rng.random((samples, D))
    h = 1e-6
    g2 = np.zeros(samples)
    for i in range(D):
        e = np.zeros(D)
        e[i] = h
        g2 += ((f(x + e) - f(x - e)) / (2 * h)) ** 2
    return 1.25 * float(np.sqrt(g2.max()))


def separating_eps(f: ScalarField, k: int) -> float:
    """Largest eps (capped at EPS0) whose central balls have disjoint f-images."""
    if k == 0:
        return EPS0
    h = 3.0 ** -k
    D = f.complex.dim
    m = 3**k
    g = np.stack(np.meshgrid(*[np.arange(m)] * D, indexing="ij"), -1).reshape(-1, D)
    fv = np.sort(f((g + 0.5) * h))
    gap = float(np.diff(fv).min())
    # the straightened ball of radius delta sits in a euclidean ball of radius delta sqrt(D) h / 2
    return min(EPS0, 0.9 * gap / (field_lipschitz(f) * math.sqrt(D) * h))


def pushforward(F: BendMap, psi: ChainFamily) -> ChainFamily:
    """Region transport: a cell of the fine grid is in Phi(a)'s region iff the
    inner preimage of its center is in psi's region (closed-form field)."""
    cx = F.complex
    if psi.complex is not cx:
        raise ChainError("family and bend map live on different complexes")
    g = int(cx.info.get("g", 0))
    if g % 3 ** (F.k + 1) != 0:
        raise ModelError(f"grid g={g} is not refined below level k={F.k}")
    if psi.rule is None or psi.field is None:
        raise ChainError("pushforward needs a field-based family")
    pre = F.inner_preimage(cx.centers[cx.dim])
    vals = np.asarray(psi.field(pre), dtype=float)
    rule = psi.rule
    cen = F.centers()
    fc = psi.field(cen)
    # f-range of each central ball, sampled on its boundary circle
    ang = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    intervals = []
    for c, s in zip(cen, np.floor(cen / F.h)):
        if F.D == 2:
            ring = np.stack([np.cos(ang), np.sin(ang)], 1)
        else:
            ring = np.random.default_rng(0).standard_normal((256, F.D))
            ring /= np.linalg.norm(ring, axis=1, keepdims=True)
        pts = F._global(np.repeat(s[None], len(ring), 0), _to_cube(0.999 * F.delta * ring))
        fv = psi.field(pts)
        intervals.append((float(fv.min()), float(fv.max())))
    order = np.argsort(fc)
    out = ChainFamily(
        complex=cx, regions=lambda A: rule(vals, A), param_dim=psi.param_dim,
        domain_kind=psi.domain_kind, p=psi.p, to_param=psi.to_param, generator=psi.generator,
        kind="bent-" + psi.kind, descriptor=dict(psi.descriptor, bend=F.to_json()),
        field=psi.field, transport=F.inner_preimage, rule=rule,
        level_intervals=[intervals[i] for i in order], root_regions=lambda R: roots_rule(vals, R))
    return out


def mass_budget(p: int, n: int, k: int, C1: float, C3: float) -> float:
    """2 p C1^n omega_n 3^(-nk) + C3 3^k."""
    omega = math.pi ** (n / 2) / math.gamma(n / 2 + 1)
    return 2 * p * C1**n * omega * 3.0 ** (-n * k) + C3 * 3.0**k


def skeleton_constant(model: AmbientComplex) -> float:
    """Mass of the n-skeleton of the 3^-k decomposition divided by 3^k."""
    if model.metric != "torus":
        raise ModelError("skeleton constant is computed for torus models")
    return float(model.dim)


def bent_guth_family(f: ScalarField, p: int, k: int | None = None, eps: float | None = None) -> ChainFamily:
    """Guth's family pushed through bend-and-cancel; by default 3^k <= p^(1/(n+1)) < 3^(k+1)."""
    cx = f.complex
    n = cx.n
    k = choose_k(p, n) if k is None else k
    eps = min(EPS0, separating_eps(f, k)) if eps is None else eps
    F = bend_and_cancel(cx, k, eps)
    fam = pushforward(F, guth_family(f, p))
    fam.descriptor["bend"] = F.to_json()
    return fam


# ---------------------------------------------------------------------------
# Crofton-backed families on S^3


@dataclass
class SampledFamily:
    """a -> zero set of sum a_i phi_i on S^3, measured by Crofton."""

    harmonics: list
    lines: int = 100_000
    seed: int = 0
    samples: int = 512
    kind: str = "eigenfunction"
    backend: str = "crofton"
    _lineset: LineSet | None = None

    @property
    def param_dim(self) -> int:
        return len(self.harmonics)

    @property
    def p(self) -> int:
        return len(self.harmonics) - 1

    @property
    def lineset(self) -> LineSet:
        if self._lineset is None:
            self._lineset = LineSet(self.lines, self.seed, self.samples)
        return self._lineset

    def member(self, a) -> QuadraticHarmonic:
        return combine(self.harmonics, a)

    def mass_and_max(self, a) -> tuple[float, int]:
        return self.lineset.mass(self.member(a))

    def masses(self, A) -> np.ndarray:
        return self.masses_and_max(A)[0]

    def masses_and_max(self, A, chunk: int = 8) -> tuple[np.ndarray, np.ndarray]:
        """Crofton masses and max per-line crossing counts for a parameter batch."""
        c = self.lineset.batch_counts(self.harmonics, A, chunk)
        return CROFTON_CONSTANT * c.mean(axis=1), c.max(axis=1)

    @property
    def crossing_bound(self) -> int:
        """Structural per-line crossing bound: 2 x max degree."""
        deg = max(2 if np.any(h.Q) else (1 if np.any(h.b) else 0) for h in self.harmonics)
        return 2 * deg

    def to_json(self) -> dict:
        return {"kind": self.kind, "backend": self.backend, "p": self.p, "lines": self.lines,
                "seed": self.seed, "harmonics": [h.name for h in self.harmonics]}


def eigenfunction_family(harmonics: list | None = None, lines: int = 100_000, seed: int = 0,
                         samples: int = 512, require_constant: bool = True) -> SampledFamily:
    if harmonics is None:
        harmonics = harmonic_basis()
    H = np.array([np.concatenate([h.Q.ravel(), h.b, [h.c]]) for h in harmonics])
    if np.linalg.matrix_rank(H) < len(harmonics):
        raise ChainError("harmonics are linearly dependent")
    if require_constant and not (np.allclose(H[0, :-1], 0) and H[0, -1] != 0):
        raise ChainError("first harmonic must be the constant function")
    return SampledFamily(list(harmonics), lines, seed, samples)


def coordinate_family(lines: int = 100_000, seed: int = 0) -> SampledFamily:
    """x_1..x_4 only: every member is a great sphere."""
    return eigenfunction_family(harmonic_basis()[1:5], lines, seed, require_constant=False)
