"""Potentials F(t, x) on the period box, with gradients and convexity tags.

Time dependence enters through trigonometric coefficient paths, which keeps
every built-in potential smooth, multi-periodic by construction, and exactly
integrable by the grid quadrature once resolved.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .grid import Field, TorusGrid


class Convexity(str, Enum):
    STRICTLY_CONVEX = "strictly_convex"
    CONVEX = "convex"
    NON_CONVEX_UNCHECKED = "non_convex_unchecked"


@dataclass(frozen=True)
class TrigTerm:
    """One trigonometric mode: coeff * trig(2*pi * sum_a freq_a * t_a / T_a)."""

    trig: str
    freq: tuple[int, ...]
    coeff: tuple[float, ...]

    def __post_init__(self):
        if self.trig not in ("cos", "sin"):
            raise ValueError(f"trig kind must be 'cos' or 'sin', got {self.trig!r}")
        object.__setattr__(self, "freq", tuple(int(k) for k in self.freq))
        object.__setattr__(self, "coeff", tuple(float(c) for c in self.coeff))


@dataclass(frozen=True)
class TrigPath:
    """Vector-valued trigonometric polynomial on the period box.

    Evaluates to R^n; the empty term list is the zero path.  Paths know their
    periods so they can be sampled, differentiated, and averaged analytically.
    """

    periods: tuple[float, ...]
    n: int
    terms: tuple[TrigTerm, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "periods", tuple(float(T) for T in self.periods))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "terms", tuple(self.terms))
        for term in self.terms:
            if len(term.freq) != len(self.periods):
                raise ValueError(
                    f"term frequency {term.freq} does not match {len(self.periods)} axes"
                )
            if len(term.coeff) != self.n:
                raise ValueError(
                    f"term coefficient {term.coeff} does not have {self.n} components"
                )

    @classmethod
    def zero(cls, periods, n: int) -> "TrigPath":
        return cls(tuple(float(T) for T in periods), int(n))

    @classmethod
    def constant(cls, periods, vec) -> "TrigPath":
        vec = tuple(float(c) for c in np.atleast_1d(vec))
        periods = tuple(float(T) for T in periods)
        zero_freq = (0,) * len(periods)
        return cls(periods, len(vec), (TrigTerm("cos", zero_freq, vec),))

    def __call__(self, t) -> np.ndarray:
        """Evaluate at coordinates t of shape (..., p); returns (..., n)."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape[:-1] + (self.n,))
        for term in self.terms:
            omega = np.array(
                [2.0 * np.pi * k / T for k, T in zip(term.freq, self.periods)]
            )
            phase = t @ omega
            wave = np.cos(phase) if term.trig == "cos" else np.sin(phase)
            out += wave[..., None] * np.asarray(term.coeff)
        return out

    def _angular_sq(self, term: TrigTerm) -> float:
        return sum(
            (2.0 * np.pi * k / T) ** 2 for k, T in zip(term.freq, self.periods)
        )

    def laplacian(self) -> "TrigPath":
        """Analytic sum of second derivatives over the time axes."""
        terms = tuple(
            TrigTerm(
                term.trig,
                term.freq,
                tuple(-self._angular_sq(term) * c for c in term.coeff),
            )
            for term in self.terms
        )
        return TrigPath(self.periods, self.n, terms)

    def scaled(self, s: float) -> "TrigPath":
        terms = tuple(
            TrigTerm(t.trig, t.freq, tuple(s * c for c in t.coeff)) for t in self.terms
        )
        return TrigPath(self.periods, self.n, terms)

    def plus(self, other: "TrigPath") -> "TrigPath":
        if other.periods != self.periods or other.n != self.n:
            raise ValueError("paths live on different boxes or component counts")
        return TrigPath(self.periods, self.n, self.terms + other.terms)

    def box_mean(self) -> np.ndarray:
        """Average over the box; only zero-frequency cosine terms survive."""
        mean = np.zeros(self.n)
        for term in self.terms:
            if term.trig == "cos" and all(k == 0 for k in term.freq):
                mean += np.asarray(term.coeff)
        return mean

    def max_abs_freq(self) -> tuple[int, ...]:
        if not self.terms:
            return (0,) * len(self.periods)
        return tuple(
            max(abs(term.freq[a]) for term in self.terms)
            for a in range(len(self.periods))
        )

    def to_dict(self) -> dict:
        return {
            "terms": [
                {"trig": t.trig, "freq": list(t.freq), "coeff": list(t.coeff)}
                for t in self.terms
            ]
        }

    @classmethod
    def from_dict(cls, data: dict, periods, n: int) -> "TrigPath":
        terms = tuple(
            TrigTerm(
                str(t["trig"]),
                tuple(int(k) for k in t["freq"]),
                tuple(float(c) for c in t["coeff"]),
            )
            for t in data.get("terms", [])
        )
        return cls(tuple(float(T) for T in periods), int(n), terms)


def check_path_resolvable(path: TrigPath, grid: TorusGrid) -> None:
    """Reject coefficient frequencies at or beyond the per-axis Nyquist limit."""
    if len(path.periods) != grid.p or not np.allclose(
        path.periods, grid.periods, rtol=1e-12, atol=0.0
    ):
        raise ValueError(
            f"path periods {path.periods} do not match grid periods {grid.periods}"
        )
    kmax = path.max_abs_freq()
    for a, (k, N) in enumerate(zip(kmax, grid.resolutions)):
        if 2 * k >= N:
            raise ValueError(
                f"frequency {k} on axis {a + 1} is not resolvable below the "
                f"Nyquist limit of an N={N} grid"
            )


@dataclass(frozen=True)
class Potential:
    """A potential F(t, x) with its x-gradient and declared convexity class.

    ``value`` and ``gradient`` are batched: t has shape (..., p), x has shape
    (..., n), and they return shapes (...,) and (..., n).  ``hessian`` is
    optional and returns (..., n, n) when present.  The convexity tag records
    what the constructor can guarantee; it is sampled, not proven, by
    check_midpoint_convexity.
    """

    n: int
    periods: tuple[float, ...]
    value: Callable[[np.ndarray, np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray, np.ndarray], np.ndarray]
    convexity: Convexity = Convexity.NON_CONVEX_UNCHECKED
    hessian: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    kind: str = ""
    metadata: str = ""


def make_quadratic_shift(n: int, shift: TrigPath) -> Potential:
    """F(t, x) = |x - c(t)|^2 / 2 for a trigonometric shift path c."""
    if shift.n != int(n):
        raise ValueError(f"shift path has {shift.n} components, expected {n}")

    def value(t, x):
        d = np.asarray(x, dtype=float) - shift(t)
        return 0.5 * np.sum(d * d, axis=-1)

    def gradient(t, x):
        return np.asarray(x, dtype=float) - shift(t)

    def hessian(t, x):
        x = np.asarray(x, dtype=float)
        eye = np.eye(shift.n)
        return np.broadcast_to(eye, x.shape[:-1] + (shift.n, shift.n)).copy()

    peak = sum(float(np.linalg.norm(term.coeff)) for term in shift.terms)
    return Potential(
        n=int(n),
        periods=shift.periods,
        value=value,
        gradient=gradient,
        convexity=Convexity.STRICTLY_CONVEX,
        hessian=hessian,
        kind="quadratic_shift",
        metadata=f"growth bound: F <= (r + {peak:.6g})**2 / 2, gradient <= r + {peak:.6g}",
    )


def make_linear_drift(n: int, drift: TrigPath) -> Potential:
    """F(t, x) = <a(t), x>; convex but never strictly, and never coercive."""
    if drift.n != int(n):
        raise ValueError(f"drift path has {drift.n} components, expected {n}")

    def value(t, x):
        return np.sum(drift(t) * np.asarray(x, dtype=float), axis=-1)

    def gradient(t, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(drift(t), x.shape).copy()

    def hessian(t, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + (drift.n, drift.n))

    peak = sum(float(np.linalg.norm(term.coeff)) for term in drift.terms)
    return Potential(
        n=int(n),
        periods=drift.periods,
        value=value,
        gradient=gradient,
        convexity=Convexity.CONVEX,
        hessian=hessian,
        kind="linear_drift",
        metadata=f"growth bound: |F| <= {peak:.6g} * r, gradient bounded by {peak:.6g}",
    )


def make_quadratic_form(matrix, drift: TrigPath) -> Potential:
    """F(t, x) = <A x, x> / 2 + <g(t), x> with symmetric positive definite A."""
    A = np.asarray(matrix, dtype=float)
    n = drift.n
    if A.shape != (n, n):
        raise ValueError(f"matrix shape {A.shape} does not match n={n}")
    if not np.allclose(A, A.T, rtol=1e-12, atol=1e-12):
        raise ValueError("matrix A must be symmetric")
    try:
        np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise ValueError("matrix A must be positive definite") from exc
    A = 0.5 * (A + A.T)

    def value(t, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.sum((x @ A) * x, axis=-1) + np.sum(drift(t) * x, axis=-1)

    def gradient(t, x):
        return np.asarray(x, dtype=float) @ A + drift(t)

    def hessian(t, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(A, x.shape[:-1] + (n, n)).copy()

    top = float(np.linalg.eigvalsh(A)[-1])
    return Potential(
        n=n,
        periods=drift.periods,
        value=value,
        gradient=gradient,
        convexity=Convexity.STRICTLY_CONVEX,
        hessian=hessian,
        kind="quadratic_form",
        metadata=f"growth bound: F <= {top:.6g} * r**2 / 2 + O(r)",
    )


def make_log_sum_exp(directions, offsets: list[TrigPath]) -> Potential:
    """F(t, x) = log sum_j exp(<s_j, x> + b_j(t)).

    Strictly convex exactly when the direction differences span R^n; coercive
    when the origin lies inside the convex hull of the directions (probed at
    runtime, not assumed here).
    """
    S = np.asarray(directions, dtype=float)
    if S.ndim != 2:
        raise ValueError("directions must be a (terms, n) array")
    J, n = S.shape
    if len(offsets) != J:
        raise ValueError(f"got {len(offsets)} offset paths for {J} directions")
    periods = offsets[0].periods
    for b in offsets:
        if b.n != 1:
            raise ValueError("offset paths must be scalar (n=1)")
        if b.periods != periods:
            raise ValueError("offset paths disagree on periods")
    rank = np.linalg.matrix_rank(S - S[0]) if J > 1 else 0
    convexity = Convexity.STRICTLY_CONVEX if rank == n else Convexity.CONVEX

    def _logits(t, x):
        x = np.asarray(x, dtype=float)
        z = x @ S.T
        for j, b in enumerate(offsets):
            z[..., j] += b(t)[..., 0]
        return z

    def value(t, x):
        z = _logits(t, x)
        m = z.max(axis=-1)
        return m + np.log(np.sum(np.exp(z - m[..., None]), axis=-1))

    def _softmax(t, x):
        z = _logits(t, x)
        z -= z.max(axis=-1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=-1, keepdims=True)

    def gradient(t, x):
        return _softmax(t, x) @ S

    def hessian(t, x):
        prob = _softmax(t, x)
        weighted = np.einsum("...j,jm,jk->...mk", prob, S, S)
        g = prob @ S
        return weighted - g[..., :, None] * g[..., None, :]

    smax = float(np.abs(S).sum(axis=1).max())
    return Potential(
        n=n,
        periods=periods,
        value=value,
        gradient=gradient,
        convexity=convexity,
        hessian=hessian,
        kind="log_sum_exp",
        metadata=f"growth bound: F <= {smax:.6g} * r + O(1), gradient bounded",
    )


def make_manufactured(grid: TorusGrid, n: int, target: TrigPath):
    """Potential whose exact solution is a chosen trigonometric field.

    With F(t, x) = |x|^2 / 2 + <g(t), x> and g built analytically so the
    target solves the stationarity equation, the returned pair is the
    potential together with the target sampled on the grid.
    """
    if target.n != int(n):
        raise ValueError(f"target path has {target.n} components, expected {n}")
    check_path_resolvable(target, grid)
    g_path = target.laplacian().plus(target.scaled(-1.0))
    base = make_quadratic_form(np.eye(int(n)), g_path)
    exact = Field(grid, target(grid.coords()))
    pot = Potential(
        n=int(n),
        periods=base.periods,
        value=base.value,
        gradient=base.gradient,
        convexity=base.convexity,
        hessian=base.hessian,
        kind="manufactured",
        metadata="growth bound: F <= r**2 / 2 + O(r); target solution known in closed form",
    )
    return pot, exact


def check_gradient(pot: Potential, samples: int = 100, seed: int = 0) -> float:
    """Central-difference audit of the declared gradient.

    Draws (t, x) pairs, compares the analytic gradient against central
    differences of the value with step 1e-5 * (1 + |x|), and returns the
    largest relative discrepancy (scaled by max(1, |gradient|)).
    """
    rng = np.random.default_rng(seed)
    p = len(pot.periods)
    t = rng.uniform(0.0, 1.0, size=(samples, p)) * np.asarray(pot.periods)
    x = rng.normal(0.0, 2.0, size=(samples, pot.n))
    grad = pot.gradient(t, x)
    fd = np.empty_like(grad)
    step = 1e-5 * (1.0 + np.linalg.norm(x, axis=-1))
    for i in range(pot.n):
        shift = np.zeros_like(x)
        shift[:, i] = step
        fd[:, i] = (pot.value(t, x + shift) - pot.value(t, x - shift)) / (2.0 * step)
    err = np.linalg.norm(fd - grad, axis=-1)
    scale = np.maximum(1.0, np.linalg.norm(grad, axis=-1))
    return float((err / scale).max())


def check_midpoint_convexity(pot: Potential, triples: int = 1000, seed: int = 0) -> float:
    """Largest midpoint-convexity violation over random (t, x, y) triples.

    Returns max of F(t, (x+y)/2) - (F(t, x) + F(t, y)) / 2, which is
    nonpositive (up to rounding) for convex potentials.
    """
    rng = np.random.default_rng(seed)
    p = len(pot.periods)
    t = rng.uniform(0.0, 1.0, size=(triples, p)) * np.asarray(pot.periods)
    x = rng.normal(0.0, 2.0, size=(triples, pot.n))
    y = rng.normal(0.0, 2.0, size=(triples, pot.n))
    mid = pot.value(t, 0.5 * (x + y))
    violation = mid - 0.5 * (pot.value(t, x) + pot.value(t, y))
    return float(violation.max())


@dataclass(frozen=True)
class PotentialBundle:
    """A realized potential plus whatever closed-form structure it carries."""

    potential: Potential
    exact: Optional[Field] = None
    quad_matrix: Optional[np.ndarray] = None
    quad_drift: Optional[TrigPath] = None


def potential_from_dict(spec: dict, grid: TorusGrid) -> PotentialBundle:
    """Realize a JSON-style potential description on a grid.

    Quadratic-family potentials also report their (A, g) data so dense
    cross-checks can assemble the same stationarity system.
    """
    kind = spec.get("kind")
    n = int(spec.get("n", 0))
    if n < 1:
        raise ValueError(f"potential needs a positive component count, got n={n}")
    periods = grid.periods

    def path(key, components=n, required=False):
        data = spec.get(key)
        if data is None:
            if required:
                raise ValueError(f"potential kind {kind!r} requires {key!r}")
            return TrigPath.zero(periods, components)
        return TrigPath.from_dict(data, periods, components)

    if kind == "quadratic_shift":
        c = path("shift")
        pot = make_quadratic_shift(n, c)
        return PotentialBundle(pot, quad_matrix=np.eye(n), quad_drift=c.scaled(-1.0))
    if kind == "linear_drift":
        a = path("drift", required=True)
        return PotentialBundle(make_linear_drift(n, a))
    if kind == "quadratic_form":
        if "matrix" not in spec:
            raise ValueError("potential kind 'quadratic_form' requires 'matrix'")
        A = np.asarray(spec["matrix"], dtype=float)
        g = path("drift")
        pot = make_quadratic_form(A, g)
        return PotentialBundle(pot, quad_matrix=A, quad_drift=g)
    if kind == "log_sum_exp":
        directions = spec.get("directions")
        if directions is None:
            directions = np.vstack([np.eye(n), -np.eye(n)])
        directions = np.asarray(directions, dtype=float)
        offsets_data = spec.get("offsets")
        if offsets_data is None:
            offsets = [TrigPath.zero(periods, 1) for _ in range(len(directions))]
        else:
            offsets = [TrigPath.from_dict(d, periods, 1) for d in offsets_data]
        return PotentialBundle(make_log_sum_exp(directions, offsets))
    if kind == "manufactured":
        target = path("target", required=True)
        pot, exact = make_manufactured(grid, n, target)
        g_path = target.laplacian().plus(target.scaled(-1.0))
        return PotentialBundle(pot, exact=exact, quad_matrix=np.eye(n), quad_drift=g_path)
    raise ValueError(f"unknown potential kind {kind!r}")
