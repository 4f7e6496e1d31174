"""Truncated chaos-expanded fields over a grid.

A field is a finite association multi-index -> grid array together with the
truncation it lives in. Coefficient X-norms are trapezoid L2 norms in space,
preceded by a sup over time levels for time-dependent fields; all weighted
norms, the Wick product, Monte-Carlo sampling, and the white-noise
constructions live here.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import ShapeError, ValidationError
from .grids import GridFunction, GridSpec
from .multiindex import MultiIndex, TruncationSet, ZERO, decompositions, log_weight, unit

__all__ = [
    "ChaosField",
    "hermite_polynomial",
    "hermite_function",
    "kondratiev_norm",
    "wick_product",
    "expectation",
    "sample_realization",
    "sample_many",
    "critical_exponent_estimate",
    "white_noise_space",
    "white_noise_time",
    "field_to_csv",
    "field_from_csv",
]

SUP_T_L2 = "sup_t_L2_in_x"
L2_X = "L2_in_x"


def hermite_polynomial(n: int, x):
    """Probabilists' Hermite polynomial h_n via the three-term recurrence
    h_{n+1}(x) = x h_n(x) - n h_{n-1}(x), h_0 = 1, h_1 = x."""
    if n < 0:
        raise ValidationError("order must be >= 0")
    x = np.asarray(x, dtype=float)
    p0 = np.ones_like(x)
    if n == 0:
        return p0 if p0.ndim else float(p0)
    p1 = x.copy()
    for k in range(1, n):
        p0, p1 = p1, x * p1 - k * p0
    return p1 if p1.ndim else float(p1)


def hermite_function(k: int, x):
    """k-th L2(R)-orthonormal Hermite function (k >= 1).

    xi_k(x) = pi^{-1/4} ((k-1)!)^{-1/2} e^{-x^2/2} h_{k-1}(sqrt(2) x), evaluated
    with the normalized recurrence so that k ~ 100 stays stable.
    """
    if k < 1:
        raise ValidationError("Hermite function index starts at 1")
    x = np.asarray(x, dtype=float)
    p0 = np.pi ** -0.25 * np.exp(-0.5 * x * x)
    if k == 1:
        return p0 if p0.ndim else float(p0)
    p1 = math.sqrt(2.0) * x * p0
    for n in range(1, k - 1):
        p0, p1 = p1, x * math.sqrt(2.0 / (n + 1)) * p1 - math.sqrt(n / (n + 1.0)) * p0
    return p1 if p1.ndim else float(p1)


@dataclass(frozen=True)
class ChaosField:
    """Finite chaos expansion sum_gamma c_gamma H_gamma on a grid.

    Absent coefficients are zero. All stored arrays share one shape: (nx,)
    for a time-independent field, (nt, nx) otherwise.
    """

    grid: GridSpec
    truncation: TruncationSet
    coeffs: dict = field(default_factory=dict)
    space_norm_kind: str = SUP_T_L2

    def __post_init__(self):
        if self.space_norm_kind not in (SUP_T_L2, L2_X):
            raise ValidationError(f"unknown norm kind {self.space_norm_kind!r}")
        shapes = set()
        clean = {}
        for g, v in self.coeffs.items():
            if g not in self.truncation:
                raise ValidationError(f"coefficient {g} outside the truncation")
            arr = np.asarray(v, dtype=float)
            self.grid.shape_of(arr)
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"coefficient {g} has non-finite values")
            shapes.add(arr.shape)
            clean[g] = arr
        if len(shapes) > 1:
            raise ShapeError(f"mixed coefficient shapes {shapes}")
        object.__setattr__(self, "coeffs", clean)

    @property
    def time_dependent(self) -> bool:
        for v in self.coeffs.values():
            return v.ndim == 2
        return False

    @property
    def coeff_shape(self):
        for v in self.coeffs.values():
            return v.shape
        return (self.grid.nx,)

    def coefficient(self, gamma: MultiIndex) -> np.ndarray:
        got = self.coeffs.get(gamma)
        return got if got is not None else np.zeros(self.coeff_shape)

    def coefficient_x_norm(self, gamma: MultiIndex) -> float:
        """Grid L2 norm in x, preceded by a sup over time levels when the
        coefficient is time-dependent (the AC([0,T]; L2) surrogate)."""
        got = self.coeffs.get(gamma)
        if got is None:
            return 0.0
        norms = self.grid.l2_x(got)
        return float(np.max(norms)) if got.ndim == 2 else float(norms)

    def sup_norm(self) -> float:
        """sup over gamma of the plain sup-norm of the coefficient values."""
        if not self.coeffs:
            return 0.0
        return max(float(np.max(np.abs(v))) for v in self.coeffs.values())

    def scaled(self, c: float) -> "ChaosField":
        return replace(self, coeffs={g: c * v for g, v in self.coeffs.items()})

    def __add__(self, other: "ChaosField") -> "ChaosField":
        self._compat(other)
        out = {g: v.copy() for g, v in self.coeffs.items()}
        for g, v in other.coeffs.items():
            out[g] = out[g] + v if g in out else v.copy()
        return replace(self, coeffs=out)

    def __sub__(self, other: "ChaosField") -> "ChaosField":
        return self + other.scaled(-1.0)

    def _compat(self, other):
        if other.grid != self.grid:
            raise ShapeError("fields live on different grids")


def kondratiev_norm(f: ChaosField, p: float) -> float:
    """sqrt( sum_gamma ||c_gamma||_X^2 * weight(gamma)^{-p} ), p >= 0."""
    if p < 0:
        raise ValidationError("p must be >= 0")
    total = 0.0
    for g in f.coeffs:
        n = f.coefficient_x_norm(g)
        if n:
            total += n * n * math.exp(-p * log_weight(g))
    return math.sqrt(total)


def expectation(f: ChaosField) -> GridFunction:
    """The zeroth chaos coefficient (a zero grid function when absent)."""
    return GridFunction(f.grid, f.coefficient(ZERO))


def wick_product(u: ChaosField, v: ChaosField, report_dropped: bool = False):
    """Coefficient-convolution product: result coefficient at gamma is
    sum over alpha + beta = gamma of u_alpha * v_beta (pointwise).

    The result lives in the componentwise-smaller common truncation;
    convolution terms leaving it are dropped. With report_dropped=True the
    X-norm mass of those dropped terms is returned alongside the field.
    """
    u._compat(v)
    trunc = u.truncation
    if (v.truncation.max_vars, v.truncation.max_order) != (
        trunc.max_vars,
        trunc.max_order,
    ):
        trunc = TruncationSet(
            min(u.truncation.max_vars, v.truncation.max_vars),
            min(u.truncation.max_order, v.truncation.max_order),
            cap=max(u.truncation.cap, v.truncation.cap),
        )

    time_dep = u.time_dependent or v.time_dependent
    shape = (u.grid.nt, u.grid.nx) if time_dep else (u.grid.nx,)

    def stack(fld):
        idx = {}
        arrs = []
        for g, arr in fld.coeffs.items():
            a = np.broadcast_to(arr, shape) if arr.shape != shape else arr
            idx[g] = len(arrs)
            arrs.append(np.ascontiguousarray(a, dtype=float))
        mat = np.stack(arrs) if arrs else np.zeros((0,) + shape)
        return idx, mat

    uidx, ustack = stack(u)
    vidx, vstack = stack(v)

    coeffs = {}
    for gamma in trunc:
        pairs = [
            (uidx[a], vidx[b])
            for a, b in decompositions(gamma)
            if a in uidx and b in vidx
        ]
        if not pairs:
            continue
        out = np.zeros(shape)
        _kernels.accumulate_products(ustack, vstack, pairs, out)
        coeffs[gamma] = out

    kind = SUP_T_L2 if time_dep else u.space_norm_kind
    result = ChaosField(u.grid, trunc, coeffs, space_norm_kind=kind)
    if not report_dropped:
        return result

    dropped = 0.0
    seen = set()
    for ga in u.coeffs:
        for gb in v.coeffs:
            g = ga + gb
            if g in trunc or g in seen:
                continue
            seen.add(g)
            out = np.zeros(shape)
            pairs = [
                (uidx[a], vidx[b])
                for a, b in decompositions(g)
                if a in uidx and b in vidx
            ]
            _kernels.accumulate_products(ustack, vstack, pairs, out)
            n = result.grid.l2_x(out)
            n = float(np.max(n)) if time_dep else float(n)
            dropped += n * n
    return result, math.sqrt(dropped)


def _theta_matrix(n: int, max_vars: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, max_vars))


def _hermite_factor_table(thetas: np.ndarray, max_degree: int) -> np.ndarray:
    """table[d, i, k] = h_d(thetas[i, k]) for d = 0..max_degree."""
    n, K = thetas.shape
    table = np.empty((max_degree + 1, n, K))
    table[0] = 1.0
    if max_degree >= 1:
        table[1] = thetas
    for d in range(1, max_degree):
        table[d + 1] = thetas * table[d] - d * table[d - 1]
    return table


def sample_many(f: ChaosField, n: int, seed: int) -> np.ndarray:
    """n realizations, stacked on a leading axis; deterministic per seed.

    The Gaussian coordinates theta_1..theta_K are i.i.d. standard normals,
    H_gamma(theta) = prod_k h_{gamma_k}(theta_k).
    """
    K = f.truncation.max_vars
    P = f.truncation.max_order
    thetas = _theta_matrix(n, K, seed)
    table = _hermite_factor_table(thetas, P)
    out = np.zeros((n,) + f.coeff_shape)
    extra = (1,) * len(f.coeff_shape)
    for g, arr in f.coeffs.items():
        h = np.ones(n)
        for k, d in enumerate(g.entries):
            if d:
                h = h * table[d, :, k]
        out += h.reshape((n,) + extra) * arr[None, ...]
    return out


def sample_realization(f: ChaosField, seed: int) -> GridFunction:
    """One realization of the field; deterministic per seed."""
    return GridFunction(f.grid, sample_many(f, 1, seed)[0])


def critical_exponent_estimate(f: ChaosField, threshold: float, p_max: int = 3) -> int:
    """Smallest integer p in 0..p_max with norm(p) <= threshold * norm(p_max).

    A truncation-based diagnostic surrogate for the critical exponent; the
    exact infinite-sum criterion is not decidable from finitely many
    coefficients, so treat the result as an estimate only.
    """
    if threshold <= 0:
        raise ValidationError("threshold must be positive")
    ref = kondratiev_norm(f, p_max)
    if ref == 0.0:
        return 0
    for p in range(p_max + 1):
        if kondratiev_norm(f, p) <= threshold * ref:
            return p
    return p_max


def white_noise_space(
    grid: GridSpec, K: int, truncation: TruncationSet | None = None
) -> ChaosField:
    """Truncated space white noise: coefficient xi_k(x) at e_k, k <= K."""
    if K < 1:
        raise ValidationError("need K >= 1")
    trunc = truncation or TruncationSet(K, 1)
    if trunc.max_vars < K:
        raise ValidationError("truncation has fewer variables than noise modes")
    x = grid.x
    coeffs = {unit(k): hermite_function(k, x) for k in range(1, K + 1)}
    return ChaosField(grid, trunc, coeffs, space_norm_kind=L2_X)


def white_noise_time(
    grid: GridSpec, K: int, g: GridFunction, truncation: TruncationSet | None = None
) -> ChaosField:
    """Truncated g(x) * time white noise: coefficient g(x) xi_k(t) at e_k."""
    if K < 1:
        raise ValidationError("need K >= 1")
    if g.time_dependent:
        raise ValidationError("envelope g must be time-independent")
    trunc = truncation or TruncationSet(K, 1)
    if trunc.max_vars < K:
        raise ValidationError("truncation has fewer variables than noise modes")
    t = grid.t
    coeffs = {
        unit(k): np.outer(hermite_function(k, t), g.values) for k in range(1, K + 1)
    }
    return ChaosField(grid, trunc, coeffs, space_norm_kind=SUP_T_L2)


# ---------------------------------------------------------------------------
# CSV serialization: one row per stored value, full round-trip precision.
# Time-independent fields use time_index -1.
# ---------------------------------------------------------------------------

def field_to_csv(f: ChaosField, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["gamma", "time_index", "node_index", "value"])
        for g in f.truncation:
            arr = f.coeffs.get(g)
            if arr is None:
                continue
            if arr.ndim == 1:
                for j, val in enumerate(arr):
                    w.writerow([str(g), -1, j, repr(float(val))])
            else:
                for i, row in enumerate(arr):
                    for j, val in enumerate(row):
                        w.writerow([str(g), i, j, repr(float(val))])


def field_from_csv(
    path, grid: GridSpec, truncation: TruncationSet, space_norm_kind: str = SUP_T_L2
) -> ChaosField:
    staging: dict[MultiIndex, dict] = {}
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != ["gamma", "time_index", "node_index", "value"]:
            raise ValidationError(f"unexpected CSV header {header}")
        for gamma_text, ti, ni, val in r:
            g = MultiIndex.parse(gamma_text)
            staging.setdefault(g, {})[(int(ti), int(ni))] = float(val)
    coeffs = {}
    for g, vals in staging.items():
        times = {ti for ti, _ in vals}
        if times == {-1}:
            arr = np.zeros(grid.nx)
            for (_, j), v in vals.items():
                arr[j] = v
        else:
            arr = np.zeros((grid.nt, grid.nx))
            for (i, j), v in vals.items():
                arr[i, j] = v
        coeffs[g] = arr
    return ChaosField(grid, truncation, coeffs, space_norm_kind=space_norm_kind)
