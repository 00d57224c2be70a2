"""
Admissible running/terminal costs and Hamiltonians as truncated series.

A cost is stored as coefficient fields U(k), k = 1..K, representing
U(x[,t],z) = sum_k U(k) z^k / k!; the absent zeroth coefficient encodes
the admissibility condition U(.,0) = 0 that the recovery theory needs.
A Hamiltonian is stored as multi-index coefficient fields H(beta) with
1 <= |beta| <= order, H(x,p) = sum_beta H(beta) p^beta / beta!, where
H(beta) = (d/dp)^beta H(x,0); the quadratic kinetic-energy case carries
a dedicated flag so the solver can short-circuit to |p|^2/2.

Multi-indices are kept in graded lexicographic order.  Pointwise series
evaluation dispatches to :mod:`mfginv.kernels`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from . import kernels
from .grids import ScalarField, SpatialGrid, TimeGrid, ValidationError

__all__ = [
    "TaylorCost",
    "HamiltonianSeries",
    "cost_eval",
    "cost_eval_array",
    "cauchy_bound",
    "cauchy_consistent",
    "hamiltonian_eval",
    "hamiltonian_grad",
    "hamiltonian_eval_arrays",
    "hamiltonian_grad_arrays",
    "extract_linearization_coeffs",
    "graded_multi_indices",
    "quadratic_hamiltonian",
    "zero_cost",
]

_KINDS = ("running", "running-static", "terminal")


@dataclass(frozen=True)
class TaylorCost:
    """Truncated power series in the density argument.

    kind "running" carries one spatial slice per time node in each
    coefficient (shape (M+1,) + grid.shape, linear interpolation between
    nodes); "running-static" and "terminal" coefficients are purely
    spatial.
    """

    kind: str
    grid: SpatialGrid
    coefficients: tuple[np.ndarray, ...] = field(repr=False)
    time: TimeGrid | None = None
    convergence_radius_hint: float = 1.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValidationError(f"unknown cost kind {self.kind!r}")
        if self.kind == "running" and self.time is None:
            raise ValidationError("running costs need a time grid")
        if not self.coefficients:
            raise ValidationError("a cost needs at least the order-1 coefficient")
        if self.convergence_radius_hint <= 0:
            raise ValidationError("convergence_radius_hint must be positive")
        expected = (
            (self.time.num_nodes,) + self.grid.shape
            if self.kind == "running"
            else self.grid.shape
        )
        coeffs = []
        for k, c in enumerate(self.coefficients, start=1):
            c = np.asarray(c, dtype=np.float64)
            if c.shape != expected:
                raise ValidationError(
                    f"coefficient {k} has shape {c.shape}, expected {expected}"
                )
            coeffs.append(c)
        object.__setattr__(self, "coefficients", tuple(coeffs))
        # k!-scaled stack used by the pointwise kernel
        scaled = np.stack(
            [c / math.factorial(k) for k, c in enumerate(coeffs, start=1)]
        )
        object.__setattr__(self, "_scaled_stack", scaled)

    @property
    def order(self) -> int:
        return len(self.coefficients)

    @property
    def is_time_dependent(self) -> bool:
        return self.kind == "running"

    def coefficient_field(self, k: int, t_index: int | None = None) -> np.ndarray:
        """Coefficient U(k) as a spatial array (slice at t_index if running)."""
        c = self.coefficients[k - 1]
        if self.kind == "running":
            if t_index is None:
                raise ValidationError("running cost coefficient needs a time index")
            return c[t_index]
        return c

    def truncated(self, order: int) -> "TaylorCost":
        if order < 1 or order > self.order:
            raise ValidationError(f"cannot truncate order-{self.order} cost to {order}")
        return TaylorCost(
            self.kind,
            self.grid,
            self.coefficients[:order],
            self.time,
            self.convergence_radius_hint,
        )


def zero_cost(kind: str, grid: SpatialGrid, order: int = 1, time: TimeGrid | None = None) -> TaylorCost:
    shape = (time.num_nodes,) + grid.shape if kind == "running" else grid.shape
    return TaylorCost(kind, grid, tuple(np.zeros(shape) for _ in range(order)), time)


def cost_eval_array(cost: TaylorCost, z: np.ndarray, t_index: int | None = None) -> np.ndarray:
    """Pointwise series evaluation on a raw array."""
    if cost.kind == "running":
        if t_index is None:
            raise ValidationError("running cost evaluation needs t_index")
        if not 0 <= t_index < cost.time.num_nodes:
            raise ValidationError(
                f"t_index {t_index} out of range 0..{cost.time.num_nodes - 1}"
            )
        stack = cost._scaled_stack[:, t_index]
    else:
        if t_index is not None:
            raise ValidationError(f"{cost.kind} cost takes no t_index")
        stack = cost._scaled_stack
    flat = kernels.series_eval(
        stack.reshape(cost.order, -1), np.asarray(z).reshape(-1)
    )
    return flat.reshape(cost.grid.shape)


def cost_eval(cost: TaylorCost, z: ScalarField, t_index: int | None = None) -> ScalarField:
    """U(x[,t],z(x)) = sum_k U(k) z^k / k! evaluated pointwise."""
    if z.grid != cost.grid:
        raise ValidationError("density field grid does not match the cost grid")
    return ScalarField(cost.grid, cost_eval_array(cost, z.values, t_index))


def cauchy_bound(sup_norm: float, R: float, k: int) -> float:
    """Coefficient bound k!/R^k * sup_norm from the Cauchy integral estimate."""
    if R <= 0:
        raise ValidationError(f"radius must be positive, got {R}")
    if k < 1:
        raise ValidationError(f"order must be >= 1, got {k}")
    return math.factorial(k) / R**k * sup_norm


def cauchy_consistent(cost: TaylorCost, sup_norm: float, R: float | None = None):
    """Check every stored |U(k)| against the Cauchy bound; returns (ok, rows)."""
    radius = cost.convergence_radius_hint if R is None else R
    rows = []
    ok = True
    for k in range(1, cost.order + 1):
        bound = cauchy_bound(sup_norm, radius, k)
        actual = float(np.max(np.abs(cost.coefficients[k - 1])))
        rows.append({"k": k, "bound": bound, "sup": actual})
        ok = ok and actual <= bound * (1 + 1e-12)
    return ok, rows


def graded_multi_indices(dim: int, order: int) -> list[tuple[int, ...]]:
    """Multi-indices with 1 <= |beta| <= order in graded lexicographic order."""
    out = []
    for total in range(1, order + 1):
        level = [b for b in product(range(total + 1), repeat=dim) if sum(b) == total]
        level.sort(reverse=True)
        out.extend(level)
    return out


@dataclass(frozen=True)
class HamiltonianSeries:
    """Multi-index power series in the momentum argument, H(x,0) = 0."""

    grid: SpatialGrid
    order: int
    coefficients: dict[tuple[int, ...], np.ndarray] = field(repr=False)
    quadratic_flag: bool = False

    def __post_init__(self):
        if self.order < 1:
            raise ValidationError(f"order must be >= 1, got {self.order}")
        cleaned = {}
        for beta, c in self.coefficients.items():
            beta = tuple(int(b) for b in beta)
            if len(beta) != self.grid.dim:
                raise ValidationError(
                    f"multi-index {beta} has length {len(beta)}, expected {self.grid.dim}"
                )
            if not 1 <= sum(beta) <= self.order:
                raise ValidationError(
                    f"multi-index {beta} outside 1 <= |beta| <= {self.order}"
                )
            c = np.asarray(c, dtype=np.float64)
            if c.shape != self.grid.shape:
                raise ValidationError(f"coefficient for {beta} has shape {c.shape}")
            cleaned[beta] = c
        object.__setattr__(self, "coefficients", cleaned)
        betas = [b for b in graded_multi_indices(self.grid.dim, self.order) if b in cleaned]
        powers = np.array(betas, dtype=np.int64).reshape(len(betas), self.grid.dim)
        scaled = np.stack(
            [cleaned[b] / np.prod([math.factorial(x) for x in b]) for b in betas]
        ) if betas else np.zeros((0,) + self.grid.shape)
        object.__setattr__(self, "_betas", tuple(betas))
        object.__setattr__(self, "_powers", powers)
        object.__setattr__(self, "_scaled_stack", scaled)

    def coefficient(self, beta: tuple[int, ...]) -> np.ndarray:
        """d^beta/dp^beta H(x, 0), zero field if absent."""
        return self.coefficients.get(tuple(beta), np.zeros(self.grid.shape))


def quadratic_hamiltonian(grid: SpatialGrid) -> HamiltonianSeries:
    """Kinetic energy |p|^2/2 with the fast-path flag set."""
    coeffs = {}
    for j in range(grid.dim):
        beta = tuple(2 if i == j else 0 for i in range(grid.dim))
        coeffs[beta] = np.ones(grid.shape)
    return HamiltonianSeries(grid, 2, coeffs, quadratic_flag=True)


def hamiltonian_eval_arrays(H: HamiltonianSeries, p: list[np.ndarray]) -> np.ndarray:
    if len(p) != H.grid.dim:
        raise ValidationError(
            f"momentum has {len(p)} components, expected {H.grid.dim}"
        )
    if H.quadratic_flag:
        return 0.5 * sum(np.asarray(c) ** 2 for c in p)
    pmat = np.stack([np.asarray(c).reshape(-1) for c in p])
    flat = kernels.monomial_series_eval(
        H._scaled_stack.reshape(len(H._betas), -1), H._powers, pmat
    )
    return flat.reshape(H.grid.shape)


def hamiltonian_grad_arrays(H: HamiltonianSeries, p: list[np.ndarray]) -> list[np.ndarray]:
    if len(p) != H.grid.dim:
        raise ValidationError(
            f"momentum has {len(p)} components, expected {H.grid.dim}"
        )
    if H.quadratic_flag:
        return [np.asarray(c).copy() for c in p]
    pmat = np.stack([np.asarray(c).reshape(-1) for c in p])
    flat = kernels.monomial_series_grad(
        H._scaled_stack.reshape(len(H._betas), -1), H._powers, pmat
    )
    return [flat[j].reshape(H.grid.shape) for j in range(H.grid.dim)]


def hamiltonian_eval(H: HamiltonianSeries, P: list[ScalarField]) -> ScalarField:
    """H(x, P(x)) pointwise."""
    return ScalarField(H.grid, hamiltonian_eval_arrays(H, [f.values for f in P]))


def hamiltonian_grad(H: HamiltonianSeries, P: list[ScalarField]) -> list[ScalarField]:
    """Momentum gradient H_p(x, P(x)) pointwise; identity on P when quadratic."""
    return [
        ScalarField(H.grid, g)
        for g in hamiltonian_grad_arrays(H, [f.values for f in P])
    ]


def extract_linearization_coeffs(H: HamiltonianSeries):
    """First- and second-order momentum coefficients at p = 0.

    Returns (A1, B1): A1[j] = H(e_j) as fields, B1[i][j] the Hessian-in-p
    entries H(e_i + e_j).  B1 is the identity for the quadratic flag and
    zero when the series order is 1.
    """
    n = H.grid.dim
    shape = H.grid.shape
    if H.quadratic_flag:
        A1 = [ScalarField(H.grid, np.zeros(shape)) for _ in range(n)]
        B1 = [
            [
                ScalarField(H.grid, np.ones(shape) if i == j else np.zeros(shape))
                for j in range(n)
            ]
            for i in range(n)
        ]
        return A1, B1
    A1 = []
    for j in range(n):
        beta = tuple(1 if i == j else 0 for i in range(n))
        A1.append(ScalarField(H.grid, H.coefficient(beta).copy()))
    B1 = []
    for i in range(n):
        row = []
        for j in range(n):
            beta = tuple(
                (2 if (k == i and k == j) else (1 if k in (i, j) else 0))
                for k in range(n)
            )
            if H.order >= 2:
                row.append(ScalarField(H.grid, H.coefficient(beta).copy()))
            else:
                row.append(ScalarField(H.grid, np.zeros(shape)))
        B1.append(row)
    return A1, B1
