"""
Linearizations of the solution map around the zero density.

Differentiating the forward solve along eps-parametrized initial data
m0 = sum_l eps_l f_l at eps = 0 produces a hierarchy of linear parabolic
systems.  The polarized derivative indexed by a set S of probe labels
satisfies

    dm(S)/dt - Lap m(S) - div(m(S) A1) = div( sum_{S' subset S} m(S') V(S\\S') )
   -du(S)/dt - Lap u(S) + A1.grad u(S) = F1 m(S) + [lower-order F/H sources]
    u(S)(T) = G1 m(S)(T) + [lower-order G sources],   m(S)(0) = f_i or 0,

where A1 = H_p(x,0) and the bracketed sources are sums over set
partitions of S into at least two blocks, with Hamiltonian coefficient
fields contracted against gradients of the lower-order value fields
(for the kinetic Hamiltonian they collapse to grad u . grad u terms).
Because every source only involves strictly lower orders, the systems
are solved in ascending |S|.

`fd_extract` produces the same derivatives from the nonlinear solver by
inclusion-exclusion corner differences in eps, which is the cross-check
route: the two must agree up to O(eps) plus discretization.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

from .costs import extract_linearization_coeffs
from .forward import MFGConfig, solve_mfg
from .grids import ScalarField, SpaceTimeField, SpatialGrid, ValidationError
from .parabolic import ParabolicProblem, solve_parabolic
from .spectral import divergence_array, gradient_arrays

__all__ = [
    "ProbeSpec",
    "LinearizationResult",
    "set_partitions",
    "linearize_direct",
    "linearize_direct_order1",
    "linearize_direct_order2",
    "fd_extract",
]


@dataclass(frozen=True)
class ProbeSpec:
    """An initial-density perturbation direction, sup-norm normalized."""

    mode: str = "plane"  # "plane" | "constant" | "custom"
    zeta: tuple[int, ...] = (1,)
    phase: str = "cos"  # "cos" | "sin" | "complex"
    custom: ScalarField | None = None

    def __post_init__(self):
        if self.mode not in ("plane", "constant", "custom"):
            raise ValidationError(f"unknown probe mode {self.mode!r}")
        if self.mode == "plane" and self.phase not in ("cos", "sin", "complex"):
            raise ValidationError(f"unknown probe phase {self.phase!r}")
        if self.mode == "custom" and self.custom is None:
            raise ValidationError("custom probe needs a field")

    def frequency(self, dim: int) -> tuple[int, ...]:
        if self.mode == "constant":
            return (0,) * dim
        if self.mode != "plane":
            raise ValidationError("only plane/constant probes carry a frequency")
        if len(self.zeta) != dim:
            raise ValidationError(
                f"probe frequency {self.zeta} has wrong dimension (expected {dim})"
            )
        return tuple(int(z) for z in self.zeta)

    def build(self, grid: SpatialGrid) -> ScalarField:
        if self.mode == "custom":
            if self.custom.grid != grid:
                raise ValidationError("custom probe grid mismatch")
            sup = float(np.max(np.abs(self.custom.values)))
            if sup == 0:
                return self.custom
            return ScalarField(grid, self.custom.values / sup)
        if self.mode == "constant":
            return ScalarField(grid, np.ones(grid.shape))
        zeta = self.frequency(grid.dim)
        half = grid.points_per_axis // 2
        if any(abs(z) >= half for z in zeta):
            raise ValidationError(
                f"probe frequency {zeta} is at or above Nyquist ({half})"
            )
        mesh = grid.meshgrid()
        phase = 2.0 * np.pi * sum(z * mesh[j] for j, z in enumerate(zeta))
        if self.phase == "cos":
            return ScalarField(grid, np.cos(phase))
        if self.phase == "sin":
            return ScalarField(grid, np.sin(phase))
        return ScalarField(grid, np.exp(1j * phase))


@dataclass(frozen=True)
class LinearizationResult:
    order: int
    method: str  # "fd" | "direct"
    u: dict[tuple[int, ...], SpaceTimeField]
    m: dict[tuple[int, ...], SpaceTimeField]
    eps: float | None = None


def set_partitions(seq: tuple):
    """All partitions of seq into unordered nonempty blocks."""
    if len(seq) == 0:
        yield []
        return
    if len(seq) == 1:
        yield [seq]
        return
    first, rest = seq[0], seq[1:]
    for smaller in set_partitions(rest):
        for i, block in enumerate(smaller):
            yield smaller[:i] + [(first,) + block] + smaller[i + 1 :]
        yield [(first,)] + smaller


def _as_field(probe, grid) -> ScalarField:
    if isinstance(probe, ProbeSpec):
        return probe.build(grid)
    if isinstance(probe, ScalarField):
        return probe
    raise ValidationError(f"cannot interpret probe of type {type(probe)!r}")


def _coeff_st(cost, k: int, num_nodes: int, shape) -> np.ndarray | None:
    """Cost coefficient k as an (M+1,)+shape array, or None if absent."""
    if cost is None or k > cost.order:
        return None
    c = cost.coefficients[k - 1]
    if cost.kind == "running":
        return c
    return np.broadcast_to(c, (num_nodes,) + shape)


def linearize_direct(cfg: MFGConfig, probes, order: int) -> LinearizationResult:
    """Solve the linearized hierarchy for all label subsets up to `order`."""
    if order < 1:
        raise ValidationError("order must be >= 1")
    if len(probes) < order:
        raise ValidationError(f"need {order} probes, got {len(probes)}")
    grid, time = cfg.grid, cfg.time
    shape = grid.shape
    nn = time.num_nodes
    n = grid.dim
    fields = [_as_field(p, grid) for p in probes[:order]]

    A1, _ = extract_linearization_coeffs(cfg.H)
    a1 = np.stack([a.values for a in A1])
    has_drift = bool(np.any(a1))
    drift_m = a1 if has_drift else None
    drift_u = -a1 if has_drift else None
    quadratic = cfg.H.quadratic_flag

    F1_st = _coeff_st(cfg.F, 1, nn, shape)
    G1 = cfg.G.coefficients[0] if cfg.G is not None else None

    m_sol: dict[tuple, np.ndarray] = {}
    u_sol: dict[tuple, np.ndarray] = {}
    grad_u: dict[tuple, np.ndarray] = {}

    def hcoef(beta: tuple[int, ...]) -> np.ndarray | None:
        if sum(beta) > cfg.H.order:
            return None
        c = cfg.H.coefficient(beta)
        return c if np.any(c) else None

    def momentum_derivative(R: tuple) -> np.ndarray:
        """Polarized derivative of H_p(x, grad u) of order R at eps = 0."""
        if quadratic:
            return grad_u[R]
        out = np.zeros((n, nn) + shape, dtype=grad_u[R].dtype)
        for part in set_partitions(R):
            for assign in product(range(n), repeat=len(part)):
                prods = np.ones((nn,) + shape, dtype=out.dtype)
                for block, comp in zip(part, assign):
                    prods = prods * grad_u[tuple(sorted(block))][comp]
                for l in range(n):
                    beta = tuple(
                        (1 if i == l else 0) + sum(1 for c in assign if c == i)
                        for i in range(n)
                    )
                    c = hcoef(beta)
                    if c is not None:
                        out[l] += c * prods
        return out

    def hamiltonian_source(S: tuple) -> np.ndarray | None:
        """Partitions of S with >= 2 blocks contracted against H coefficients."""
        acc = None
        for part in set_partitions(S):
            if len(part) < 2:
                continue
            blocks = [tuple(sorted(b)) for b in part]
            if quadratic:
                if len(part) != 2:
                    continue
                term = np.einsum(
                    "c...,c...->...", grad_u[blocks[0]], grad_u[blocks[1]]
                )
                acc = term if acc is None else acc + term
                continue
            for assign in product(range(n), repeat=len(part)):
                beta = tuple(sum(1 for c in assign if c == i) for i in range(n))
                c = hcoef(beta)
                if c is None:
                    continue
                term = np.ones((nn,) + shape, dtype=grad_u[blocks[0]].dtype)
                for block, comp in zip(blocks, assign):
                    term = term * grad_u[block][comp]
                acc = c * term if acc is None else acc + c * term
        return acc

    def cost_source(cost_st_getter, S: tuple, at_terminal: bool):
        """Partitions with >= 2 blocks against F (space-time) or G (terminal)."""
        acc = None
        for part in set_partitions(S):
            if len(part) < 2:
                continue
            coeff = cost_st_getter(len(part))
            if coeff is None:
                continue
            term = coeff
            for block in part:
                mblock = m_sol[tuple(sorted(block))]
                term = term * (mblock[-1] if at_terminal else mblock)
            acc = term if acc is None else acc + term
        return acc

    labels = tuple(range(1, order + 1))
    subsets = [
        s for size in range(1, order + 1) for s in combinations(labels, size)
    ]

    for S in subsets:
        # density equation
        if len(S) == 1:
            data = fields[S[0] - 1]
            source = None
        else:
            dtype = np.complex128 if any(
                np.iscomplexobj(m_sol[k]) for k in m_sol
            ) else np.float64
            data = ScalarField(grid, np.zeros(shape, dtype=dtype))
            comps = np.zeros((n, nn) + shape, dtype=dtype)
            for size in range(1, len(S)):
                for Sp in combinations(S, size):
                    rest = tuple(x for x in S if x not in Sp)
                    comps += m_sol[Sp][None, ...] * momentum_derivative(rest)
            src = np.empty((nn,) + shape, dtype=dtype)
            for j in range(nn):
                src[j] = divergence_array(grid, list(comps[:, j]))
            source = SpaceTimeField(grid, time, src)
        m_prob = ParabolicProblem(
            grid,
            time,
            "forward",
            data,
            drift=drift_m,
            drift_form="divergence",
            source=source,
        )
        m_S = solve_parabolic(m_prob).values
        m_sol[S] = m_S

        # value equation
        hsrc = hamiltonian_source(S)
        fsrc = cost_source(lambda r: _coeff_st(cfg.F, r, nn, shape), S, False)
        q = None
        if hsrc is not None:
            q = -hsrc
        if fsrc is not None:
            q = fsrc if q is None else q + fsrc
        term_vals = np.zeros(shape, dtype=m_S.dtype)
        if G1 is not None:
            term_vals = term_vals + G1 * m_S[-1]
        gsrc = cost_source(
            lambda r: cfg.G.coefficients[r - 1]
            if (cfg.G is not None and r <= cfg.G.order)
            else None,
            S,
            True,
        )
        if gsrc is not None:
            term_vals = term_vals + gsrc
        mst = SpaceTimeField(grid, time, m_S)
        u_prob = ParabolicProblem(
            grid,
            time,
            "backward",
            ScalarField(grid, term_vals),
            drift=drift_u,
            drift_form="advection",
            potential=SpaceTimeField(grid, time, F1_st.copy())
            if F1_st is not None
            else None,
            coupling=mst if F1_st is not None else None,
            source=SpaceTimeField(grid, time, q) if q is not None else None,
        )
        u_S = solve_parabolic(u_prob).values
        u_sol[S] = u_S
        grad_u[S] = np.stack(
            [np.stack(gradient_arrays(grid, u_S[j])) for j in range(nn)], axis=1
        )

    return LinearizationResult(
        order=order,
        method="direct",
        u={S: SpaceTimeField(grid, time, u_sol[S]) for S in subsets},
        m={S: SpaceTimeField(grid, time, m_sol[S]) for S in subsets},
    )


def linearize_direct_order1(cfg: MFGConfig, f1) -> LinearizationResult:
    return linearize_direct(cfg, [f1], 1)


def linearize_direct_order2(
    cfg: MFGConfig, f1, f2, first_order: LinearizationResult | None = None
) -> LinearizationResult:
    # first_order is accepted for interface parity; the recursion recomputes
    # the singles, which are bit-identical to a prior direct solve.
    del first_order
    return linearize_direct(cfg, [f1, f2], 2)


def fd_extract(
    cfg: MFGConfig, probes, order: int, eps: float, threads: int = 1
) -> LinearizationResult:
    """Derivatives of the forward map by inclusion-exclusion in eps.

    Order 1 is (S(eps f1) - S(0))/eps, order 2 the mixed second difference
    (S(eps f1 + eps f2) - S(eps f1) - S(eps f2) + S(0))/eps^2, and so on;
    S(0) = (0,0) is used without solving.  Returns the top-order derivative
    together with every lower-order corner derivative that came for free.
    """
    if order < 1:
        raise ValidationError("order must be >= 1")
    if eps <= 0:
        raise ValidationError("eps must be positive")
    if len(probes) < order:
        raise ValidationError(f"need {order} probes, got {len(probes)}")
    grid, time = cfg.grid, cfg.time
    fields = [_as_field(p, grid) for p in probes[:order]]
    for f in fields:
        if f.is_complex:
            raise ValidationError(
                "fd_extract drives the real-valued solver; use cos/sin probes "
                "and recombine complex responses by linearity"
            )

    labels = tuple(range(1, order + 1))
    subsets = [
        s for size in range(1, order + 1) for s in combinations(labels, size)
    ]

    def corner(S):
        m0 = ScalarField(
            grid, eps * sum(fields[l - 1].values for l in S)
        )
        sol = solve_mfg(cfg, m0)
        return S, sol

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            corners = dict(pool.map(corner, subsets))
    else:
        corners = dict(corner(S) for S in subsets)

    u_out: dict[tuple, SpaceTimeField] = {}
    m_out: dict[tuple, SpaceTimeField] = {}
    for size in range(1, order + 1):
        for S in combinations(labels, size):
            acc_u = np.zeros((time.num_nodes,) + grid.shape)
            acc_m = np.zeros_like(acc_u)
            for k in range(1, size + 1):
                for sub in combinations(S, k):
                    sign = (-1.0) ** (size - k)
                    acc_u += sign * corners[sub].u.values
                    acc_m += sign * corners[sub].m.values
            scale = eps ** (-size)
            u_out[S] = SpaceTimeField(grid, time, acc_u * scale)
            m_out[S] = SpaceTimeField(grid, time, acc_m * scale)

    return LinearizationResult(order=order, method="fd", u=u_out, m=m_out, eps=eps)
