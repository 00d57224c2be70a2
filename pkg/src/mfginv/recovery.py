"""
Taylor-coefficient recovery of running/terminal costs from measurements.

Everything here exploits one structural fact: a plane-wave density probe
f(x) = exp(2 pi i zeta.x) propagates under the heat flow as a single
decaying wave, so each unknown Fourier coefficient enters the linearized
measurement through an explicit scalar factor.  With

    c(K) = (1 - exp(-4 pi^2 K T)) / (4 pi^2 K),    E(K) = exp(-4 pi^2 K T),

the order-1 measurement produced by probe zeta carries, at frequency
xi = eta + zeta,

    uhat(xi) = Fhat(eta) * c(|xi|^2 + |zeta|^2) + Ghat(eta) * E(|xi|^2 + |zeta|^2)

for a static running cost (time-dependent costs replace c by moments of
the coefficient's time profile against the decaying exponential).  The
recovery operations invert these relations per frequency:

* known G, static F: divide by c (closed form), average over probes
  weighted by |c|;
* known G, time-dependent F: a small Tikhonov-regularized moment problem
  per frequency in a cosine time basis (severely ill-conditioned, the
  per-frequency condition numbers are reported rather than hidden);
* known F: subtract the F term and undo the terminal heat smoothing by
  the multiplier exp(+4 pi^2 |xi|^2 T) under a hard cutoff plus a
  per-mode amplification guard;
* both unknown, static F: two decompositions xi = xi1 + xi2 with distinct
  S = |xi1|^2 + |xi2|^2 give a 2x2 system  c(S) a_xi + E(S) b_xi = d(S)
  whose determinant is nonzero for S != S' (frequencies where it falls
  below 1e-14 are refused individually and reported);
* order k >= 2: subtract the prediction generated by the already
  recovered lower orders (the order-k system is affine in the order-k
  coefficients), after which the residual has exactly the order-1 shape
  with probe rate R = sum |zeta_i|^2 and frequency shift sum zeta_i.

Synthetic linear data for round-trip testing is generated in spectrum
space by the same closed forms (exact per mode, no quadrature).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .costs import TaylorCost, quadratic_hamiltonian
from .forward import MFGConfig
from .grids import (
    FourierSpectrum,
    ScalarField,
    SpaceTimeField,
    SpatialGrid,
    TimeGrid,
    ValidationError,
    canonical_frequencies,
)
from .linearize import ProbeSpec, linearize_direct
from .spectral import dft_forward

__all__ = [
    "ProbePlan",
    "ReconstructionReport",
    "RecoveryError",
    "rel_l2_error",
    "exp_moment",
    "heat_decay",
    "synthesize_order1_data",
    "synthesize_order_k_data",
    "recover_G1",
    "recover_F1_static",
    "recover_F1_timedep",
    "decompose_frequency",
    "recover_FG_simultaneous",
    "recover_higher_order",
    "gram_injectivity_check",
    "simultaneous_probe_frequencies",
]

# hard per-mode guard on the backward-heat multiplier
AMPLIFICATION_LIMIT = 1.0 / (100.0 * np.finfo(np.float64).eps)
DET_FLOOR = 1e-14
CONDITION_FLAG = 1e12


class RecoveryError(RuntimeError):
    """A reconstruction cannot proceed with the supplied plan/data."""


@dataclass(frozen=True)
class ProbePlan:
    """Probe family and inversion parameters for a reconstruction."""

    probes: tuple[ProbeSpec, ...]
    cutoff: int
    time_basis_size: int = 1
    tikhonov: float = 0.0
    division_floor: float = 1e-8

    def __post_init__(self):
        if self.cutoff < 0:
            raise ValidationError("cutoff must be nonnegative")
        if self.time_basis_size < 1:
            raise ValidationError("time basis needs at least one element")
        if self.tikhonov < 0:
            raise ValidationError("tikhonov weight must be >= 0")
        if not self.probes:
            raise ValidationError("a probe plan needs at least one probe")

    def validate_for(self, grid: SpatialGrid):
        if self.cutoff >= grid.points_per_axis // 2:
            raise ValidationError(
                f"cutoff {self.cutoff} must stay below Nyquist "
                f"({grid.points_per_axis // 2})"
            )

    def frequencies(self, dim: int) -> list[tuple[int, ...]]:
        return [p.frequency(dim) for p in self.probes]


@dataclass
class ReconstructionReport:
    """Recovered coefficient fields plus the inversion diagnostics."""

    recovered: dict[str, object] = dc_field(default_factory=dict)
    cutoff: int = 0
    tikhonov: float = 0.0
    per_frequency: dict = dc_field(default_factory=dict)
    refused: list = dc_field(default_factory=list)
    masked_modes: list = dc_field(default_factory=list)
    admissible_cutoff: int | None = None
    residual_norms: dict = dc_field(default_factory=dict)
    comparisons: dict = dc_field(default_factory=dict)
    notes: list = dc_field(default_factory=list)

    def compare(self, name: str, truth) -> float:
        err = rel_l2_error(self.recovered[name], truth)
        self.comparisons[name] = err
        return err


def rel_l2_error(recovered, truth) -> float:
    a = recovered.values if hasattr(recovered, "values") else np.asarray(recovered)
    b = truth.values if hasattr(truth, "values") else np.asarray(truth)
    denom = float(np.linalg.norm(b.ravel()))
    if denom == 0.0:
        return float(np.linalg.norm(a.ravel()))
    return float(np.linalg.norm((a - b).ravel())) / denom


# ----------------------------------------------------------------------
# closed-form scalar factors

def exp_moment(a, T: float):
    """int_0^T exp(-a s) ds, vectorized, with the a -> 0 limit T."""
    a = np.asarray(a, dtype=np.float64)
    safe = np.where(a > 0, a, 1.0)
    out = np.where(a > 0, -np.expm1(-safe * T) / safe, T)
    return out if out.shape else float(out)


def heat_decay(K, T: float):
    """exp(-4 pi^2 K T)."""
    out = np.exp(-4.0 * np.pi**2 * np.asarray(K, dtype=np.float64) * T)
    return out if out.shape else float(out)


def _cosine_moment(a: float, p: int, T: float) -> float:
    """int_0^T exp(-a s) cos(p pi s / T) ds (exact)."""
    if p == 0:
        return float(exp_moment(a, T))
    b = p * np.pi / T
    return a * (1.0 - (-1.0) ** p * np.exp(-a * T)) / (a * a + b * b)


def piecewise_linear_exp_moments(nodes: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Weights w_k(a) with int_0^T exp(-a s) f(s) ds = sum_k w_k f(t_k)
    exact for piecewise-linear f on the nodes.  Returns (len(nodes),) + a.shape."""
    a = np.asarray(a, dtype=np.float64)
    w = np.zeros((len(nodes),) + a.shape)
    for j in range(len(nodes) - 1):
        h = nodes[j + 1] - nodes[j]
        ah = a * h
        small = np.abs(ah) < 1e-8
        safe = np.where(small, 1.0, a)
        em = np.exp(-safe * h)
        I0 = np.where(small, h * (1 - ah / 2), (1 - em) / safe)
        I1 = np.where(small, h * h * (0.5 - ah / 3), (1 - em * (1 + safe * h)) / safe**2)
        front = np.exp(-a * nodes[j])
        w[j] += front * (I0 - I1 / h)
        w[j + 1] += front * (I1 / h)
    return w


def _roll_spectrum(coeffs: np.ndarray, zeta) -> np.ndarray:
    """Array D with D[xi] = coeffs[xi - zeta] on the wrap-around lattice."""
    return np.roll(coeffs, shift=tuple(int(z) for z in zeta), axis=tuple(range(coeffs.ndim)))


def _spectrum(fieldobj) -> np.ndarray:
    return dft_forward(fieldobj).coefficients


# ----------------------------------------------------------------------
# synthetic linear data (exact, spectrum space)

def synthesize_order1_data(
    grid: SpatialGrid,
    T: float,
    zeta,
    F1: ScalarField | SpaceTimeField | None = None,
    G1: ScalarField | None = None,
) -> ScalarField:
    """Exact order-1 measurement u1(.,0) for the probe exp(2 pi i zeta.x).

    Static running coefficients use the closed-form moment c; a
    space-time coefficient is treated as piecewise linear between its
    time nodes, for which the exponential moments are again exact.
    """
    zeta = tuple(int(z) for z in np.atleast_1d(zeta))
    rate = grid.frequency_norm2() + float(sum(z * z for z in zeta))
    a = 4.0 * np.pi**2 * rate
    uhat = np.zeros(grid.shape, dtype=np.complex128)
    if F1 is not None:
        if isinstance(F1, SpaceTimeField):
            Fh = np.stack([_spectrum(F1.slice_at(k)) for k in range(F1.time.num_nodes)])
            w = piecewise_linear_exp_moments(F1.time.nodes(), a)
            for k in range(F1.time.num_nodes):
                uhat += w[k] * _roll_spectrum(Fh[k], zeta)
        else:
            uhat += _roll_spectrum(_spectrum(F1), zeta) * exp_moment(a, T)
    if G1 is not None:
        uhat += _roll_spectrum(_spectrum(G1), zeta) * np.exp(-a * T)
    values = np.fft.ifftn(uhat * grid.num_points)
    return ScalarField(grid, values)


def synthesize_order_k_data(
    grid: SpatialGrid,
    T: float,
    zetas,
    Fk: ScalarField | None = None,
    Gk: ScalarField | None = None,
) -> ScalarField:
    """Exact order-k measurement for probes exp(2 pi i zeta_i.x) when all
    lower-order coefficients vanish: the density product is the single wave
    with frequency sum(zeta_i) and decay rate sum |zeta_i|^2."""
    zetas = [tuple(int(z) for z in np.atleast_1d(z0)) for z0 in zetas]
    sigma = tuple(int(s) for s in np.sum(np.array(zetas), axis=0))
    R = float(sum(sum(z * z for z in zeta) for zeta in zetas))
    rate = grid.frequency_norm2() + R
    a = 4.0 * np.pi**2 * rate
    uhat = np.zeros(grid.shape, dtype=np.complex128)
    if Fk is not None:
        uhat += _roll_spectrum(_spectrum(Fk), sigma) * exp_moment(a, T)
    if Gk is not None:
        uhat += _roll_spectrum(_spectrum(Gk), sigma) * np.exp(-a * T)
    return ScalarField(grid, np.fft.ifftn(uhat * grid.num_points))


# ----------------------------------------------------------------------
# frequency bookkeeping

def _below_nyquist(xi, grid: SpatialGrid) -> bool:
    half = grid.points_per_axis // 2
    return all(abs(int(c)) <= half - 1 for c in xi)


def _norm2(xi) -> float:
    return float(sum(int(c) ** 2 for c in xi))


def decompose_frequency(xi, n: int):
    """Two splittings xi = xi1 + xi2 with all parts nonzero and distinct
    |xi1|^2 + |xi2|^2, found by the deterministic axis walk
    xi1 = xi + k e1, xi2 = -k e1, k = 1, 2, ...
    """
    xi = tuple(int(c) for c in np.atleast_1d(xi))
    if len(xi) != n:
        raise ValidationError(f"frequency {xi} does not have dimension {n}")
    found = []
    k = 0
    while len(found) < 2 and k < 64:
        k += 1
        xi1 = tuple(c + (k if j == 0 else 0) for j, c in enumerate(xi))
        xi2 = tuple(-k if j == 0 else 0 for j in range(n))
        if all(c == 0 for c in xi1):
            continue
        S = _norm2(xi1) + _norm2(xi2)
        if found and abs(S - found[0][2]) == 0:
            continue
        found.append((xi1, xi2, S))
    if len(found) < 2:  # unreachable for any lattice vector; guarded anyway
        raise RecoveryError(f"no frequency decomposition found for {xi}")
    (xi1, xi2, _), (xi1p, xi2p, _) = found
    return xi1, xi2, xi1p, xi2p


def simultaneous_probe_frequencies(n: int, cutoff: int) -> list[tuple[int, ...]]:
    """Probe frequencies (-xi2 over both decompositions) covering a cutoff box."""
    needed = set()
    for xi in canonical_frequencies_box(n, cutoff):
        xi1, xi2, xi1p, xi2p = decompose_frequency(xi, n)
        needed.add(tuple(-c for c in xi2))
        needed.add(tuple(-c for c in xi2p))
    return sorted(needed, key=lambda f: (_norm2(f), f))


def canonical_frequencies_box(n: int, cutoff: int) -> list[tuple[int, ...]]:
    """|xi|_inf <= cutoff, sorted by |xi|^2 then lexicographically."""
    freqs = [()]
    for _ in range(n):
        freqs = [f + (k,) for f in freqs for k in range(-cutoff, cutoff + 1)]
    freqs.sort(key=lambda f: (sum(c * c for c in f), f))
    return freqs


def _data_spectra(data: dict) -> dict:
    return {tuple(k): _spectrum(v) for k, v in data.items()}


def _assemble(grid: SpatialGrid, entries: dict) -> ScalarField:
    """Inverse transform of a coefficient table (band-limited by construction)."""
    spec = np.zeros(grid.shape, dtype=np.complex128)
    N = grid.points_per_axis
    for xi, val in entries.items():
        idx = tuple(int(c) % N for c in xi)
        spec[idx] = val
    vals = np.fft.ifftn(spec * grid.num_points)
    return ScalarField(grid, np.ascontiguousarray(vals.real))


# ----------------------------------------------------------------------
# order-1 recoveries

def recover_F1_static(
    data: dict,
    knownG1: ScalarField | None,
    plan: ProbePlan,
    grid: SpatialGrid,
    T: float,
) -> ReconstructionReport:
    """Static F(1) from probe measurements with G(1) known."""
    plan.validate_for(grid)
    spectra = _data_spectra(data)
    Gh = _spectrum(knownG1) if knownG1 is not None else None
    report = ReconstructionReport(cutoff=plan.cutoff)
    entries = {}
    missing = []
    for eta in canonical_frequencies(grid, plan.cutoff):
        num = 0.0 + 0.0j
        den = 0.0
        rows = []
        for zeta, uhat in spectra.items():
            if all(z == 0 for z in zeta):
                continue
            xi = tuple(e + z for e, z in zip(eta, zeta))
            if not _below_nyquist(xi, grid):
                continue
            K = _norm2(xi) + _norm2(zeta)
            c = float(exp_moment(4.0 * np.pi**2 * K, T))
            d = uhat[tuple(int(x) % grid.points_per_axis for x in xi)]
            if Gh is not None:
                d = d - Gh[tuple(int(e) % grid.points_per_axis for e in eta)] * heat_decay(K, T)
            est = d / c
            rows.append({"zeta": zeta, "K": K, "weight": abs(c)})
            num += abs(c) * est
            den += abs(c)
        if den == 0.0:
            missing.append(eta)
            continue
        entries[eta] = num / den
        report.per_frequency[eta] = {"probes": rows}
    if missing:
        raise RecoveryError(
            f"insufficient probes for target frequencies: {missing[:8]}"
            + (" ..." if len(missing) > 8 else "")
        )
    report.recovered["F1"] = _assemble(grid, entries)
    return report


def recover_G1(
    data: dict,
    knownF1: ScalarField | SpaceTimeField | None,
    plan: ProbePlan,
    grid: SpatialGrid,
    T: float,
) -> ReconstructionReport:
    """Terminal coefficient G(1) with the running cost known.

    Uses the constant probe when present (then the first-order density is
    identically one); a plane-wave probe works too, at the cost of a
    pointwise division by its terminal density, floored and reported.
    """
    plan.validate_for(grid)
    report = ReconstructionReport(cutoff=plan.cutoff)
    keys = [tuple(k) for k in data.keys()]
    zero = tuple(0 for _ in range(grid.dim))
    zeta = zero if zero in keys else keys[0]
    fielddata = data[zeta]

    uhat = _spectrum(fielddata)
    fpart = synthesize_order1_data(grid, T, zeta, F1=knownF1, G1=None)
    resid = uhat - _spectrum(fpart)

    norm2 = grid.frequency_norm2()
    log_amp = 4.0 * np.pi**2 * norm2 * T
    admissible = log_amp <= np.log(AMPLIFICATION_LIMIT)
    amp = np.exp(np.where(admissible, log_amp, 0.0))
    limit_norm2 = np.log(AMPLIFICATION_LIMIT) / (4.0 * np.pi**2 * T)
    report.admissible_cutoff = int(np.floor(np.sqrt(max(limit_norm2, 0.0))))

    keep = np.zeros(grid.shape, dtype=bool)
    N = grid.points_per_axis
    for xi in canonical_frequencies(grid, plan.cutoff):
        idx = tuple(int(c) % N for c in xi)
        if admissible[idx]:
            keep[idx] = True
        else:
            report.masked_modes.append(xi)
    if report.masked_modes:
        report.notes.append(
            f"{len(report.masked_modes)} modes exceeded the amplification guard "
            f"(admissible |xi| <= {report.admissible_cutoff}); recovered as 0"
        )

    gm_hat = np.where(keep, resid * amp, 0.0)
    gm = np.fft.ifftn(gm_hat * grid.num_points)

    # divide by the terminal first-order density of the probe
    if zeta == zero:
        g_vals = gm
    else:
        mesh = grid.meshgrid()
        phase = 2.0 * np.pi * sum(z * mesh[j] for j, z in enumerate(zeta))
        m1T = np.exp(-4.0 * np.pi**2 * _norm2(zeta) * T) * np.exp(1j * phase)
        ok = np.abs(m1T) >= plan.division_floor
        g_vals = np.where(ok, gm / np.where(ok, m1T, 1.0), 0.0)
        n_masked = int(np.sum(~ok))
        if n_masked:
            report.notes.append(
                f"pointwise division masked at {n_masked} grid points "
                f"(|m1(.,T)| below {plan.division_floor:g})"
            )
    resid_imag = float(np.max(np.abs(np.asarray(g_vals).imag)))
    report.residual_norms["imag_residue"] = resid_imag
    report.recovered["G1"] = ScalarField(grid, np.ascontiguousarray(np.asarray(g_vals).real))
    return report


def recover_F1_timedep(
    data: dict,
    knownG1: ScalarField | None,
    plan: ProbePlan,
    grid: SpatialGrid,
    time: TimeGrid,
) -> ReconstructionReport:
    """Time-dependent F(1)(x,t) by per-frequency moment inversion.

    Each probe contributes one moment of the coefficient's time profile
    against a decaying exponential; the profile is expanded in a cosine
    basis on [0,T] and the (ill-conditioned) moment system is solved by
    Tikhonov-regularized least squares.  Per-frequency condition numbers
    are recorded and flagged above 1e12.
    """
    plan.validate_for(grid)
    T = time.horizon
    P = plan.time_basis_size
    lam = plan.tikhonov
    spectra = _data_spectra(data)
    Gh = _spectrum(knownG1) if knownG1 is not None else None
    report = ReconstructionReport(cutoff=plan.cutoff, tikhonov=lam)

    nodes = time.nodes()
    basis = np.stack([np.cos(p * np.pi * nodes / T) for p in range(P)])

    profile = {}
    insufficient = []
    for eta in canonical_frequencies(grid, plan.cutoff):
        rows = []
        rhs = []
        seen_rates = set()
        for zeta, uhat in spectra.items():
            xi = tuple(e + z for e, z in zip(eta, zeta))
            if not _below_nyquist(xi, grid):
                continue
            K = _norm2(xi) + _norm2(zeta)
            key = round(K, 9)
            if key in seen_rates:
                continue
            seen_rates.add(key)
            a = 4.0 * np.pi**2 * K
            d = uhat[tuple(int(x) % grid.points_per_axis for x in xi)]
            if Gh is not None:
                d = d - Gh[tuple(int(e) % grid.points_per_axis for e in eta)] * np.exp(-a * T)
            rows.append([_cosine_moment(a, p, T) for p in range(P)])
            rhs.append(d)
        if len(rows) < P:
            insufficient.append(eta)
            continue
        A = np.asarray(rows, dtype=np.float64)
        d = np.asarray(rhs, dtype=np.complex128)
        # the raw rows differ by orders of magnitude purely through the
        # closed-form factor c(K); equilibrate so lambda penalizes the
        # coefficient vector rather than silently deleting the stiff rows
        scale = np.linalg.norm(A, axis=1, keepdims=True)
        scale[scale == 0] = 1.0
        A_eq = A / scale
        d_eq = d / scale.ravel()
        cond = float(np.linalg.cond(A_eq))
        if lam > 0:
            A_aug = np.vstack([A_eq, np.sqrt(lam) * np.eye(P)]).astype(np.complex128)
            d_aug = np.concatenate([d_eq, np.zeros(P, dtype=np.complex128)])
        else:
            A_aug = A_eq.astype(np.complex128)
            d_aug = d_eq
        coef, *_ = np.linalg.lstsq(A_aug, d_aug, rcond=None)
        profile[eta] = coef
        report.per_frequency[eta] = {
            "condition_number": cond,
            "num_probes": len(rows),
            "flagged": cond > CONDITION_FLAG,
        }
    if insufficient:
        raise RecoveryError(
            f"fewer than {P} distinct decay rates for frequencies: {insufficient[:8]}"
        )

    N = grid.points_per_axis
    spec_nodes = np.zeros((time.num_nodes,) + grid.shape, dtype=np.complex128)
    for eta, coef in profile.items():
        idx = tuple(int(c) % N for c in eta)
        spec_nodes[(slice(None),) + idx] = coef @ basis
    vals = np.fft.ifftn(
        spec_nodes * grid.num_points, axes=tuple(range(1, grid.dim + 1))
    ).real
    report.recovered["F1"] = SpaceTimeField(grid, time, np.ascontiguousarray(vals))
    return report


def recover_FG_simultaneous(
    data: dict,
    plan: ProbePlan,
    grid: SpatialGrid,
    T: float,
) -> ReconstructionReport:
    """Static F(1) and G(1) together via per-frequency 2x2 systems."""
    plan.validate_for(grid)
    spectra = _data_spectra(data)
    report = ReconstructionReport(cutoff=plan.cutoff)
    f_entries = {}
    g_entries = {}
    N = grid.points_per_axis
    for xi in canonical_frequencies(grid, plan.cutoff):
        xi1, xi2, xi1p, xi2p = decompose_frequency(xi, grid.dim)
        rows = []
        ok = True
        for part1, part2 in ((xi1, xi2), (xi1p, xi2p)):
            zeta = tuple(-c for c in part2)
            if zeta not in spectra:
                raise RecoveryError(
                    f"probe {zeta} required for frequency {xi} is missing"
                )
            if not _below_nyquist(part1, grid):
                ok = False
                break
            S = _norm2(part1) + _norm2(part2)
            d = spectra[zeta][tuple(int(c) % N for c in part1)]
            rows.append((float(exp_moment(4 * np.pi**2 * S, T)), float(heat_decay(S, T)), d, S))
        if not ok:
            report.refused.append({"xi": xi, "reason": "readout above Nyquist"})
            continue
        (c1, E1, d1, S1), (c2, E2, d2, S2) = rows
        det = c1 * E2 - c2 * E1
        info = {"S": S1, "S_prime": S2, "det": det}
        if abs(det) < DET_FLOOR:
            report.refused.append({"xi": xi, "reason": "2x2 determinant below floor", **info})
            continue
        a = (d1 * E2 - d2 * E1) / det
        b = (c1 * d2 - c2 * d1) / det
        f_entries[xi] = a
        g_entries[xi] = b
        report.per_frequency[xi] = info
    if report.refused:
        report.notes.append(
            f"{len(report.refused)} frequencies refused (left at 0); see report.refused"
        )
    report.recovered["F1"] = _assemble(grid, f_entries)
    report.recovered["G1"] = _assemble(grid, g_entries)
    return report


# ----------------------------------------------------------------------
# higher orders

def _lower_order_prediction(
    grid: SpatialGrid,
    time: TimeGrid,
    zetas,
    lower_F: list,
    lower_G: list,
) -> ScalarField:
    """Order-k measurement generated by the recovered lower-order
    coefficients with the order-k coefficients set to zero."""
    k = len(zetas)
    F = (
        TaylorCost("running-static", grid, tuple(c.values for c in lower_F))
        if lower_F
        else None
    )
    G = (
        TaylorCost("terminal", grid, tuple(c.values for c in lower_G))
        if lower_G
        else None
    )
    cfg = MFGConfig(grid, time, quadratic_hamiltonian(grid), F=F, G=G)
    probes = []
    mesh = grid.meshgrid()
    for zeta in zetas:
        phase = 2.0 * np.pi * sum(z * mesh[j] for j, z in enumerate(zeta))
        probes.append(ScalarField(grid, np.exp(1j * phase)))
    res = linearize_direct(cfg, probes, k)
    return res.u[tuple(range(1, k + 1))].initial


def recover_higher_order(
    k: int,
    lower: dict,
    data_k: dict,
    plan: ProbePlan,
    grid: SpatialGrid,
    time: TimeGrid,
    target: str = "F",
    known_Fk: ScalarField | None = None,
    known_Gk: ScalarField | None = None,
) -> ReconstructionReport:
    """Order-k coefficient recovery given all lower orders.

    `lower` carries lists "F" and "G" of recovered ScalarFields for
    orders 1..k-1 (empty lists when those coefficients vanish).  `data_k`
    maps k-tuples of probe frequencies to the measured order-k response
    u(1..k)(.,0) for the complex probes exp(2 pi i zeta_i . x).  The
    prediction from the lower orders is subtracted (it is zero when all
    lower coefficients are zero); the residual is inverted per frequency
    exactly like order 1 with rate shift R = sum |zeta_i|^2.
    """
    if k < 2:
        raise ValidationError("recover_higher_order starts at k = 2")
    if target not in ("F", "G", "FG"):
        raise ValidationError(f"unknown target {target!r}")
    lower_F = list(lower.get("F", ()))
    lower_G = list(lower.get("G", ()))
    if max(len(lower_F), len(lower_G)) < k - 1 and (lower_F or lower_G):
        raise RecoveryError(
            f"order-{k} recovery needs all coefficients below order {k}; "
            f"got F up to {len(lower_F)}, G up to {len(lower_G)}"
        )
    plan.validate_for(grid)
    T = time.horizon
    report = ReconstructionReport(cutoff=plan.cutoff, tikhonov=plan.tikhonov)

    have_lower = any(np.any(np.abs(c.values) > 0) for c in lower_F + lower_G)
    residuals = {}
    for zetas, fielddata in data_k.items():
        zetas = tuple(tuple(int(z) for z in zeta) for zeta in zetas)
        if len(zetas) != k:
            raise ValidationError(f"data key {zetas} is not a {k}-tuple of probes")
        res = _spectrum(fielddata)
        if have_lower:
            pred = _lower_order_prediction(grid, time, zetas, lower_F, lower_G)
            res = res - _spectrum(pred)
        residuals[zetas] = res

    N = grid.points_per_axis
    Gh = _spectrum(known_Gk) if known_Gk is not None else None
    Fh = _spectrum(known_Fk) if known_Fk is not None else None

    if target in ("F", "G"):
        entries = {}
        missing = []
        for eta in canonical_frequencies(grid, plan.cutoff):
            num = 0.0 + 0.0j
            den = 0.0
            for zetas, res in residuals.items():
                sigma = tuple(int(s) for s in np.sum(np.array(zetas), axis=0))
                R = float(sum(_norm2(z) for z in zetas))
                xi = tuple(e + s for e, s in zip(eta, sigma))
                if not _below_nyquist(xi, grid):
                    continue
                K = _norm2(xi) + R
                c = float(exp_moment(4 * np.pi**2 * K, T))
                E = float(heat_decay(K, T))
                d = res[tuple(int(x) % N for x in xi)]
                eta_idx = tuple(int(e) % N for e in eta)
                if target == "F":
                    if Gh is not None:
                        d = d - Gh[eta_idx] * E
                    num += abs(c) * (d / c)
                    den += abs(c)
                else:
                    if Fh is not None:
                        d = d - Fh[eta_idx] * c
                    if 1.0 / max(E, 1e-300) > AMPLIFICATION_LIMIT:
                        report.masked_modes.append(eta)
                        continue
                    num += E * (d / E)
                    den += E
            if den == 0.0:
                if eta in [tuple(m) for m in report.masked_modes]:
                    continue
                missing.append(eta)
                continue
            entries[eta] = num / den
        if missing:
            raise RecoveryError(f"insufficient order-{k} probes for: {missing[:8]}")
        name = f"{target}{k}"
        report.recovered[name] = _assemble(grid, entries)
        return report

    # simultaneous order-k: use probe tuples with zero net frequency and
    # distinct rates, giving a 2x2 per frequency just as at order 1.
    tuples = []
    for zetas, res in residuals.items():
        sigma = tuple(int(s) for s in np.sum(np.array(zetas), axis=0))
        if any(sigma):
            continue
        tuples.append((float(sum(_norm2(z) for z in zetas)), res))
    tuples.sort(key=lambda t: t[0])
    if len(tuples) < 2 or abs(tuples[0][0] - tuples[1][0]) < 1e-12:
        raise RecoveryError(
            "simultaneous order-k recovery needs two zero-net-frequency "
            "probe tuples with distinct rates"
        )
    (R1, res1), (R2, res2) = tuples[0], tuples[1]
    f_entries = {}
    g_entries = {}
    for xi in canonical_frequencies(grid, plan.cutoff):
        idx = tuple(int(c) % N for c in xi)
        K1, K2 = _norm2(xi) + R1, _norm2(xi) + R2
        c1, E1 = float(exp_moment(4 * np.pi**2 * K1, T)), float(heat_decay(K1, T))
        c2, E2 = float(exp_moment(4 * np.pi**2 * K2, T)), float(heat_decay(K2, T))
        det = c1 * E2 - c2 * E1
        if abs(det) < DET_FLOOR:
            report.refused.append({"xi": xi, "reason": "2x2 determinant below floor", "det": det})
            continue
        d1, d2 = res1[idx], res2[idx]
        f_entries[xi] = (d1 * E2 - d2 * E1) / det
        g_entries[xi] = (c1 * d2 - c2 * d1) / det
        report.per_frequency[xi] = {"S": K1, "S_prime": K2, "det": det}
    report.recovered[f"F{k}"] = _assemble(grid, f_entries)
    report.recovered[f"G{k}"] = _assemble(grid, g_entries)
    return report


# ----------------------------------------------------------------------
# density-lemma surrogate

def gram_injectivity_check(
    probe_freqs,
    cutoff: int,
    grid: SpatialGrid,
    T: float,
) -> dict:
    """Smallest singular value of the band-limited pairing map.

    The map sends coefficients of f (|xi|_inf <= cutoff) to the pairings
    of f against the heat solutions generated by the probe family; full
    plane-wave families make it diagonal with entries c(|xi|^2) (and T at
    xi = 0), so the minimum singular value quantifies how close the family
    is to losing a frequency.
    """
    freqs = canonical_frequencies(grid, cutoff)
    probes = [tuple(int(c) for c in np.atleast_1d(z)) for z in probe_freqs]
    if not probes:
        return {"min_singular_value": 0.0, "null_frequencies": list(freqs)}
    A = np.zeros((len(probes), len(freqs)), dtype=np.float64)
    for l, z in enumerate(probes):
        c = float(exp_moment(4 * np.pi**2 * _norm2(z), T))
        for j, xi in enumerate(freqs):
            if xi == z:
                A[l, j] = c
    svals = np.linalg.svd(A, compute_uv=False)
    min_sv = float(svals[min(A.shape) - 1]) if min(A.shape) else 0.0
    covered = {z for z in probes}
    nulls = [xi for xi in freqs if xi not in covered]
    if len(probes) < len(freqs):
        min_sv = 0.0
    return {"min_singular_value": min_sv, "null_frequencies": nulls}
