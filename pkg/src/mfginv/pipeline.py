"""
Measurement datasets produced by the nonlinear solver.

Recovery works on responses to complex plane-wave probes; the forward
solver is real, so a complex response is reassembled by linearity from
cos/sin probe pairs: order 1 is u[cos] + i u[sin], order 2 uses the
bilinearity of the mixed second derivative.  Conjugate probes come for
free (the solution map has a real derivative, so data(-zeta) is the
complex conjugate of data(zeta)).
"""

from __future__ import annotations

import numpy as np

from .forward import MFGConfig
from .grids import ScalarField
from .linearize import ProbeSpec, fd_extract

__all__ = [
    "measurement_dataset_order1",
    "measurement_pair_order2",
    "with_conjugates",
]


def _order1_response(cfg: MFGConfig, spec: ProbeSpec, eps: float, threads: int) -> ScalarField:
    return fd_extract(cfg, [spec], 1, eps, threads=threads).u[(1,)].initial


def measurement_dataset_order1(
    cfg: MFGConfig, freqs, eps: float, threads: int = 1
) -> dict:
    """u(1)(.,0) for complex probes exp(2 pi i zeta.x), keyed by zeta."""
    data: dict[tuple, ScalarField] = {}
    for zeta in freqs:
        zt = tuple(int(z) for z in zeta)
        if zt in data:
            continue
        neg = tuple(-z for z in zt)
        if neg in data:
            data[zt] = ScalarField(cfg.grid, np.conj(data[neg].values))
            continue
        if all(z == 0 for z in zt):
            data[zt] = _order1_response(
                cfg, ProbeSpec(mode="constant", zeta=zt), eps, threads
            )
            continue
        re = _order1_response(cfg, ProbeSpec("plane", zt, "cos"), eps, threads)
        im = _order1_response(cfg, ProbeSpec("plane", zt, "sin"), eps, threads)
        data[zt] = ScalarField(cfg.grid, re.values + 1j * im.values)
    return data


def with_conjugates(data: dict, cfg: MFGConfig) -> dict:
    out = dict(data)
    for zt, fielddata in data.items():
        neg = tuple(-z for z in zt)
        if neg not in out:
            out[neg] = ScalarField(cfg.grid, np.conj(fielddata.values))
    return out


def measurement_pair_order2(
    cfg: MFGConfig, zeta1, zeta2, eps: float, threads: int = 1
) -> ScalarField:
    """Mixed second derivative u(1,2)(.,0) for two complex plane probes.

    With f_j = c_j + i s_j the bilinear response satisfies
    B(f1,f2) = B(c1,c2) - B(s1,s2) + i (B(c1,s2) + B(s1,c2)),
    and each real B(a,b) is one inclusion-exclusion corner stencil.
    """
    z1 = tuple(int(z) for z in zeta1)
    z2 = tuple(int(z) for z in zeta2)

    cache: dict = {}

    def real_pair(spec_a: ProbeSpec, spec_b: ProbeSpec) -> np.ndarray:
        key = (spec_a.zeta, spec_a.phase, spec_b.zeta, spec_b.phase)
        rkey = key[2:] + key[:2]
        if key in cache:
            return cache[key]
        if rkey in cache:
            return cache[rkey]
        res = fd_extract(cfg, [spec_a, spec_b], 2, eps, threads=threads)
        out = res.u[(1, 2)].initial.values
        cache[key] = out
        return out

    c1, s1 = ProbeSpec("plane", z1, "cos"), ProbeSpec("plane", z1, "sin")
    c2, s2 = ProbeSpec("plane", z2, "cos"), ProbeSpec("plane", z2, "sin")
    vals = (
        real_pair(c1, c2)
        - real_pair(s1, s2)
        + 1j * (real_pair(c1, s2) + real_pair(s1, c2))
    )
    return ScalarField(cfg.grid, vals)
