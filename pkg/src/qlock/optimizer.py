"""Pointwise optimization of the complex control gain.

With the loop broken (:func:`qlock.network.open_loop`) the estimator noise
for gain ``g`` is

    Sigma(g) = sum_s S_s |A_s + g B_s|^2 / |1 + g e|^2

i.e. a ratio of Hermitian forms ``v^H P v / v^H Q v`` in ``v = (1, g)``.  Its
minimum over ``g`` (including ``g = inf``) is ``1 / mu_max`` where ``mu_max``
is the largest eigenvalue of the pencil ``Q v = mu P v``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import NumericConditioningError
from .network import OpenLoop, Scenario, open_loop

_PD_RTOL = 1e-13


@dataclass(frozen=True)
class GainSolution:
    omega: float
    optimal_gain: complex
    sigma_opt: float
    method: str
    diagnostics: dict = field(default_factory=dict)


def _forms(ol: OpenLoop) -> tuple[np.ndarray, np.ndarray, float]:
    """Balanced Hermitian forms ``P``, ``Q`` and the gain scale ``s`` (g = s g')."""
    A = ol.A
    B = ol.kappa * (ol.h_sig * ol.S - ol.h_m * ol.A)
    e = -ol.kappa * ol.h_m
    w = np.sqrt(ol.spectra)
    na = np.linalg.norm(w * A)
    nb = np.linalg.norm(w * B)
    s = na / nb if na > 0 and nb > 0 else 1.0
    cols = np.stack([A, s * B], axis=1)  # (sources, 2)
    P = (cols.conj().T * ol.spectra) @ cols
    q = np.array([1.0, s * e])
    Q = np.outer(q.conj(), q)
    return 0.5 * (P + P.conj().T), 0.5 * (Q + Q.conj().T), s


def optimize_open_loop(ol: OpenLoop) -> GainSolution:
    """Eigen-solve the 2x2 pencil of ``ol`` and return the optimal gain."""
    if ol.h_sig == 0 or ol.kappa == 0:
        # Sigma does not depend on g: least intervention.
        off = ol.sigma(0j)
        return GainSolution(float(ol.omega), 0j, off, "eigen", {"flat": True, "sigma_off": off})
    P, Q, s = _forms(ol)
    evals = np.linalg.eigvalsh(P)
    if evals[0] <= _PD_RTOL * max(evals[-1], np.finfo(float).tiny):
        raise NumericConditioningError(
            f"noise form is not positive definite at omega={ol.omega:.6g} "
            f"(eigenvalues {evals[0]:.3e}, {evals[-1]:.3e}); a single noise "
            "direction can be cancelled exactly"
        )
    mu, V = scipy.linalg.eigh(Q, P)
    mu_max = mu[-1]
    if mu_max <= 0:
        raise NumericConditioningError(f"loop has no effect at omega={ol.omega:.6g}")
    v = V[:, -1]
    if abs(v[0]) <= 1e-14 * abs(v[1]):
        gain = complex(np.inf)
    else:
        gain = complex(s * v[1] / v[0])
    sigma = 1.0 / mu_max

    direct = ol.sigma(gain)
    off = ol.sigma(0j)
    diagnostics = {"eigenvalues": mu.tolist(), "sigma_direct": direct, "sigma_off": off}
    if ol.h_m != 0:
        diagnostics["sigma_infinite"] = ol.sigma(complex(np.inf))
    if not np.isclose(direct, sigma, rtol=1e-8, atol=0):
        raise NumericConditioningError(
            f"eigen solution not reproduced at omega={ol.omega:.6g}: {sigma!r} vs {direct!r}"
        )
    bound = min(val for key, val in diagnostics.items() if key in ("sigma_off", "sigma_infinite"))
    if direct > bound * (1 + 1e-9):
        raise NumericConditioningError(f"eigen solution is not a minimum at omega={ol.omega:.6g}")
    return GainSolution(float(ol.omega), gain, float(direct), "eigen", diagnostics)


def optimize_gain(sc: Scenario, omega: float) -> GainSolution:
    """Complex gain minimizing the equivalent input noise at ``omega`` (internal units)."""
    return optimize_open_loop(open_loop(sc, omega))


def auto_region(gain: complex, factor: float = 10.0) -> tuple[float, float, float, float]:
    """Square centred on 0 with half-width ``factor * |gain|``."""
    r = factor * abs(gain)
    if not np.isfinite(r) or r == 0:
        raise ValueError(f"cannot scale a search region around gain {gain!r}")
    return (-r, r, -r, r)


def grid_search_oracle(
    sc_or_ol,
    omega: Optional[float] = None,
    region: tuple[float, float, float, float] = (-1.0, 1.0, -1.0, 1.0),
    n: int = 201,
    *,
    refine: bool = False,
) -> GainSolution:
    """Brute-force minimum of Sigma(g) over an ``n x n`` grid of the rectangle
    ``region = (re_min, re_max, im_min, im_max)``.

    Deterministic.  With ``refine=True`` the best grid point seeds a
    Nelder-Mead polish.  ``diagnostics['on_boundary']`` flags a minimum sitting
    on the region edge, i.e. a region that probably excludes the optimum.
    """
    ol = sc_or_ol if isinstance(sc_or_ol, OpenLoop) else open_loop(sc_or_ol, omega)
    if n < 2:
        raise ValueError("grid search needs n >= 2 per axis")
    re_lo, re_hi, im_lo, im_hi = region
    re = np.linspace(re_lo, re_hi, n)
    im = np.linspace(im_lo, im_hi, n)
    G = re[None, :] + 1j * im[:, None]
    sig = _sigma_many(ol, G.ravel()).reshape(G.shape)

    best = np.nanmin(sig)
    ties = np.flatnonzero(sig.ravel() <= best * (1 + 1e-12))
    pick = ties[np.argmin(np.abs(G.ravel()[ties]))]
    row, col = np.unravel_index(pick, G.shape)
    gain = complex(G[row, col])
    on_boundary = row in (0, n - 1) or col in (0, n - 1)
    diagnostics = {"on_boundary": bool(on_boundary), "region": tuple(region), "n": n}
    if not refine:
        return GainSolution(float(ol.omega), gain, float(sig[row, col]), "grid", diagnostics)

    scale = max(abs(re_hi - re_lo), abs(im_hi - im_lo)) / n
    res = scipy.optimize.minimize(
        lambda x: ol.sigma(complex(x[0] * scale, x[1] * scale)),
        x0=[gain.real / scale, gain.imag / scale],
        method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 0.0, "maxiter": 4000},
    )
    refined = complex(res.x[0] * scale, res.x[1] * scale)
    value = ol.sigma(refined)
    if value > sig[row, col]:
        refined, value = gain, float(sig[row, col])
    return GainSolution(float(ol.omega), refined, float(value), "refine", diagnostics)


def _sigma_many(ol: OpenLoop, gains: np.ndarray) -> np.ndarray:
    k = ol.kappa * gains[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        c = ol.A[None, :] + k * ol.h_sig * ol.S[None, :] / (1.0 - k * ol.h_m)
    return np.sum(np.abs(c) ** 2 * ol.spectra[None, :], axis=1)


def without_sources(ol: OpenLoop, prefixes: tuple[str, ...]) -> OpenLoop:
    """Copy of ``ol`` with the spectra of matching sources set to zero."""
    spectra = np.array(
        [0.0 if sid.startswith(prefixes) else s for sid, s in zip(ol.source_ids, ol.spectra)]
    )
    return dataclasses.replace(ol, spectra=spectra)
