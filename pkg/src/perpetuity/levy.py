"""Levy structure of the solution law and the Steutel convolution check.

The solution is infinitely divisible with zero shift, and x M(dx) is the
probability law of A * eta_sb, so one round of sampling (A from rho,
eta_sb by size-biased resampling of a solution sample) yields the tilted
Levy measure directly.  The convolution identity tested here,

    mu_sb[0, x] = int_0^x mu[0, x - y] * (x M)(dy),

is the distribution-function form of the defining perpetuity identity and
fails loudly for mismatched (mu, M) pairs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .distributions import FAMILY_UNIFORM01, AtomicDistribution, EmpiricalSample
from .montecarlo import derive_seed

_ZERO_CUTOFF = 1e-9


@dataclass(frozen=True)
class LevyEstimate:
    """Empirical sample of the probability law x M(dx), sorted ascending."""

    x: np.ndarray
    total_mass_of_m: float   # K (1 - c) / m; inf marker for uniform01 family
    n: int
    seed: int

    def cdf(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        return np.searchsorted(self.x, q, side="right") / self.x.size

    def to_csv(self, path, max_rows: int = 65536) -> None:
        """CSV x,cdf at evenly spaced ranks (deterministic thinning)."""
        path = Path(path)
        n = self.x.size
        if n <= max_rows:
            idx = np.arange(n)
        else:
            idx = np.unique(np.linspace(0, n - 1, max_rows).astype(np.int64))
        with path.open("w", newline="") as fh:
            fh.write("x,cdf\n")
            for i in idx:
                fh.write(f"{self.x[i]:.17g},{(i + 1) / n:.17g}\n")
        mass = ("infinity" if math.isinf(self.total_mass_of_m)
                else self.total_mass_of_m)
        sidecar = {"total_mass_of_M": mass, "n": int(self.n), "seed": self.seed}
        path.with_suffix(".json").write_text(
            json.dumps(sidecar, sort_keys=True, indent=2) + "\n"
        )


def levy_from_solution(
    rho: AtomicDistribution,
    mu_sample: EmpiricalSample,
    seed: int,
    n_out: int = 1_000_000,
) -> LevyEstimate:
    """Sample x M(dx) as A * eta_sb and record M's total mass.

    Total mass uses the exact atomic K = E[1/A] against the sampled zero
    fraction and mean: K (1 - c_hat) / mean(mu).  Laws tagged with the
    uniform01 family report the family-level value infinity (the exact
    family is not compound Poisson).
    """
    mean = mu_sample.mean()
    if mean <= 0.0:
        raise ValueError("mu sample has nonpositive mean; nothing to size-bias")
    sb = mu_sample.size_bias_resample(n_out, derive_seed(seed, "levy-sb"))
    a = rho.sample(n_out, derive_seed(seed, "levy-a"))
    x = np.sort(a * sb.values)
    if rho.family == FAMILY_UNIFORM01:
        mass = math.inf
    else:
        c_hat = float(np.mean(mu_sample.values < _ZERO_CUTOFF))
        mass = rho.mean_inverse() * (1.0 - c_hat) / mean
    return LevyEstimate(x=x, total_mass_of_m=float(mass), n=int(n_out),
                        seed=int(seed))


@dataclass(frozen=True)
class SteutelReport:
    probes: tuple
    lhs: tuple
    rhs: tuple
    residual: float

    def to_json_obj(self) -> dict:
        return {
            "probes": list(self.probes),
            "lhs": list(self.lhs),
            "rhs": list(self.rhs),
            "residual": self.residual,
        }


def _midpoint_ecdf(sorted_values: np.ndarray, t: np.ndarray) -> np.ndarray:
    """(count(< t) + count(<= t)) / (2 n): halves the bias at ties/atoms."""
    left = np.searchsorted(sorted_values, t, side="left")
    right = np.searchsorted(sorted_values, t, side="right")
    return (left + right) / (2.0 * sorted_values.size)


def steutel_residual(mu, levy: LevyEstimate, x_probes) -> SteutelReport:
    """Evaluate both sides of the convolution identity at the probes.

    ``mu`` is either an EmpiricalSample of the solution law or a callable
    analytic CDF.  The left side is the size-biased CDF (weighted ECDF for
    samples; x F(x) - int_0^x F for a callable, by parts).  The right side
    convolves mu's CDF against the levy sample with the midpoint ECDF.
    """
    probes = np.atleast_1d(np.asarray(x_probes, dtype=float))
    if np.any(probes <= 0.0):
        raise ValueError("probes must be strictly positive")
    top = float(levy.x[-1])
    if np.any(probes > top):
        raise ValueError(
            f"probe beyond levy-sample support (max sampled x = {top:.6g})"
        )

    if isinstance(mu, EmpiricalSample):
        vals = np.sort(mu.values)
        total = float(vals.sum())
        if total <= 0.0:
            raise ValueError("mu sample has zero mass")
        cum = np.cumsum(vals)

        def mu_cdf(t):
            return _midpoint_ecdf(vals, t)

        def mu_sb_cdf(t):
            idx = np.searchsorted(vals, t, side="right")
            return np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0) / total
    elif callable(mu):
        mu_cdf = mu
        # mean and partial integrals by trapezoid on a fine grid
        hi = max(top, float(probes.max())) * 4.0 + 10.0
        grid = np.linspace(0.0, hi, 200_001)
        cdf_vals = np.asarray(mu_cdf(grid), dtype=float)
        tail = 1.0 - cdf_vals
        mean = float(np.sum((tail[1:] + tail[:-1]) * 0.5 * np.diff(grid)))
        if mean <= 0.0:
            raise ValueError("callable CDF has nonpositive mean")
        partial = np.concatenate(
            [[0.0], np.cumsum((cdf_vals[1:] + cdf_vals[:-1]) * 0.5
                              * np.diff(grid))]
        )

        def mu_sb_cdf(t):
            t = np.asarray(t, dtype=float)
            f = np.asarray(mu_cdf(t), dtype=float)
            ipart = np.interp(t, grid, partial)
            return (t * f - ipart) / mean
    else:
        raise TypeError("mu must be an EmpiricalSample or a callable CDF")

    lhs = np.asarray(mu_sb_cdf(probes), dtype=float)
    rhs = np.empty(probes.size)
    for i, xp in enumerate(probes):
        inside = levy.x[levy.x <= xp]
        rhs[i] = (float(np.sum(mu_cdf(xp - inside))) / levy.x.size
                  if inside.size else 0.0)
    residual = float(np.max(np.abs(lhs - rhs)))
    return SteutelReport(
        probes=tuple(float(v) for v in probes),
        lhs=tuple(float(v) for v in lhs),
        rhs=tuple(float(v) for v in rhs),
        residual=residual,
    )
