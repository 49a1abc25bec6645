"""Step response kernels and their duality with atomic multiplier laws.

A response kernel h is a nonincreasing right-continuous step function on
(0, inf) together with a flow intensity lambda.  The dual atomic law has
one atom per step: location = step value a, weight = lambda * a * duration.
Conversely an atomic law (a_j, w_j) maps to steps of value a_j and duration
w_j / (lambda * a_j), laid out in descending value order.  Normalization
lambda * int h = 1 is exactly the statement that the dual weights sum to 1.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .distributions import AtomicDistribution

_NORMALIZATION_TOL = 1e-9


class ResponseFunction:
    """Step kernel: value v_k on an interval of length d_k, descending v."""

    __slots__ = ("values", "durations", "lam")

    def __init__(self, values, durations, lam: float = 1.0):
        v = np.atleast_1d(np.asarray(values, dtype=float))
        d = np.atleast_1d(np.asarray(durations, dtype=float))
        if v.shape != d.shape or v.ndim != 1:
            raise ValueError("values and durations must be 1-d of equal length")
        if v.size and not (np.all(np.isfinite(v)) and np.all(np.isfinite(d))):
            raise ValueError("step values and durations must be finite")
        if np.any(v <= 0.0):
            raise ValueError("step values must be strictly positive")
        if np.any(d <= 0.0):
            raise ValueError("step durations must be strictly positive")
        if v.size > 1 and np.any(np.diff(v) >= 0.0):
            raise ValueError("step values must be strictly decreasing")
        if not (np.isfinite(lam) and lam > 0.0):
            raise ValueError("lambda must be a positive real")
        v.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "durations", d)
        object.__setattr__(self, "lam", float(lam))

    def __setattr__(self, name, value):
        raise AttributeError("ResponseFunction is immutable")

    def __repr__(self):
        steps = ", ".join(
            f"({v:.6g}, {d:.6g})" for v, d in zip(self.values, self.durations)
        )
        return f"ResponseFunction([{steps}], lam={self.lam:.6g})"

    @property
    def n_steps(self) -> int:
        return self.values.size

    @property
    def support_end(self) -> float:
        return float(self.durations.sum())

    # ------------------------------------------------------------------
    # integrals

    def integral(self) -> float:
        """lambda * int h du; equals 1 for duals of probability laws."""
        return self.lam * float(np.dot(self.values, self.durations))

    def log_integral(self) -> float:
        """lambda * int h log h du; equals E log A for the dual law."""
        return self.lam * float(
            np.dot(self.values * np.log(self.values), self.durations)
        )

    def power_integral(self, q: float) -> float:
        """lambda * int h^q du; equals E A^(q-1) for the dual law."""
        return self.lam * float(np.dot(self.values ** float(q), self.durations))

    def assert_normalized(self, tol: float = _NORMALIZATION_TOL) -> None:
        total = self.integral()
        if abs(total - 1.0) > tol:
            raise ValueError(
                f"lambda * int h = {total:.12g}; must be within {tol:g} of 1"
            )

    # ------------------------------------------------------------------
    # evaluation

    def eval(self, u) -> np.ndarray:
        """h(u): step value on [t_{k-1}, t_k), zero beyond the support."""
        u = np.asarray(u, dtype=float)
        ends = np.cumsum(self.durations)
        idx = np.searchsorted(ends, u, side="right")
        out = np.zeros(np.shape(u))
        inside = idx < self.values.size
        out[inside] = self.values[idx[inside]]
        out[u < 0.0] = 0.0
        return out

    def generalized_inverse(self, z) -> np.ndarray:
        """h_inv(z) = inf{u : h(u) < z} for 0 < z < h(0+), else 0.

        For steps this is the total duration of steps with value >= z;
        at z >= the top value the convention returns 0.
        """
        z = np.asarray(z, dtype=float)
        if np.any(z <= 0.0):
            raise ValueError("generalized inverse defined for z > 0")
        out = np.zeros(np.shape(z))
        if self.values.size == 0:
            return out
        cum = np.cumsum(self.durations)
        # count of step values >= z (values are descending)
        count = np.searchsorted(-self.values, -z, side="right")
        inside = z < self.values[0]
        cnt = np.maximum(count[inside], 1)
        out[inside] = cum[cnt - 1]
        return out

    def curve_points(self):
        """Plot-ready (u, h) pairs tracing the step boundaries."""
        pts = []
        start = 0.0
        for v, d in zip(self.values, self.durations):
            pts.append((start, float(v)))
            start += float(d)
            pts.append((start, float(v)))
        pts.append((start, 0.0))
        return pts

    # ------------------------------------------------------------------
    # serialization

    def to_csv(self, path) -> None:
        """CSV value,duration plus sidecar JSON {lambda}."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            fh.write("value,duration\n")
            for v, d in zip(self.values, self.durations):
                fh.write(f"{v:.17g},{d:.17g}\n")
        path.with_suffix(".json").write_text(
            json.dumps({"lambda": self.lam}, sort_keys=True, indent=2) + "\n"
        )

    @classmethod
    def from_csv(cls, path) -> "ResponseFunction":
        path = Path(path)
        values, durations = [], []
        with path.open(newline="") as fh:
            header = fh.readline().strip()
            if header != "value,duration":
                raise ValueError(f"{path}: expected header 'value,duration'")
            for lineno, line in enumerate(fh, start=2):
                line = line.strip()
                if not line:
                    continue
                try:
                    v, d = line.split(",")
                    values.append(float(v))
                    durations.append(float(d))
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: bad row {line!r}") from exc
        meta = json.loads(path.with_suffix(".json").read_text())
        return cls(values, durations, lam=meta["lambda"])


def response_from_rho(rho: AtomicDistribution, lam: float = 1.0) -> ResponseFunction:
    """Dual step kernel of an atomic law: value a_j, duration w_j/(lam a_j)."""
    values = rho.locations[::-1]
    durations = (rho.weights / (lam * rho.locations))[::-1]
    return ResponseFunction(values, durations, lam=lam)


def rho_from_response(h: ResponseFunction) -> AtomicDistribution:
    """Dual atomic law of a step kernel: one atom lam*v*d at each value v.

    Rejects kernels whose dual weights do not sum to 1 within 1e-9.
    """
    if h.n_steps == 0:
        raise ValueError("cannot build an atomic law from an empty kernel")
    return AtomicDistribution(h.values, h.lam * h.values * h.durations)


def uniform01_reference_response(u) -> np.ndarray:
    """Exact-family response curve h(u) = e^{-u} for uniform(0, 1]."""
    u = np.asarray(u, dtype=float)
    return np.exp(-u)


def uniform01_reference_inverse(z) -> np.ndarray:
    """Exact-family inverse -log z on (0, 1), zero at z >= 1."""
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0.0):
        raise ValueError("reference inverse defined for z > 0")
    return np.where(z < 1.0, -np.log(np.minimum(z, 1.0)), 0.0)
