"""Closed-form least-squares solve for the scaling vector."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .calibration import SUBSWATHS
from .errors import SingularSystem

log = logging.getLogger(__name__)

SINGULAR_CONDITION = 1e12
FALLBACK_CONDITION = 1e8


@dataclass(frozen=True)
class ScalingEstimate:
    k: np.ndarray
    per_term_residuals: dict
    row_counts: dict
    condition_estimate: float
    method: str = "cholesky"

    def as_dict(self, **extra):
        out = {
            "k": [float(x) for x in self.k],
            "subswaths": list(SUBSWATHS),
            "residuals": self.per_term_residuals,
            "rowCounts": self.row_counts,
            "condition": self.condition_estimate,
            "method": self.method,
        }
        out.update(extra)
        return out

    def write_json(self, path, **extra):
        with open(path, "w") as fh:
            json.dump(self.as_dict(**extra), fh, indent=2)
            fh.write("\n")


def solve(system):
    """Minimise ``|v - C k|^2`` through the 5x5 normal equations.

    The normal matrix is Cholesky-factorised. Above a condition number of
    1e8 the solve falls back to an orthogonal (SVD based) least-squares solve
    of ``C`` itself; above 1e12 the system is rejected.
    """
    C = np.asarray(system.C, dtype=np.float64)
    v = np.asarray(system.v, dtype=np.float64)
    # solve for the offset from k = 1: same minimiser, and exact when the data
    # already agree with k = 1 (e.g. regularizer rows only)
    ones = np.ones(C.shape[1])
    normal = C.T @ C
    rhs = C.T @ (v - C @ ones)
    if not np.all(np.isfinite(normal)):
        raise SingularSystem("normal matrix has non-finite entries")
    cond = float(np.linalg.cond(normal))
    if not np.isfinite(cond) or cond > SINGULAR_CONDITION:
        raise SingularSystem(f"normal matrix is singular (condition {cond:.3g})")
    if cond > FALLBACK_CONDITION:
        log.warning("normal matrix condition %.3g, using orthogonal solve", cond)
        k = ones + la.lstsq(C, v - C @ ones)[0]
        method = "lstsq"
    else:
        k = ones + la.cho_solve(la.cho_factor(normal), rhs)
        method = "cholesky"
    return ScalingEstimate(k, system.term_losses(k), dict(system.counts), cond, method)
