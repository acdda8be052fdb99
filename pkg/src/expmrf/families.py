"""Univariate exponential families underlying the node conditionals.

Each family is described by its node-conditional log-partition function
``D`` and the first three derivatives, its support, and the joint-model
parameter constraints that keep the pairwise density normalizable:

* Gaussian (known variance ``sigma**2``): D(eta) = eta^2 / (2 sigma^2),
  support all reals, no parameter constraints.
* Ising (Bernoulli on {0,1}): D(eta) = log(1 + exp(eta)), no constraints.
* Poisson: D(eta) = exp(eta), edge weights must be nonpositive and node
  weights capped at ``a0`` for the theory's derivative bounds.
* Exponential: D(eta) = -log(eta) with eta > 0.  The sufficient
  statistic is -x, so stored nonnegative edge weights map to the
  conditional *rate* eta = theta_s + sum_t theta_st x_t and the density
  eta * exp(-eta x); node weights must stay >= a0 > 0.

``sufficient_stat`` returns the per-sample response coefficient b(x)
such that the node negative log-likelihood is mean(-b(x) eta + D(eta)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DomainError, OverflowLimitError

GAUSSIAN = "gaussian"
ISING = "ising"
POISSON = "poisson"
EXPONENTIAL = "exponential"

KINDS = (GAUSSIAN, ISING, POISSON, EXPONENTIAL)

# Supports, matching the family order above.
SUPPORT_REALS = "reals"
SUPPORT_BINARY01 = "binary01"
SUPPORT_NONNEG_INT = "nonneg_int"
SUPPORT_NONNEG_REAL = "nonneg_real"

EDGE_FREE = "free"
EDGE_NONPOSITIVE = "nonpositive"
EDGE_NONNEGATIVE = "nonnegative"

# Defaults for the strict-positivity margin (exponential) and the node
# cap (Poisson); the Poisson cap covers the lattice experiments' theta_s = 2.
DEFAULT_A0_EXPONENTIAL = 0.25
DEFAULT_A0_POISSON = 2.5


@dataclass(frozen=True)
class FamilySpec:
    """A univariate exponential family tag plus its fixed parameters.

    ``sigma`` only matters for the Gaussian family.  ``eta_max`` is the
    overflow guard for Poisson: log_partition raises rather than
    silently returning inf above it.
    """

    kind: str
    sigma: float = 1.0
    eta_max: float = 700.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown family kind: {self.kind!r}")
        if self.kind == GAUSSIAN and not self.sigma > 0:
            raise ValueError(f"Gaussian sigma must be positive, got {self.sigma}")

    @property
    def support(self) -> str:
        return {
            GAUSSIAN: SUPPORT_REALS,
            ISING: SUPPORT_BINARY01,
            POISSON: SUPPORT_NONNEG_INT,
            EXPONENTIAL: SUPPORT_NONNEG_REAL,
        }[self.kind]

    @property
    def eta_domain(self) -> tuple[float, float]:
        """Open/closed bounds of valid canonical parameters (lo, hi)."""
        if self.kind == EXPONENTIAL:
            return (0.0, math.inf)  # eta strictly > 0
        return (-math.inf, math.inf)

    def describe(self) -> str:
        if self.kind == GAUSSIAN and self.sigma != 1.0:
            return f"{self.kind}(sigma={self.sigma})"
        return self.kind


@dataclass(frozen=True)
class DomainConstraint:
    """Joint-model parameter domain for one family.

    ``node_bounds`` constrains every theta_s; ``edge_sign`` constrains
    every theta_st.  ``a0`` is the exponential strict-positivity margin
    (theta_s >= a0 > 0) or the Poisson node cap (theta_s <= a0).
    """

    edge_sign: str = EDGE_FREE
    node_bounds: tuple[float, float] = (-math.inf, math.inf)
    a0: float = 0.0

    def __post_init__(self):
        if self.edge_sign not in (EDGE_FREE, EDGE_NONPOSITIVE, EDGE_NONNEGATIVE):
            raise ValueError(f"bad edge_sign: {self.edge_sign!r}")

    @staticmethod
    def for_family(family: FamilySpec, a0: float | None = None) -> "DomainConstraint":
        """The paper's normalizability constraints for ``family``."""
        if family.kind == POISSON:
            cap = DEFAULT_A0_POISSON if a0 is None else a0
            return DomainConstraint(
                edge_sign=EDGE_NONPOSITIVE, node_bounds=(-math.inf, cap), a0=cap
            )
        if family.kind == EXPONENTIAL:
            margin = DEFAULT_A0_EXPONENTIAL if a0 is None else a0
            if not margin > 0:
                raise ValueError("exponential a0 margin must be > 0")
            return DomainConstraint(
                edge_sign=EDGE_NONNEGATIVE, node_bounds=(margin, math.inf), a0=margin
            )
        return DomainConstraint()


def _check_eta(family: FamilySpec, eta: np.ndarray) -> None:
    if family.kind == EXPONENTIAL and np.any(eta <= 0):
        bad = float(np.min(eta))
        raise DomainError(f"exponential family needs eta > 0, got {bad}")
    if family.kind == POISSON and np.any(eta > family.eta_max):
        bad = float(np.max(eta))
        raise OverflowLimitError(
            f"Poisson exp(eta) overflow guard: eta={bad} > eta_max={family.eta_max}"
        )


def log_partition(family: FamilySpec, eta):
    """Node-conditional log-partition D(eta); scalar in, scalar out."""
    eta_arr = np.asarray(eta, dtype=float)
    _check_eta(family, eta_arr)
    if family.kind == GAUSSIAN:
        out = eta_arr**2 / (2.0 * family.sigma**2)
    elif family.kind == ISING:
        out = np.logaddexp(0.0, eta_arr)
    elif family.kind == POISSON:
        out = np.exp(eta_arr)
    else:
        out = -np.log(eta_arr)
    return out if isinstance(eta, np.ndarray) else float(out)


def d1(family: FamilySpec, eta):
    """First derivative D'(eta), the conditional mean of the statistic."""
    eta_arr = np.asarray(eta, dtype=float)
    _check_eta(family, eta_arr)
    if family.kind == GAUSSIAN:
        out = eta_arr / family.sigma**2
    elif family.kind == ISING:
        out = expit(eta_arr)
    elif family.kind == POISSON:
        out = np.exp(eta_arr)
    else:
        out = -1.0 / eta_arr
    return out if isinstance(eta, np.ndarray) else float(out)


def d2(family: FamilySpec, eta):
    """Second derivative D''(eta) >= 0 (conditional variance weight)."""
    eta_arr = np.asarray(eta, dtype=float)
    _check_eta(family, eta_arr)
    if family.kind == GAUSSIAN:
        out = np.full_like(eta_arr, 1.0 / family.sigma**2)
    elif family.kind == ISING:
        out = expit(eta_arr) * expit(-eta_arr)
    elif family.kind == POISSON:
        out = np.exp(eta_arr)
    else:
        out = 1.0 / eta_arr**2
    return out if isinstance(eta, np.ndarray) else float(out)


def d3(family: FamilySpec, eta):
    """Third derivative D'''(eta)."""
    eta_arr = np.asarray(eta, dtype=float)
    _check_eta(family, eta_arr)
    if family.kind == GAUSSIAN:
        out = np.zeros_like(eta_arr)
    elif family.kind == ISING:
        sig = expit(eta_arr)
        out = sig * expit(-eta_arr) * (1.0 - 2.0 * sig)
    elif family.kind == POISSON:
        out = np.exp(eta_arr)
    else:
        out = -2.0 / eta_arr**3
    return out if isinstance(eta, np.ndarray) else float(out)


def conditional_mean(family: FamilySpec, eta):
    """E[X | eta] of the node conditional (not of the statistic b(X))."""
    if family.kind == EXPONENTIAL:
        eta_arr = np.asarray(eta, dtype=float)
        _check_eta(family, eta_arr)
        out = 1.0 / eta_arr
        return out if isinstance(eta, np.ndarray) else float(out)
    return d1(family, eta)


def sufficient_stat(family: FamilySpec, x):
    """Response coefficient b(x) of eta in the node negative log-likelihood.

    b(x) = x for Ising/Poisson, x / sigma^2 for Gaussian, and -x for the
    exponential family (negative sufficient statistic convention).
    """
    x_arr = np.asarray(x, dtype=float)
    if family.kind == GAUSSIAN:
        out = x_arr / family.sigma**2
    elif family.kind == EXPONENTIAL:
        out = -x_arr
    else:
        out = x_arr
    return out if isinstance(x, np.ndarray) else float(out)


def kappa_bounds(family: FamilySpec, constraint: DomainConstraint) -> tuple[float, float]:
    """Derivative bounds (kappa1, kappa3) on |D''| and |D'''|.

    Over the eta region reachable under ``constraint``: Gaussian
    (1/sigma^2, 0); Ising (1/4, 1/4); exponential (1/a0^2, 2/a0^3) for
    eta >= a0; Poisson (exp(a0+1), exp(a0+1)) for theta_s <= a0.
    """
    if family.kind == GAUSSIAN:
        return (1.0 / family.sigma**2, 0.0)
    if family.kind == ISING:
        return (0.25, 0.25)
    if family.kind == EXPONENTIAL:
        a0 = constraint.a0
        if not a0 > 0:
            raise ValueError("exponential kappa bounds need a0 > 0")
        return (1.0 / a0**2, 2.0 / a0**3)
    return (math.exp(constraint.a0 + 1.0), math.exp(constraint.a0 + 1.0))


def in_support(family: FamilySpec, values: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Boolean mask of entries inside the family support."""
    v = np.asarray(values, dtype=float)
    if family.kind == GAUSSIAN:
        return np.isfinite(v)
    if family.kind == ISING:
        return (v == 0.0) | (v == 1.0)
    if family.kind == POISSON:
        return (v >= 0.0) & (np.abs(v - np.round(v)) <= tol)
    return v >= 0.0


def check_domain(
    family: FamilySpec,
    constraint: DomainConstraint,
    node_params: np.ndarray,
    edge_params: dict[tuple[int, int], float],
) -> list[str]:
    """Return one violation string per parameter outside the domain."""
    violations: list[str] = []
    lo, hi = constraint.node_bounds
    for s, theta in enumerate(np.asarray(node_params, dtype=float)):
        if theta < lo:
            violations.append(f"node {s}: theta={theta!r} violates theta >= {lo!r}")
        if theta > hi:
            violations.append(f"node {s}: theta={theta!r} violates theta <= {hi!r}")
    for (s, t), w in sorted(edge_params.items()):
        if constraint.edge_sign == EDGE_NONPOSITIVE and w > 0:
            violations.append(
                f"edge ({s}, {t}): weight={w!r} violates nonpositive sign constraint"
            )
        elif constraint.edge_sign == EDGE_NONNEGATIVE and w < 0:
            violations.append(
                f"edge ({s}, {t}): weight={w!r} violates nonnegative sign constraint"
            )
    return violations
