"""Pairwise exponential-family graphical models and exact small-model oracles.

The joint density over ``p`` variables is

    P(x) = exp( sum_s theta_s B(x_s) + sum_{(s,t)} theta_st B(x_s) B(x_t)
                + sum_s C(x_s) - A(theta) )

with sufficient statistic B(x) = x for Gaussian/Ising/Poisson and
B(x) = -x for the exponential family.  Stored parameters always use the
convention in which the node-conditional canonical parameter is

    eta_s(x) = theta_s + sum_{t in N(s)} theta_st x_t,

so exponential-family edge weights are stored nonnegative and act as
rate increments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp
from scipy.stats import poisson as _poisson_dist

from . import families as fam
from .errors import (
    DomainError,
    NotNormalizableError,
    ParseError,
    SupportError,
    TooLargeError,
)

MAX_ENUM_STATES = 4_300_000  # guard for exact discrete enumeration


def canonical_edges(edges: dict[tuple[int, int], float], p: int) -> dict[tuple[int, int], float]:
    """Normalize edge keys to (min, max); reject self-edges and conflicts."""
    out: dict[tuple[int, int], float] = {}
    for (s, t), w in edges.items():
        if s == t:
            raise ValueError(f"self-edge ({s}, {t}) not allowed")
        if not (0 <= s < p and 0 <= t < p):
            raise ValueError(f"edge ({s}, {t}) out of range for p={p}")
        key = (min(s, t), max(s, t))
        if key in out and out[key] != w:
            raise ValueError(f"conflicting weights for edge {key}")
        out[key] = float(w)
    return out


@dataclass(frozen=True)
class PairwiseModel:
    """Immutable pairwise model; construction enforces the domain constraints."""

    p: int
    family: fam.FamilySpec
    node_params: np.ndarray
    edge_params: dict[tuple[int, int], float]
    constraint: fam.DomainConstraint
    _adjacency: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        node = np.asarray(self.node_params, dtype=float)
        if node.shape != (self.p,):
            raise ValueError(f"node_params must have shape ({self.p},)")
        edges = canonical_edges(self.edge_params, self.p)
        violations = fam.check_domain(self.family, self.constraint, node, edges)
        if violations:
            raise DomainError("invalid model parameters: " + "; ".join(violations))
        object.__setattr__(self, "node_params", node)
        object.__setattr__(self, "edge_params", edges)
        nbrs: list[list[tuple[int, float]]] = [[] for _ in range(self.p)]
        for (s, t), w in sorted(edges.items()):
            nbrs[s].append((t, w))
            nbrs[t].append((s, w))
        object.__setattr__(
            self, "_adjacency", tuple(tuple(sorted(row)) for row in nbrs)
        )

    def neighbors(self, s: int) -> tuple[tuple[int, float], ...]:
        """Sorted (t, theta_st) pairs for node ``s``."""
        return self._adjacency[s]

    def edge(self, s: int, t: int) -> float:
        return self.edge_params.get((min(s, t), max(s, t)), 0.0)

    def edge_set(self) -> set[tuple[int, int]]:
        return set(self.edge_params)

    def dense_edge_matrix(self) -> np.ndarray:
        """Symmetric p x p edge-weight matrix with zero diagonal."""
        theta = np.zeros((self.p, self.p))
        for (s, t), w in self.edge_params.items():
            theta[s, t] = theta[t, s] = w
        return theta

    def node_param_vector(self, s: int) -> np.ndarray:
        """theta(s) = [theta_s, theta_st for t != s ascending] (length p)."""
        out = np.zeros(self.p)
        out[0] = self.node_params[s]
        others = [t for t in range(self.p) if t != s]
        for j, t in enumerate(others):
            out[1 + j] = self.edge(s, t)
        return out


@dataclass(frozen=True)
class SampleMatrix:
    """n x p observations with values validated against the family support."""

    values: np.ndarray
    family: fam.FamilySpec
    seed: int | None = None

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=float))
        if v.ndim != 2:
            raise ValueError("values must be a 2-D array")
        ok = fam.in_support(self.family, v)
        if not np.all(ok):
            i, j = np.argwhere(~ok)[0]
            raise SupportError(
                f"value {v[i, j]!r} at row {i}, column {j} outside "
                f"{self.family.kind} support"
            )
        if self.family.kind == fam.POISSON:
            v = np.round(v)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


def canonical_param(model: PairwiseModel, s: int, x: np.ndarray) -> float:
    """eta = theta_s + sum over stored edges of theta_st * x_t."""
    eta = float(model.node_params[s])
    for t, w in model.neighbors(s):
        eta += w * float(x[t])
    return eta


# ---------------------------------------------------------------------------
# Exact joint quantities for small models (oracle duty only)
# ---------------------------------------------------------------------------


def _log_base_measure(family: fam.FamilySpec, states: np.ndarray) -> np.ndarray:
    """sum_s C(x_s) per state row (theta-independent part of the density)."""
    if family.kind == fam.POISSON:
        return -gammaln(states + 1.0).sum(axis=1)
    if family.kind == fam.GAUSSIAN:
        return -(states**2).sum(axis=1) / (2.0 * family.sigma**2)
    return np.zeros(states.shape[0])


def _signed_interaction(family: fam.FamilySpec) -> float:
    """Sign of x_s x_t and theta_s x_s terms in the joint exponent."""
    return -1.0 if family.kind == fam.EXPONENTIAL else 1.0


def _log_weights(
    family: fam.FamilySpec,
    node_params: np.ndarray,
    edges: dict[tuple[int, int], float],
    states: np.ndarray,
) -> np.ndarray:
    """Unnormalized log density at each state row."""
    sign = _signed_interaction(family)
    logw = sign * states @ np.asarray(node_params, dtype=float)
    for (s, t), w in edges.items():
        logw += sign * w * states[:, s] * states[:, t]
    return logw + _log_base_measure(family, states)


def _check_normalizable(
    family: fam.FamilySpec,
    node_params: np.ndarray,
    edges: dict[tuple[int, int], float],
) -> None:
    if family.kind == fam.POISSON and any(w > 0 for w in edges.values()):
        raise NotNormalizableError("Poisson joint diverges for positive edge weights")
    if family.kind == fam.EXPONENTIAL:
        if any(w < 0 for w in edges.values()) or np.any(np.asarray(node_params) <= 0):
            raise NotNormalizableError(
                "exponential joint needs theta_s > 0 and theta_st >= 0"
            )
    if family.kind == fam.GAUSSIAN:
        theta = np.zeros((len(node_params), len(node_params)))
        for (s, t), w in edges.items():
            theta[s, t] = theta[t, s] = w
        if np.linalg.eigvalsh(np.eye(len(node_params)) - theta).min() <= 0:
            raise NotNormalizableError("Gaussian precision I - Theta is not positive definite")


def _discrete_states(family: fam.FamilySpec, p: int, value_cap: int) -> np.ndarray:
    per_axis = 2 if family.kind == fam.ISING else value_cap + 1
    count = per_axis**p
    if count > MAX_ENUM_STATES:
        raise TooLargeError(
            f"{count} states exceed the exact-enumeration limit {MAX_ENUM_STATES}"
        )
    axes = [np.arange(per_axis)] * p
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=1).astype(float)


def _poisson_tail_bound(
    node_params: np.ndarray, value_cap: int, z_trunc_log: float
) -> float:
    """Relative bound on unnormalized mass outside {0..cap}^p (edges <= 0)."""
    mus = np.exp(np.asarray(node_params, dtype=float))
    log_full = mus  # log sum_k exp(theta k)/k! = e^theta
    tail = 0.0
    for s, mu in enumerate(mus):
        sf = float(_poisson_dist.sf(value_cap, mu))
        if sf <= 0.0:
            continue
        log_tail_s = math.log(sf) + mu + (log_full.sum() - log_full[s])
        tail += math.exp(log_tail_s - z_trunc_log)
    return tail


def _quadrature_axes(
    family: fam.FamilySpec,
    node_params: np.ndarray,
    edges: dict[tuple[int, int], float],
    p: int,
) -> list[np.ndarray]:
    points = 2000 if p <= 2 else 300
    if family.kind == fam.EXPONENTIAL:
        return [np.linspace(0.0, 40.0, points)] * p
    # Gaussian: box from the closed-form mean/marginal sd.
    theta = np.zeros((p, p))
    for (s, t), w in edges.items():
        theta[s, t] = theta[t, s] = w
    prec = (np.eye(p) - theta) / family.sigma**2
    cov = np.linalg.inv(prec)
    mean = cov @ (np.asarray(node_params, dtype=float) / family.sigma**2)
    sd = np.sqrt(np.diag(cov))
    return [np.linspace(m - 10 * s_, m + 10 * s_, points) for m, s_ in zip(mean, sd)]


def _log_partition_raw(
    family: fam.FamilySpec,
    node_params: np.ndarray,
    edges: dict[tuple[int, int], float],
    value_cap: int = 50,
    extra_quad: tuple[int, float] | None = None,
) -> tuple[float, float]:
    """(A(theta), relative tail bound).  ``extra_quad=(s, eta)`` adds an
    eta * x_s^2 term to the exponent (the shifted log-partition used by the
    moment diagnostics)."""
    node_params = np.asarray(node_params, dtype=float)
    p = len(node_params)
    _check_normalizable(family, node_params, edges)

    def add_extra(states: np.ndarray, logw: np.ndarray) -> np.ndarray:
        if extra_quad is not None:
            s, eta = extra_quad
            logw = logw + eta * states[:, s] ** 2
        return logw

    if family.kind in (fam.ISING, fam.POISSON):
        states = _discrete_states(family, p, value_cap)
        logw = add_extra(states, _log_weights(family, node_params, edges, states))
        log_z = float(logsumexp(logw))
        tail = 0.0
        if family.kind == fam.POISSON:
            tail = _poisson_tail_bound(node_params, value_cap, log_z)
        return log_z, tail

    if p > 3:
        raise TooLargeError(f"quadrature log-partition limited to p <= 3, got p={p}")
    axes = _quadrature_axes(family, node_params, edges, p)
    steps = [ax[1] - ax[0] for ax in axes]
    log_dx = float(np.sum(np.log(steps)))
    if p == 1:
        states = axes[0][:, None]
        logw = add_extra(states, _log_weights(family, node_params, edges, states))
        return float(logsumexp(logw) + log_dx), 0.0
    # Chunk over the first axis to keep the state block small.
    chunks = []
    rest = np.meshgrid(*axes[1:], indexing="ij")
    rest_flat = np.stack([g.ravel() for g in rest], axis=1)
    for x0 in axes[0]:
        block = np.column_stack([np.full(rest_flat.shape[0], x0), rest_flat])
        logw = add_extra(block, _log_weights(family, node_params, edges, block))
        chunks.append(logsumexp(logw))
    return float(logsumexp(np.array(chunks)) + log_dx), 0.0


def exact_log_partition(model: PairwiseModel, value_cap: int = 50) -> float:
    """A(theta) by exhaustive enumeration (discrete) or quadrature (continuous).

    Poisson sums are truncated at ``value_cap`` per coordinate; the
    relative truncation error is available via ``exact_log_partition_tail``.
    """
    log_z, _ = _log_partition_raw(
        model.family, model.node_params, model.edge_params, value_cap
    )
    return log_z


def exact_log_partition_tail(model: PairwiseModel, value_cap: int = 50) -> tuple[float, float]:
    """(A(theta), relative truncation-tail bound)."""
    return _log_partition_raw(model.family, model.node_params, model.edge_params, value_cap)


@dataclass(frozen=True)
class JointPmf:
    """Exact (possibly truncated-renormalized) pmf over enumerated states."""

    states: np.ndarray
    probs: np.ndarray
    log_partition: float
    tail_bound: float

    def prob_of(self, state) -> float:
        match = np.all(self.states == np.asarray(state, dtype=float), axis=1)
        idx = np.nonzero(match)[0]
        return float(self.probs[idx[0]]) if idx.size else 0.0

    def marginal(self, s: int) -> dict[float, float]:
        out: dict[float, float] = {}
        for state, pr in zip(self.states[:, s], self.probs):
            out[float(state)] = out.get(float(state), 0.0) + float(pr)
        return out


def exact_joint_pmf(model: PairwiseModel, value_cap: int = 50) -> JointPmf:
    """Exhaustive pmf for discrete families; renormalized after truncation."""
    if model.family.kind not in (fam.ISING, fam.POISSON):
        raise TooLargeError("exact_joint_pmf supports discrete families only")
    _check_normalizable(model.family, model.node_params, model.edge_params)
    states = _discrete_states(model.family, model.p, value_cap)
    logw = _log_weights(model.family, model.node_params, model.edge_params, states)
    log_z = float(logsumexp(logw))
    probs = np.exp(logw - log_z)
    probs /= probs.sum()
    tail = 0.0
    if model.family.kind == fam.POISSON:
        tail = _poisson_tail_bound(model.node_params, value_cap, log_z)
    return JointPmf(states=states, probs=probs, log_partition=log_z, tail_bound=tail)


# ---------------------------------------------------------------------------
# Node-conditional negative log-likelihood
# ---------------------------------------------------------------------------


def node_design(X: SampleMatrix, s: int) -> tuple[np.ndarray, np.ndarray]:
    """Design Z = [1 | X_{without s}] (columns t ascending) and response y."""
    v = X.values
    Z = np.empty((v.shape[0], v.shape[1]))
    Z[:, 0] = 1.0
    Z[:, 1:] = np.delete(v, s, axis=1)
    return Z, v[:, s].copy()


def _resolve_params(theta, X: SampleMatrix, s: int, family):
    if isinstance(theta, PairwiseModel):
        family = theta.family if family is None else family
        theta = theta.node_param_vector(s)
    theta = np.asarray(theta, dtype=float)
    family = X.family if family is None else family
    if theta.shape != (X.p,):
        raise ValueError(f"theta(s) must have length p={X.p}")
    return theta, family


def node_nll(theta, X: SampleMatrix, s: int, family: fam.FamilySpec | None = None) -> float:
    """Average node-conditional negative log-likelihood (base measure dropped)."""
    theta, family = _resolve_params(theta, X, s, family)
    Z, y = node_design(X, s)
    eta = Z @ theta
    b = fam.sufficient_stat(family, y)
    return float(np.mean(-b * eta + fam.log_partition(family, eta)))


def node_nll_grad(theta, X: SampleMatrix, s: int, family: fam.FamilySpec | None = None) -> np.ndarray:
    """Gradient (1/n) sum_i (D'(eta_i) - b(y_i)) [1, x_i]."""
    theta, family = _resolve_params(theta, X, s, family)
    Z, y = node_design(X, s)
    eta = Z @ theta
    resid = fam.d1(family, eta) - fam.sufficient_stat(family, y)
    return Z.T @ resid / X.n


def node_nll_hess(theta, X: SampleMatrix, s: int, family: fam.FamilySpec | None = None) -> np.ndarray:
    """Hessian (1/n) sum_i D''(eta_i) [1, x_i][1, x_i]^T (PSD)."""
    theta, family = _resolve_params(theta, X, s, family)
    Z, y = node_design(X, s)
    eta = Z @ theta
    w = fam.d2(family, eta)
    return (Z * w[:, None]).T @ Z / X.n


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def model_to_text(model: PairwiseModel) -> str:
    """Plain-text model format: header, node lines, edge triples."""
    lines = [f"family {model.family.kind}"]
    if model.family.kind == fam.GAUSSIAN:
        lines.append(f"sigma {_fmt(model.family.sigma)}")
    lines.append(f"p {model.p}")
    lines.append(f"a0 {_fmt(model.constraint.a0)}")
    for s in range(model.p):
        lines.append(f"node {s} {_fmt(model.node_params[s])}")
    for (s, t), w in sorted(model.edge_params.items()):
        lines.append(f"edge {s} {t} {_fmt(w)}")
    return "\n".join(lines) + "\n"


def model_from_text(text: str) -> PairwiseModel:
    kind = None
    sigma = 1.0
    p = None
    a0: float | None = None
    nodes: dict[int, float] = {}
    edges: dict[tuple[int, int], float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "family":
                kind = parts[1]
            elif parts[0] == "sigma":
                sigma = float(parts[1])
            elif parts[0] == "p":
                p = int(parts[1])
            elif parts[0] == "a0":
                a0 = float(parts[1])
            elif parts[0] == "node":
                nodes[int(parts[1])] = float(parts[2])
            elif parts[0] == "edge":
                edges[(int(parts[1]), int(parts[2]))] = float(parts[3])
            else:
                raise ParseError(f"line {lineno}: unknown record {parts[0]!r}")
        except (IndexError, ValueError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"line {lineno}: cannot parse {raw!r}") from exc
    if kind is None or p is None:
        raise ParseError("model file missing family/p header")
    family = fam.FamilySpec(kind=kind, sigma=sigma)
    if family.kind in (fam.POISSON, fam.EXPONENTIAL):
        constraint = fam.DomainConstraint.for_family(family, a0=a0)
    else:
        constraint = fam.DomainConstraint.for_family(family)
    node_params = np.zeros(p)
    for s, v in nodes.items():
        if not 0 <= s < p:
            raise ParseError(f"node index {s} out of range for p={p}")
        node_params[s] = v
    return PairwiseModel(
        p=p, family=family, node_params=node_params, edge_params=edges, constraint=constraint
    )


def save_model(model: PairwiseModel, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(model_to_text(model))


def load_model(path) -> PairwiseModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_text(fh.read())


def samples_to_tsv(X: SampleMatrix) -> str:
    """Headered TSV: ``#family p n seed`` then one row per sample."""
    tag = X.family.kind
    if X.family.kind == fam.GAUSSIAN and X.family.sigma != 1.0:
        tag = f"{X.family.kind}:{_fmt(X.family.sigma)}"
    seed = "none" if X.seed is None else str(X.seed)
    lines = [f"#{tag} {X.p} {X.n} {seed}"]
    for row in X.values:
        lines.append("\t".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def samples_from_tsv(text: str) -> SampleMatrix:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ParseError("sample TSV must start with a '#family p n seed' header")
    head = lines[0][1:].split()
    if len(head) != 4:
        raise ParseError(f"bad sample header: {lines[0]!r}")
    tag, p_str, n_str, seed_str = head
    sigma = 1.0
    if ":" in tag:
        tag, sigma_str = tag.split(":", 1)
        sigma = float(sigma_str)
    family = fam.FamilySpec(kind=tag, sigma=sigma)
    p, n = int(p_str), int(n_str)
    seed = None if seed_str == "none" else int(seed_str)
    rows = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        vals = raw.split("\t")
        if len(vals) != p:
            raise ParseError(f"line {lineno}: expected {p} columns, got {len(vals)}")
        try:
            rows.append([float(v) for v in vals])
        except ValueError as exc:
            raise ParseError(f"line {lineno}: non-numeric value in {raw!r}") from exc
    if len(rows) != n:
        raise ParseError(f"header says n={n} but file has {len(rows)} rows")
    return SampleMatrix(values=np.array(rows), family=family, seed=seed)


def save_samples(X: SampleMatrix, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(samples_to_tsv(X))


def load_samples(path) -> SampleMatrix:
    with open(path, "r", encoding="utf-8") as fh:
        return samples_from_tsv(fh.read())
