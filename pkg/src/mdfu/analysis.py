"""Spectral, conductance and bound calculations for the MDFU chain."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .topology import Graph

MAX_EXACT_CONDUCTANCE_N = 22
POWER_TOL = 1e-12
POWER_MAX_ITER = 100_000
DEFAULT_PARTICLES = 1_000_000


class AnalysisError(ValueError):
    pass


class TooLarge(AnalysisError):
    pass


class OutOfRegime(AnalysisError):
    pass


class NonConvergence(AnalysisError, RuntimeError):
    pass


def build_transition_matrix(g: Graph) -> np.ndarray:
    """Dense one-round matrix: ``1/(2 D_ij)`` on edges, remainder on the diagonal."""
    n = g.n
    P = np.zeros((n, n))
    deg = g.degrees
    for i, j in g.edges:
        P[i, j] = P[j, i] = 1.0 / (2.0 * max(deg[i], deg[j]))
    for i in range(n):
        diag = 1.0
        for j in g.neighbors(i):
            diag -= P[i, j]
        P[i, i] = diag
    return P


def check_transition_matrix(P: np.ndarray, tol: float = 1e-12) -> None:
    if not np.allclose(P, P.T, rtol=0.0, atol=tol):
        raise AnalysisError("transition matrix is not symmetric")
    if np.max(np.abs(P.sum(axis=1) - 1.0)) > tol or np.max(np.abs(P.sum(axis=0) - 1.0)) > tol:
        raise AnalysisError("transition matrix is not doubly stochastic")
    if np.any(np.diag(P) < 0.5 - tol):
        raise AnalysisError("diagonal entry below 1/2")


def second_eigenvalue(P: np.ndarray, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER,
                      seed: int = 0) -> float:
    """Largest eigenvalue of ``P`` orthogonal to the all-ones vector.

    Power iteration with the uniform component projected out every step.
    Valid for symmetric doubly stochastic ``P`` with ``p_ii >= 1/2``, whose
    spectrum is real and non-negative.
    """
    n = P.shape[0]
    if n < 2:
        return 0.0
    rng = np.random.Generator(np.random.PCG64(seed))
    x = rng.standard_normal(n)
    x -= x.mean()
    x /= np.linalg.norm(x)
    prev = None
    for _ in range(max_iter):
        y = P @ x
        y -= y.mean()
        rho = float(x @ y)
        norm = np.linalg.norm(y)
        if norm < 1e-14:
            # Everything orthogonal to the uniform vector is annihilated.
            return max(rho, 0.0)
        if prev is not None and abs(rho - prev) < tol:
            return max(rho, 0.0)
        prev = rho
        x = y / norm
    raise NonConvergence(f"power iteration did not converge in {max_iter} iterations")


def _subset_indicator(k: int) -> np.ndarray:
    masks = np.arange(1 << k, dtype=np.int64)
    return ((masks[:, None] >> np.arange(k)) & 1).astype(np.float64)


def conductance_exact(g: Graph, P: np.ndarray | None = None) -> float:
    """Minimum of ``cut(S) / |S|`` over non-empty ``S`` with ``|S| <= n/2``.

    ``cut(S)`` is the total transition probability from ``S`` to its
    complement; with the uniform stationary distribution this equals the
    stationary-weighted boundary flow divided by ``pi(S)``. All ``2^n``
    subsets are enumerated as a grid over the two halves of the node set.
    """
    n = g.n
    if n > MAX_EXACT_CONDUCTANCE_N:
        raise TooLarge(f"exact conductance is limited to n <= {MAX_EXACT_CONDUCTANCE_N}, got {n}")
    if n < 2:
        raise AnalysisError("conductance needs at least two nodes")
    if P is None:
        P = build_transition_matrix(g)
    off = P - np.diag(np.diag(P))
    h = n // 2
    XA, XB = _subset_indicator(h), _subset_indicator(n - h)
    d = off.sum(axis=1)
    # cut(A u B) = d(A) + d(B) - 2 [I(A) + I(B) + C(A, B)]
    PA, PB, PAB = off[:h, :h], off[h:, h:], off[:h, h:]
    intA = 0.5 * np.einsum("si,ij,sj->s", XA, PA, XA)
    intB = 0.5 * np.einsum("si,ij,sj->s", XB, PB, XB)
    partA = XA @ d[:h] - 2.0 * intA
    partB = XB @ d[h:] - 2.0 * intB
    cut = partA[:, None] + partB[None, :] - 2.0 * (XA @ PAB @ XB.T)
    size = XA.sum(axis=1)[:, None] + XB.sum(axis=1)[None, :]
    ok = (size >= 1) & (2 * size <= n)
    ratio = np.where(ok, cut / np.maximum(size, 1.0), np.inf)
    return float(ratio.min())


def spectral_conductance_proxy(lambda1: float) -> float:
    """``sqrt(2 (1 - lambda1))``: the largest conductance consistent with the Cheeger-type bound."""
    return math.sqrt(2.0 * (1.0 - lambda1))


def convergence_bound(n: int, xi: float, phi: float) -> float:
    if n < 1:
        raise AnalysisError("n must be >= 1")
    if not (0.0 < xi <= 1.0):
        raise AnalysisError(f"xi must lie in (0, 1), got {xi}")
    if not (0.0 < phi <= 1.0):
        raise AnalysisError(f"conductance must lie in (0, 1], got {phi}")
    return 2.0 * math.log(n / xi) / phi**2


def _log_term(max_degree: int) -> float:
    # ln((2 Delta e)^3), not (ln 2 Delta e)^3: the reading under which q is the tight Chernoff root.
    return 3.0 * math.log(2.0 * max_degree * math.e)


def small_loss_threshold(max_degree: int) -> float:
    return 1.0 / (math.e * (2.0 * max_degree * math.e) ** math.e)


def loss_regime_cap(max_degree: int) -> float:
    return 1.0 / _log_term(max_degree)


def loss_overhead_q(f: float, max_degree: int) -> float:
    """Fraction of rounds a particle may spend delayed; ``1/e`` for tiny ``f``."""
    if max_degree < 1:
        raise AnalysisError("max degree must be >= 1")
    if f <= 0.0:
        raise OutOfRegime(f"loss overhead needs f > 0, got {f}")
    cap = loss_regime_cap(max_degree)
    if f > cap:
        raise OutOfRegime(f"f={f} exceeds the regime cap {cap:.6g} for max degree {max_degree}")
    if f <= small_loss_threshold(max_degree):
        return 1.0 / math.e
    L = _log_term(max_degree)
    return f * (math.sqrt(4.0 * L / f - 3.0) - 1.0) / 2.0


def bias_band(vbar: float, xi: float, f: float) -> tuple[float, float]:
    if not (0.0 < xi < 1.0):
        raise AnalysisError(f"xi must lie in (0, 1), got {xi}")
    if not (0.0 <= f < 1.0):
        raise AnalysisError(f"f must lie in [0, 1), got {f}")
    return (1.0 - xi) * (1.0 - f) * vbar, (1.0 + xi) * vbar


def matrix_power_reference(P: np.ndarray, e0, r: int) -> np.ndarray:
    e = np.asarray(e0, dtype=np.float64).copy()
    if e.shape != (P.shape[0],):
        raise AnalysisError("vector and matrix dimensions disagree")
    for _ in range(r):
        e = e @ P
    return e


def matrix_power_trajectory(P: np.ndarray, e0, r: int) -> np.ndarray:
    """Rows ``e0 P^k`` for ``k = 0..r``."""
    out = np.empty((r + 1, P.shape[0]))
    out[0] = e0
    for k in range(r):
        out[k + 1] = out[k] @ P
    return out


@dataclass(frozen=True)
class BoundReport:
    n: int
    max_degree: int
    xi: float
    f: float
    vbar: float
    phi: float
    phi_exact: bool
    lambda1: float
    r_c: float
    q: float | None
    q_status: str
    r_loss: float | None
    bias_lo: float
    bias_hi: float

    def rows(self) -> list[tuple[str, str]]:
        def fmt(x):
            return "%.12g" % x if isinstance(x, float) else str(x)

        return [
            ("n", str(self.n)),
            ("max_degree", str(self.max_degree)),
            ("xi", fmt(self.xi)),
            ("f", fmt(self.f)),
            ("true_mean", fmt(self.vbar)),
            ("phi", fmt(self.phi)),
            ("phi_method", "exact" if self.phi_exact else "spectral-proxy-upper-estimate"),
            ("lambda1", fmt(self.lambda1)),
            ("cheeger_bound", fmt(1.0 - self.phi**2 / 2.0)),
            ("r_c", fmt(self.r_c)),
            ("q", self.q_status if self.q is None else fmt(self.q)),
            ("r_loss", self.q_status if self.r_loss is None else fmt(self.r_loss)),
            ("bias_lo", fmt(self.bias_lo)),
            ("bias_hi", fmt(self.bias_hi)),
        ]


def bound_report(g: Graph, xi: float, f: float = 0.0, vbar: float = 1.0) -> BoundReport:
    P = build_transition_matrix(g)
    lam = second_eigenvalue(P)
    exact = g.n <= MAX_EXACT_CONDUCTANCE_N
    phi = conductance_exact(g, P) if exact else min(1.0, spectral_conductance_proxy(lam))
    r_c = convergence_bound(g.n, xi, phi)
    if f == 0.0:
        q, status, r_loss = None, "not applicable (f=0)", r_c
    else:
        try:
            q = loss_overhead_q(f, g.max_degree)
            status, r_loss = "ok", r_c / (1.0 - q)
        except OutOfRegime:
            q, status, r_loss = None, "out of regime", None
    lo, hi = bias_band(vbar, xi, f)
    return BoundReport(g.n, g.max_degree, xi, f, vbar, phi, exact, lam, r_c, q, status,
                       r_loss, lo, hi)


@dataclass(frozen=True)
class ParticleWalkConfig:
    inputs: np.ndarray
    particles: int = DEFAULT_PARTICLES
    f: float = 0.0
    rounds: int = 100
    seed: int = 0

    @property
    def particle_value(self) -> float:
        return float(np.sum(self.inputs)) / self.particles


@dataclass
class ParticleWalkResult:
    node_particles: np.ndarray
    edge_particles: np.ndarray
    occupancy: np.ndarray
    total: int
    particle_value: float

    @property
    def node_fraction(self) -> np.ndarray:
        return self.node_particles / self.total


def place_particles(inputs, total: int) -> np.ndarray:
    """Split ``total`` particles proportionally to ``inputs`` by largest remainder."""
    v = np.asarray(inputs, dtype=np.float64)
    if np.any(v < 0):
        raise AnalysisError("particle placement needs non-negative inputs")
    s = v.sum()
    if s <= 0:
        raise AnalysisError("inputs sum to zero")
    exact = v * (total / s)
    base = np.floor(exact).astype(np.int64)
    short = total - int(base.sum())
    if short > 0:
        order = np.argsort(-(exact - base), kind="stable")
        base[order[:short]] += 1
    return base


def particle_walk(g: Graph, config: ParticleWalkConfig) -> ParticleWalkResult:
    """Monte Carlo of the particle picture behind the loss analysis.

    Each round every particle at node ``i`` moves to ``j`` with probability
    ``p_ij``; a moving particle lands in the buffer of edge ``(i, j)`` with
    probability ``f``. Buffered particles cross with probability ``1 - f``
    per round. Particles are exchangeable, so counts are propagated with
    multinomial and binomial draws.
    """
    if not (0.0 <= config.f < 1.0):
        raise AnalysisError(f"f must lie in [0, 1), got {config.f}")
    P = build_transition_matrix(g)
    rng = np.random.Generator(np.random.PCG64(config.seed))
    src, dst = g.directed_edges()
    counts = place_particles(config.inputs, config.particles)
    buf = np.zeros(len(src), dtype=np.int64)
    n = g.n
    node_hist = [int(counts.sum())]
    edge_hist = [0]
    occ = [counts.copy()]
    for _ in range(config.rounds):
        crossed = rng.binomial(buf, 1.0 - config.f) if config.f > 0 else buf
        moves = rng.multinomial(counts, P)
        stay = np.diag(moves).copy()
        go = moves[src, dst]
        delayed = rng.binomial(go, config.f) if config.f > 0 else np.zeros_like(go)
        arrive = go - delayed + crossed
        buf = buf - crossed + delayed
        counts = stay + np.bincount(dst, weights=arrive, minlength=n).astype(np.int64)
        node_hist.append(int(counts.sum()))
        edge_hist.append(int(buf.sum()))
        occ.append(counts.copy())
    return ParticleWalkResult(np.array(node_hist), np.array(edge_hist), np.array(occ),
                              config.particles, config.particle_value)
