"""Axially symmetric self-consistency solver: states u(theta) =
sum_n u_n P_{2n}(D, cos theta), the mean-field operator, its Jacobian,
Picard/Newton iteration, density recovery and free energy."""

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .errors import SingularLinearizationError
from .kernel import KernelSpec
from .polybasis import harmonic_count, legendre_table, surface_area, zonal_rule

__all__ = [
    "AxisymState",
    "SolutionReport",
    "DensityProfile",
    "DEFAULT_ORDER",
    "state_norm",
    "state_sup_norm",
    "gtilde",
    "zonal_moments",
    "apply_G",
    "residual",
    "jacobian",
    "solve",
    "multistart",
    "recover_density",
    "free_energy",
]

DEFAULT_ORDER = 128


@dataclass(frozen=True)
class AxisymState:
    """Even zonal expansion u(theta) = sum_{n=1}^N u_n P_{2n}(D, cos theta).

    Only even modes without a constant term are representable, so membership
    in the admissible class is structural.
    """

    D: int
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs",
                           np.array(self.coeffs, dtype=float, copy=True))
        if self.D < 3:
            raise ValueError(f"dimension must be >= 3, got {self.D}")
        if self.coeffs.ndim != 1 or self.coeffs.size < 1:
            raise ValueError("coeffs must be a nonempty vector")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("coeffs must be finite")
        self.coeffs.setflags(write=False)

    @property
    def N(self) -> int:
        return self.coeffs.size

    def eval(self, t):
        """u as a function of t = cos theta."""
        table = legendre_table(self.D, 2 * self.N, np.atleast_1d(
            np.asarray(t, dtype=float)))
        out = self.coeffs @ table[2::2]
        return float(out[0]) if np.ndim(t) == 0 else out

    def padded(self, N: int) -> "AxisymState":
        """Same state at a larger truncation (zero-padded)."""
        if N < self.N:
            raise ValueError("cannot pad to a smaller truncation")
        coeffs = np.zeros(N)
        coeffs[:self.N] = self.coeffs
        return AxisymState(self.D, coeffs)


@dataclass(frozen=True)
class SolutionReport:
    state: AxisymState
    lam: float
    residual_norm: float
    iterations: int
    method: str
    converged: bool
    sup_norm_u: float
    index: int | None = None

    def to_json_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "dim": self.state.D,
            "modes": [float(c) for c in self.state.coeffs],
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
            "method": self.method,
            "converged": self.converged,
            "index": self.index,
            "sup_norm_u": self.sup_norm_u,
        }


@dataclass(frozen=True)
class DensityProfile:
    """Orientation density at the zonal quadrature nodes."""

    D: int
    values: np.ndarray
    beta: float
    order: int = DEFAULT_ORDER

    def __post_init__(self):
        object.__setattr__(self, "values",
                           np.array(self.values, dtype=float, copy=True))
        self.values.setflags(write=False)


@lru_cache(maxsize=64)
def _mode_tables(D: int, N: int, order: int):
    """Quadrature nodes, zonal weights and P_{2n} values for n = 1..N."""
    nodes, weights = zonal_rule(D, order)
    table = legendre_table(D, 2 * N, nodes)[2::2]
    counts = np.array([harmonic_count(D, 2 * n) for n in range(1, N + 1)],
                      dtype=float)
    base_moments = table @ (weights / weights.sum())
    return nodes, weights, table, counts, base_moments


def _l2_weights(D: int, N: int) -> np.ndarray:
    """Squared sphere-L2 norms of the basis functions P_{2n}."""
    _, _, _, counts, _ = _mode_tables(D, N, 2)
    return surface_area(D) / counts


def state_norm(D: int, coeffs: np.ndarray) -> float:
    """Sphere L2 norm of a coefficient vector."""
    coeffs = np.asarray(coeffs, dtype=float)
    return math.sqrt(float(np.dot(_l2_weights(D, coeffs.size), coeffs ** 2)))


def state_sup_norm(state: AxisymState, samples: int = 2048) -> float:
    """Sup of |u(theta)| by dense sampling in t = cos theta (endpoints
    included; u(+-1) = sum u_n exactly)."""
    t = np.cos(np.linspace(0.0, math.pi, samples))
    return float(np.max(np.abs(state.eval(t))))


def _density_weights(state: AxisymState, order: int):
    """Normalized zonal weights of the orientation density: the discrete
    measure W_i e^(-u_i) / Z, computed with a max shift so any finite state
    is safe."""
    nodes, weights, table, _, base = _mode_tables(state.D, state.N, order)
    u = state.coeffs @ table
    e = np.exp(-(u - u.min()))
    wz = weights * e
    return nodes, wz / wz.sum(), table, base


def gtilde(state: AxisymState, theta, order: int = DEFAULT_ORDER):
    """Orientation density in theta:
    e^(-u) sin^(D-2) theta / int_0^pi e^(-u) sin^(D-2)."""
    th = np.asarray(theta, dtype=float)
    if np.any(th < 0.0) or np.any(th > math.pi):
        raise ValueError("theta outside [0, pi]")
    nodes, weights, table, _, _ = _mode_tables(state.D, state.N, order)
    u_nodes = state.coeffs @ table
    shift = u_nodes.min()
    z = float(np.dot(weights, np.exp(-(u_nodes - shift))))
    u_th = state.eval(np.cos(th))
    out = (np.exp(-(np.atleast_1d(u_th) - shift))
           * np.sin(np.atleast_1d(th)) ** (state.D - 2) / z)
    return float(out[0]) if np.ndim(theta) == 0 else out


def zonal_moments(state: AxisymState, N: int | None = None,
                  order: int = DEFAULT_ORDER) -> np.ndarray:
    """Moments a_n = int_0^pi gtilde(theta) P_{2n}(D, cos theta) dtheta
    for n = 1..N (default: the state's truncation).  All |a_n| <= 1."""
    work = state if N is None or N == state.N else state.padded(max(N, state.N))
    _, gw, table, base = _density_weights(work, order)
    moments = table @ gw - base
    return moments if N is None or N >= state.N else moments[:N]


def apply_G(state: AxisymState, spec: KernelSpec, lam: float,
            order: int = DEFAULT_ORDER) -> np.ndarray:
    """Coefficients of the mean-field image: (lam G(u))_n = -lam k_n a_n."""
    if state.D != spec.D:
        raise ValueError("state and kernel dimension mismatch")
    if state.N > spec.n_max:
        raise ValueError("state truncation exceeds kernel table")
    a = zonal_moments(state, order=order)
    return -lam * spec.coeffs[:state.N] * a


def residual(state: AxisymState, spec: KernelSpec, lam: float,
             order: int = DEFAULT_ORDER) -> np.ndarray:
    """Coefficients of u - lam G(u)."""
    return state.coeffs - apply_G(state, spec, lam, order=order)


def jacobian(state: AxisymState, spec: KernelSpec, lam: float,
             order: int = DEFAULT_ORDER) -> np.ndarray:
    """Matrix J_mn = d(lam G(u))_m / du_n
    = lam k_m (<P_2n P_2m>_gtilde - a_n a_m).

    At u = 0 this is diag(lam k_n / N(D, 2n)).
    """
    if state.D != spec.D:
        raise ValueError("state and kernel dimension mismatch")
    _, gw, table, base = _density_weights(state, order)
    a = table @ gw - base
    second = (table * gw) @ table.T
    cov = second - np.outer(a, a)
    return lam * spec.coeffs[:state.N, None] * cov


def _make_report(state, spec, lam, iterations, method, tol, order):
    res = residual(state, spec, lam, order=order)
    res_norm = state_norm(state.D, res)
    sup_u = state_sup_norm(state)
    lam_khat = lam * spec.sup_norm_khat
    converged = res_norm <= tol and sup_u <= lam_khat + 1e-8
    return SolutionReport(state=state, lam=lam, residual_norm=res_norm,
                          iterations=iterations, method=method,
                          converged=converged, sup_norm_u=sup_u)


def _polish(state: AxisymState, spec: KernelSpec, lam: float, order: int,
            target: float = 1e-14, max_steps: int = 4) -> AxisymState:
    """Extra Newton steps after convergence so that two runs landing on the
    same root agree far inside the deduplication radius."""
    for _ in range(max_steps):
        res = residual(state, spec, lam, order=order)
        if state_norm(state.D, res) <= target:
            break
        jac = jacobian(state, spec, lam, order=order)
        try:
            delta = np.linalg.solve(np.eye(state.N) - jac, -res)
        except np.linalg.LinAlgError:
            break
        candidate = AxisymState(state.D, state.coeffs + delta)
        cand_res = residual(candidate, spec, lam, order=order)
        if state_norm(state.D, cand_res) >= state_norm(state.D, res):
            break
        state = candidate
    return state


def solve(spec: KernelSpec, lam: float, init: AxisymState,
          method: str = "newton", tol: float = 1e-10, max_iter: int = 200,
          order: int = DEFAULT_ORDER, damping: float = 1.0,
          ) -> SolutionReport:
    """Solve u = lam G(u) from the given initial state.

    Picard iterates u <- (1-w) u + w lam G(u); Newton solves
    (I - J) delta = -(u - lam G(u)).  Non-convergence yields a report with
    converged=False; a singular Newton system raises
    SingularLinearizationError.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if method not in ("picard", "newton"):
        raise ValueError(f"unknown method {method!r}")
    state = init
    for it in range(1, max_iter + 1):
        res = residual(state, spec, lam, order=order)
        if state_norm(state.D, res) <= tol:
            if method == "newton":
                state = _polish(state, spec, lam, order)
            return _make_report(state, spec, lam, it - 1, method, tol, order)
        if method == "picard":
            new_coeffs = state.coeffs - damping * res
        else:
            jac = jacobian(state, spec, lam, order=order)
            system = np.eye(state.N) - jac
            # scale-invariant singularity test: reciprocal condition number
            svals = np.linalg.svd(system, compute_uv=False)
            if svals[-1] <= 1e-12 * max(svals[0], 1.0):
                raise SingularLinearizationError(
                    f"Newton linearization singular at lambda={lam}; "
                    "perturb lambda away from critical values")
            delta = np.linalg.solve(system, -res)
            new_coeffs = state.coeffs + delta
        if not np.all(np.isfinite(new_coeffs)):
            return _make_report(state, spec, lam, it, method, tol, order)
        state = AxisymState(state.D, new_coeffs)
    return _make_report(state, spec, lam, max_iter, method, tol, order)


def multistart(spec: KernelSpec, lam: float, n_starts: int, seed: int,
               N: int | None = None, tol: float = 1e-10,
               max_iter: int = 200, order: int = DEFAULT_ORDER,
               ) -> list[SolutionReport]:
    """Enumerate solutions from random starts in the a priori box
    |u_n| <= lam ||K_hat||_inf.

    Deterministic for a fixed seed; converged solutions deduplicated by
    sphere-L2 distance <= 10 tol and returned sorted by (norm, coeffs).
    """
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    if N is None:
        N = spec.n_max
    rng = np.random.default_rng(seed)
    box = lam * spec.sup_norm_khat
    found: list[SolutionReport] = []
    for k in range(n_starts):
        if k == 0:
            coeffs = np.zeros(N)
        else:
            coeffs = rng.uniform(-box, box, size=N)
        try:
            report = solve(spec, lam, AxisymState(spec.D, coeffs),
                           method="newton", tol=tol, max_iter=max_iter,
                           order=order)
        except SingularLinearizationError:
            continue
        if not report.converged:
            continue
        duplicate = False
        for other in found:
            dist = state_norm(spec.D,
                              report.state.coeffs - other.state.coeffs)
            if dist <= 10.0 * tol:
                duplicate = True
                break
        if not duplicate:
            found.append(report)
    found.sort(key=lambda r: (state_norm(spec.D, r.state.coeffs),
                              tuple(r.state.coeffs)))
    return found


def recover_density(state: AxisymState, spec: KernelSpec, lam: float,
                    order: int = DEFAULT_ORDER) -> DensityProfile:
    """Orientation density f = e^(-u) / int e^(-u) dsigma at the zonal
    quadrature nodes."""
    nodes, weights, table, _, _ = _mode_tables(state.D, state.N, order)
    u = state.coeffs @ table
    shift = u.min()
    e = np.exp(-(u - shift))
    z = surface_area(state.D - 1) * float(np.dot(weights, e))
    beta = z * math.exp(-shift)
    return DensityProfile(D=state.D, values=e / z, beta=beta, order=order)


def free_energy(density: DensityProfile, spec: KernelSpec, lam: float,
                ) -> float:
    """Mean-field free energy int f (log f + U(f)/2) dsigma with the
    potential rebuilt from the density's zonal moments."""
    D = density.D
    nodes, weights, table, _, _ = _mode_tables(D, spec.n_max, density.order)
    f = density.values
    sigma_ratio = surface_area(D - 1)
    a = sigma_ratio * (table @ (weights * f))
    potential = lam * (spec.k0 - (spec.coeffs * a) @ table)
    integrand = f * (np.log(f) + 0.5 * potential)
    return sigma_ratio * float(np.dot(weights, integrand))
