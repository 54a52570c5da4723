"""Differentiability and representability lab.

The two-step-minimization demo function, kink detection on scanned curves,
constrained-search energy landscapes backed by the Fock oracle, and a probe
for whether a target is reachable from idempotent (single-determinant)
densities.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, NotRepresentable
from .fock_oracle import SearchOptions, constrained_search, one_body_density
from .matrixcore import hermitize


# ---------------------------------------------------------------------------
# the analytic two-step demo


def phi(x, y, d=1.0):
    """3 x^4 - 8 x^3 y + 6 x^2 (y^2 - d^2); analytic everywhere."""
    if d <= 0:
        raise DomainError("d must be positive")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = 3.0 * x ** 4 - 8.0 * x ** 3 * y + 6.0 * x ** 2 * (y ** 2 - d ** 2)
    return out if out.ndim else float(out)


def phi_inner_min(y, d=1.0):
    """Minimum of phi over x at fixed y.

    Evaluates the three stationary candidates x in {0, y-d, y+d} and returns
    (value, argmin x, branch label), branch in {"c0", "c+", "c-"}; ties prefer
    c0, then c+.
    """
    if d <= 0:
        raise DomainError("d must be positive")
    y = float(y)
    # min() keeps the first minimal candidate, so ties resolve c0, then c+
    label, x_star, value = min(
        (
            ("c0", 0.0, phi(0.0, y, d)),
            ("c+", y + d, phi(y + d, y, d)),
            ("c-", y - d, phi(y - d, y, d)),
        ),
        key=lambda item: item[2],
    )
    return float(value), float(x_star), label


def inner_min_curve(ys, d=1.0):
    """Vectorized phi_inner_min over a grid: (values, argmins, branches)."""
    if d <= 0:
        raise DomainError("d must be positive")
    ys = np.asarray(ys, dtype=float)
    stack = np.stack([phi(np.zeros_like(ys), ys, d), phi(ys + d, ys, d), phi(ys - d, ys, d)])
    choice = stack.argmin(axis=0)  # first minimum wins: ties prefer c0, then c+
    values = np.take_along_axis(stack, choice[None, :], axis=0)[0]
    argmins = np.where(choice == 0, 0.0, np.where(choice == 1, ys + d, ys - d))
    labels = np.array(["c0", "c+", "c-"])[choice]
    return values, argmins, labels


# ---------------------------------------------------------------------------
# scan containers


@dataclass(frozen=True)
class ScanCurve:
    """A scanned one-dimensional landscape with per-point metadata."""

    parameter: np.ndarray
    values: np.ndarray
    argmin: np.ndarray
    branch: tuple
    residual: np.ndarray
    flags: tuple

    def __post_init__(self):
        grid = np.asarray(self.parameter, dtype=float)
        if grid.ndim != 1 or len(grid) < 2 or not np.all(np.diff(grid) > 0):
            raise DomainError("scan grid must be strictly ascending")
        vals = np.asarray(self.values, dtype=float)
        bad = ~np.isfinite(vals)
        flagged = np.array([f != "ok" for f in self.flags])
        if np.any(bad & ~flagged):
            raise DomainError("non-finite scan values must be flagged")
        object.__setattr__(self, "parameter", grid)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "argmin", np.asarray(self.argmin, dtype=float))
        object.__setattr__(self, "residual", np.asarray(self.residual, dtype=float))

    def rows(self):
        """CSV rows: param, value, argmin, branch, residual, flag."""
        for i in range(len(self.parameter)):
            yield (
                self.parameter[i],
                self.values[i],
                self.argmin[i],
                self.branch[i],
                self.residual[i],
                self.flags[i],
            )

    def minimum(self):
        """(parameter, value) of the smallest finite point."""
        finite = np.isfinite(self.values)
        idx = int(np.flatnonzero(finite)[np.argmin(self.values[finite])])
        return float(self.parameter[idx]), float(self.values[idx])


@dataclass(frozen=True)
class Kink:
    location: float
    left_slope: float
    right_slope: float
    jump: float


@dataclass(frozen=True)
class KinkReport:
    kinks: tuple
    step: float
    threshold: float

    @property
    def locations(self):
        return tuple(k.location for k in self.kinks)


def kink_scan(curve, interval, step: float = 1e-4, threshold: float | None = None) -> KinkReport:
    """Detect slope discontinuities of `curve` on a uniform grid.

    A point is a kink when |forward slope - backward slope| exceeds the
    threshold; the default threshold scales with a robust curvature estimate
    so smooth-but-steep curves are not misreported.  Adjacent detections
    merge into the largest-jump grid point.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if hi <= lo or step <= 0:
        raise DomainError("need an ascending interval and positive step")
    n = int(round((hi - lo) / step))
    xs = lo + step * np.arange(n + 1)
    try:
        fs = np.asarray(curve(xs), dtype=float)
        if fs.shape != xs.shape:
            raise TypeError
    except (TypeError, ValueError):
        fs = np.array([float(curve(x)) for x in xs])
    if not np.all(np.isfinite(fs)):
        raise DomainError("curve must be finite on the scan interval")
    slopes = np.diff(fs) / step
    jumps = np.abs(np.diff(slopes))  # at interior points xs[1:-1]
    if threshold is None:
        curvature = jumps / step
        smooth = np.quantile(curvature, 0.98) if len(curvature) else 0.0
        slope_scale = np.abs(slopes).max() if len(slopes) else 1.0
        threshold = max(50.0 * smooth * step, 1e-8 * max(1.0, slope_scale))
    flagged = np.flatnonzero(jumps > threshold)
    kinks = []
    cluster: list = []
    for idx in flagged:
        if cluster and idx > cluster[-1] + 1:
            kinks.append(_cluster_peak(cluster, xs, slopes, jumps))
            cluster = []
        cluster.append(idx)
    if cluster:
        kinks.append(_cluster_peak(cluster, xs, slopes, jumps))
    return KinkReport(kinks=tuple(kinks), step=step, threshold=float(threshold))


def _cluster_peak(cluster, xs, slopes, jumps):
    best = max(cluster, key=lambda i: jumps[i])
    return Kink(
        location=float(xs[best + 1]),
        left_slope=float(slopes[best]),
        right_slope=float(slopes[best + 1]),
        jump=float(jumps[best]),
    )


def appendix_scan(d: float = 1.0, grid_step: float | None = None, kink_step: float = 1e-4):
    """Bundle the two-step-minimization demo at scale d.

    Returns a dict with the inner-minimized curve on [-5d, 5d], its kink
    report, the grid minimum, and the direct two-dimensional minimum.
    """
    if d <= 0:
        raise DomainError("d must be positive")
    grid_step = 1e-3 * d if grid_step is None else grid_step
    n = int(round(10.0 * d / grid_step))
    ys = -5.0 * d + grid_step * np.arange(n + 1)
    values, argmins, labels = inner_min_curve(ys, d)
    curve = ScanCurve(
        parameter=ys,
        values=values,
        argmin=argmins,
        branch=tuple(labels),
        residual=np.zeros_like(ys),
        flags=("ok",) * len(ys),
    )
    kinks = kink_scan(lambda arr: inner_min_curve(arr, d)[0], (-5.0 * d, 5.0 * d), step=kink_step * d)
    y_min, value_min = curve.minimum()
    return {
        "d": d,
        "curve": curve,
        "kinks": kinks,
        "minimum": (y_min, value_min),
        "direct_minimum": -27.0 * d ** 4,
        "direct_argmin": (3.0 * d, 2.0 * d),
    }


# ---------------------------------------------------------------------------
# oracle-backed scans


def hk_scan(ham, basis, variable, grid, opts: SearchOptions | None = None) -> ScanCurve:
    """Constrained-search energy along one principal variable.

    Per grid point the Fock-space penalty search runs with the previous
    minimizer as an extra warm start; infeasible points are flagged rather
    than aborting the scan.
    """
    opts = opts or SearchOptions()
    grid = np.asarray(grid, dtype=float)
    values, argmins, residuals = [], [], []
    flags, branches = [], []
    warm = None
    for q in grid:
        point_opts = opts if warm is None else replace(opts, extra_starts=(warm,))
        try:
            energy, state, residual = constrained_search(ham, basis, [variable], [q], point_opts)
            achieved = complex(variable.evaluator(one_body_density(state).array)).real
            values.append(energy)
            argmins.append(achieved)
            residuals.append(residual)
            flags.append("ok")
            warm = state.amplitudes
        except NotRepresentable as err:
            values.append(np.nan)
            argmins.append(np.nan)
            residuals.append(err.residual if err.residual is not None else np.nan)
            flags.append("infeasible")
        branches.append(variable.label)
    return ScanCurve(
        parameter=grid,
        values=np.array(values),
        argmin=np.array(argmins),
        branch=tuple(branches),
        residual=np.array(residuals),
        flags=tuple(flags),
    )


# ---------------------------------------------------------------------------
# representability probe over idempotent densities


@dataclass(frozen=True)
class ProbeResult:
    feasible: bool
    residual: float
    density: np.ndarray
    restart_residuals: tuple


def ks_representability_probe(variables, targets, dimension, n_particles,
                              restarts: int = 8, seed: int = 42,
                              max_iter: int = 4000, feasible_tol: float = 1e-6) -> ProbeResult:
    """Best idempotent density reproducing the targets.

    Minimizes sum_A |Q_A(C C^dag) - q_A|^2 over M x N orbital-coefficient
    matrices, re-orthonormalized each step by polar projection, multi-start.
    Infeasibility is a result, not an error.
    """
    targets = np.asarray(targets, dtype=complex)
    rng = np.random.default_rng(seed)
    starts = []
    smart = _spectral_start(variables, targets, dimension, n_particles)
    if smart is not None:
        starts.append(smart)
    while len(starts) < max(restarts, 1):
        starts.append(
            rng.standard_normal((dimension, n_particles))
            + 1j * rng.standard_normal((dimension, n_particles))
        )
    best = None
    residuals = []
    for start in starts:
        c, value = _probe_descent(variables, targets, start, max_iter)
        residual = float(np.sqrt(value))
        residuals.append(residual)
        if best is None or residual < best[0]:
            best = (residual, c)
    residual, c = best
    rho = hermitize(c @ c.conj().T)
    return ProbeResult(
        feasible=residual <= feasible_tol,
        residual=residual,
        density=rho,
        restart_residuals=tuple(residuals),
    )


def _spectral_start(variables, targets, dimension, n_particles):
    """When the targets pin every density entry, start from the target's own
    top-N natural orbitals."""
    entries = {}
    for var, q in zip(variables, targets):
        if getattr(var, "kind", "") != "matrix_element":
            return None
        label = var.label  # "rho[k,l]"
        k, l = (int(s) for s in label[4:-1].split(","))
        entries[(k, l)] = complex(q)
    if len(entries) < dimension * dimension:
        return None
    target = np.zeros((dimension, dimension), dtype=complex)
    for (k, l), v in entries.items():
        target[k, l] = v
    vals, vecs = np.linalg.eigh(hermitize(target))
    return vecs[:, ::-1][:, :n_particles].astype(complex)


def _polar(c):
    u, _, vh = np.linalg.svd(c, full_matrices=False)
    return u @ vh


def _probe_objective(variables, targets, rho):
    qs = np.array([complex(v.evaluator(rho)) for v in variables])
    dq = qs - targets
    return float(np.sum(np.abs(dq) ** 2)), dq


def _probe_descent(variables, targets, start, max_iter):
    c = _polar(np.asarray(start, dtype=complex))
    rho = c @ c.conj().T
    value, dq = _probe_objective(variables, targets, rho)
    step = 0.2
    for _ in range(max_iter):
        grad_matrix = np.zeros_like(rho)
        for var, d in zip(variables, dq):
            dm = np.asarray(var.derivative(rho), dtype=complex)
            grad_matrix += np.conj(d) * dm + d * dm.conj().T
        grad_c = grad_matrix @ c
        gnorm = np.linalg.norm(grad_c)
        if gnorm <= 1e-14 * (1.0 + value) or value <= 1e-24:
            break
        improved = False
        for _ in range(40):
            trial = _polar(c - step * grad_c)
            trial_rho = trial @ trial.conj().T
            trial_value, trial_dq = _probe_objective(variables, targets, trial_rho)
            if trial_value <= value - 1e-4 * step * gnorm ** 2:
                c, rho, value, dq = trial, trial_rho, trial_value, trial_dq
                step = min(step * 1.3, 10.0)
                improved = True
                break
            step *= 0.5
        if not improved:
            break
    return c, value
