"""Continuum descriptions of the feedback dynamics and their fitters.

Two explicit finite-difference forward models:

* decay-diffusion, dN/dt = -(1-u) gamma N + D d2N/du2, on the normalized
  coordinate u = j/L (loss strongest at the left edge);
* order-k drift-diffusion, dN/dt = -v dN/dx + sum_{j=2..k} D_j d^jN/dx^j,
  on the site-index grid, integrated as a coarse explicit map.

Fitting is least squares of the forward solution against space-time data,
with per-frame normalization so only profile shapes are compared.  The
even derivatives use central stencils, the advection term first-order
upwind; boundaries are zero-flux (edge-replicated ghosts), which conserves
mass when loss and drift vanish.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .errors import NonConvergence, UnstableStep

MAX_ITERATIONS = 500
STEP_TOL = 1e-6
#: runaway guard for the explicit drift-diffusion map
BLOWUP_FACTOR = 1e6


@dataclass
class FitResult:
    params: dict[str, float]
    residual_norm: float
    initial_residual_norm: float
    iterations: int
    converged: bool
    uncertainty: dict[str, float] = field(default_factory=dict)

    def __getitem__(self, name: str) -> float:
        return self.params[name]


# ---------------------------------------------------------------------------
# forward solvers


def _neumann_laplacian(N: np.ndarray, dx: float) -> np.ndarray:
    lap = np.empty_like(N)
    lap[1:-1] = N[2:] - 2.0 * N[1:-1] + N[:-2]
    lap[0] = N[1] - N[0]
    lap[-1] = N[-2] - N[-1]
    return lap / dx**2


def simulate_decay_diffusion(
    gamma: float,
    D: float,
    n0: np.ndarray,
    n_steps: int,
    dt: float,
    dx: float | None = None,
    record_every: int = 1,
    loss_profile: np.ndarray | None = None,
) -> np.ndarray:
    """Space-time profile; frame i holds the state after i*record_every steps.

    The default loss profile is (1-u) gamma on the u = j/L grid; an explicit
    per-site profile overrides it.
    """
    n0 = np.asarray(n0, dtype=float)
    M = n0.size
    if dx is None:
        dx = 1.0 / M
    if D < 0:
        raise ValueError("diffusion constant must be non-negative")
    if D * dt / dx**2 > 0.5 + 1e-12:
        raise UnstableStep(f"D*dt/dx^2 = {D * dt / dx**2:.3g} exceeds 1/2")
    if loss_profile is None:
        u = np.arange(M) * dx
        loss_profile = gamma * (1.0 - u)
    else:
        loss_profile = np.asarray(loss_profile, dtype=float)
    N = n0.copy()
    frames = [N.copy()]
    for step in range(1, n_steps + 1):
        N += dt * (-loss_profile * N + D * _neumann_laplacian(N, dx))
        if step % record_every == 0:
            frames.append(N.copy())
    return np.asarray(frames)


def _padded_derivatives(N: np.ndarray, dx: float, orders: list[int], v: float) -> dict[int, np.ndarray]:
    """Finite-difference derivatives with edge-replicated ghost cells."""
    p = np.pad(N, 2, mode="edge")
    c = slice(2, 2 + N.size)
    out: dict[int, np.ndarray] = {}
    if 1 in orders:
        if v >= 0.0:  # upwind against the drift direction
            out[1] = (p[c] - p[1:-3]) / dx
        else:
            out[1] = (p[3:-1] - p[c]) / dx
    if 2 in orders:
        out[2] = (p[3:-1] - 2.0 * p[c] + p[1:-3]) / dx**2
    if 3 in orders:
        out[3] = (p[4:] - 2.0 * p[3:-1] + 2.0 * p[1:-3] - p[:-4]) / (2.0 * dx**3)
    if 4 in orders:
        out[4] = (p[4:] - 4.0 * p[3:-1] + 6.0 * p[c] - 4.0 * p[1:-3] + p[:-4]) / dx**4
    return out


def simulate_drift_diffusion(
    v: float,
    D_coeffs: np.ndarray | list[float],
    n0: np.ndarray,
    n_steps: int,
    dt: float,
    dx: float = 1.0,
    record_every: int = 1,
) -> np.ndarray:
    """Explicit integration of the order-k drift-diffusion expansion.

    ``D_coeffs[j]`` multiplies the derivative of order j+2; k = len+1 must
    lie in {2, 3, 4}.  The map is checked for runaway growth rather than a
    von Neumann bound: the fitted coefficients of interest describe a
    coarse discrete map whose anti-diffusive orders have no stable
    continuum limit.
    """
    D_coeffs = np.asarray(D_coeffs, dtype=float)
    k = D_coeffs.size + 1
    if k not in (2, 3, 4):
        raise ValueError(f"expansion order k = {k} must be 2, 3 or 4")
    if abs(v) * dt / dx > 1.0 + 1e-12:
        raise UnstableStep(f"advective CFL |v|*dt/dx = {abs(v) * dt / dx:.3g} exceeds 1")
    n0 = np.asarray(n0, dtype=float)
    orders = [1] + list(range(2, k + 1))
    cap = BLOWUP_FACTOR * (np.abs(n0).max() + 1.0)
    N = n0.copy()
    frames = [N.copy()]
    for step in range(1, n_steps + 1):
        d = _padded_derivatives(N, dx, orders, v)
        dN = -v * d[1]
        for j in range(2, k + 1):
            dN += D_coeffs[j - 2] * d[j]
        N += dt * dN
        if not np.all(np.isfinite(N)) or np.abs(N).max() > cap:
            raise UnstableStep(f"solution ran away at step {step}")
        if step % record_every == 0:
            frames.append(N.copy())
    return np.asarray(frames)


def effective_velocity(p_swap: float, dx: float, dt: float) -> float:
    """Drift velocity induced by conditional-SWAP feedback: p * dx / dt."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    return p_swap * dx / dt


# ---------------------------------------------------------------------------
# fitting


def normalize_frames(frames: np.ndarray) -> np.ndarray:
    """Each frame rescaled to unit sum."""
    frames = np.asarray(frames, dtype=float)
    totals = frames.sum(axis=1, keepdims=True)
    if np.any(totals <= 0):
        raise ValueError("cannot normalize a frame with non-positive mass")
    return frames / totals


def _safe_normalize(frames: np.ndarray) -> np.ndarray | None:
    totals = frames.sum(axis=1, keepdims=True)
    if np.any(totals <= 0):
        return None
    return frames / totals


def _frame_moments(frames: np.ndarray, dx: float, dt_frame: float):
    """Centroid drift and variance growth rates, for initial guesses."""
    clipped = np.clip(frames, 0.0, None) + 1e-300
    norm = clipped / clipped.sum(axis=1, keepdims=True)
    x = np.arange(frames.shape[1]) * dx
    centroids = norm @ x
    variances = norm @ x**2 - centroids**2
    n = frames.shape[0]
    t = np.arange(n) * dt_frame
    if n < 2 or t[-1] == 0:
        return 0.0, 0.0
    v0 = float(np.polyfit(t, centroids, 1)[0])
    dvar = float(np.polyfit(t, variances, 1)[0])
    return v0, dvar


def _run_least_squares(residual_fn, x0, bounds=None) -> tuple:
    kwargs = dict(xtol=STEP_TOL, ftol=1e-12, gtol=1e-12,
                  max_nfev=MAX_ITERATIONS * (len(x0) + 1))
    if bounds is not None:
        kwargs["bounds"] = bounds
    res = least_squares(residual_fn, x0, **kwargs)
    if res.status < 0 or not np.isfinite(res.cost):
        raise NonConvergence(res.message)
    return res


def _uncertainty_from_jacobian(res, names) -> dict[str, float]:
    m, n = res.jac.shape
    if m <= n:
        return {k: float("inf") for k in names}
    try:
        cov = np.linalg.inv(res.jac.T @ res.jac) * 2.0 * res.cost / (m - n)
        sig = np.sqrt(np.maximum(np.diag(cov), 0.0))
    except np.linalg.LinAlgError:
        sig = np.full(n, np.inf)
    return dict(zip(names, sig))


def fit_decay_diffusion(
    data: np.ndarray,
    dt: float,
    dx: float | None = None,
    record_every: int = 1,
    initial: tuple[float, float] | None = None,
) -> FitResult:
    """Recover (gamma, D) by least squares against the forward solver.

    ``data`` is a rectangular space-time array whose first frame seeds the
    solver; frames are normalized per layer before comparison, matching how
    measured profiles are reported.
    """
    data = np.asarray(data, dtype=float)
    n_frames, M = data.shape
    if dx is None:
        dx = 1.0 / M
    n_steps = (n_frames - 1) * record_every
    target = normalize_frames(data)[1:]
    n0 = data[0]

    if initial is None:
        v0, dvar = _frame_moments(data, dx, dt * record_every)
        mass = data.sum(axis=1)
        if mass[-1] > 0 and mass[0] > 0 and abs(mass[-1] - mass[0]) > 1e-12 * mass[0]:
            # mean loss rate <gamma (1-u)> ~ gamma/2 over a spread profile
            gamma0 = max(-np.log(mass[-1] / mass[0]) / (dt * n_steps), 1e-3) * 2.0
        else:
            # normalized data: the loss tilts the centroid at rate gamma*Var(u)
            u = np.arange(M) * dx
            w = target[0] / target[0].sum()
            var_u = max(float(w @ u**2 - (w @ u) ** 2), 1e-12)
            gamma0 = max(v0 / var_u, 0.0)
        D0 = min(max(dvar / 2.0, 1e-6), 0.45 * dx**2 / dt)
        initial = (gamma0, D0)

    def residual(theta):
        gamma, D = theta
        try:
            model = simulate_decay_diffusion(
                gamma, D, n0, n_steps, dt, dx=dx, record_every=record_every
            )
        except UnstableStep:
            return np.full(target.size, 1e6)
        norm = _safe_normalize(model)
        if norm is None:
            return np.full(target.size, 1e6)
        return (norm[1:] - target).ravel()

    res = _run_least_squares(residual, np.asarray(initial), bounds=([0.0, 0.0], [np.inf, np.inf]))
    params = {"gamma": float(res.x[0]), "D": float(res.x[1])}
    return FitResult(
        params=params,
        residual_norm=float(np.linalg.norm(res.fun)),
        initial_residual_norm=float(np.linalg.norm(residual(np.asarray(initial)))),
        iterations=int(res.nfev),
        converged=bool(res.status > 0),
        uncertainty=_uncertainty_from_jacobian(res, ["gamma", "D"]),
    )


def fit_drift_diffusion(
    data: np.ndarray,
    k: int = 4,
    dt: float = 1.0,
    dx: float = 1.0,
    record_every: int = 1,
    initial: np.ndarray | None = None,
) -> FitResult:
    """Recover (v, D_2..D_k) by least squares against the forward map."""
    if k not in (2, 3, 4):
        raise ValueError(f"expansion order k = {k} must be 2, 3 or 4")
    data = np.asarray(data, dtype=float)
    n_frames, M = data.shape
    n_steps = (n_frames - 1) * record_every
    target = normalize_frames(data)[1:]
    n0 = data[0]

    if initial is None:
        v0, dvar = _frame_moments(data, dx, dt * record_every)
        initial = np.zeros(k)
        # clip the moment-based guesses inside the explicit scheme's stable
        # region, otherwise the optimizer starts on the runaway plateau
        initial[0] = float(np.clip(v0, -0.5 * dx / dt, 0.5 * dx / dt))
        initial[1] = min(max(dvar / 2.0, 1e-3), 0.25 * dx**2 / dt)

    def residual(theta):
        v, coeffs = theta[0], theta[1:]
        try:
            model = simulate_drift_diffusion(
                v, coeffs, n0, n_steps, dt, dx=dx, record_every=record_every
            )
        except UnstableStep:
            return np.full(target.size, 1e6)
        norm = _safe_normalize(model)
        if norm is None:
            return np.full(target.size, 1e6)
        return (norm[1:] - target).ravel()

    res = _run_least_squares(residual, np.asarray(initial, dtype=float))
    names = ["v"] + [f"D{j}" for j in range(2, k + 1)]
    params = {name: float(val) for name, val in zip(names, res.x)}
    return FitResult(
        params=params,
        residual_norm=float(np.linalg.norm(res.fun)),
        initial_residual_norm=float(np.linalg.norm(residual(np.asarray(initial, dtype=float)))),
        iterations=int(res.nfev),
        converged=bool(res.status > 0),
        uncertainty=_uncertainty_from_jacobian(res, names),
    )


def format_fit_report(result: FitResult, title: str = "fit") -> str:
    lines = [f"{title}", "-" * max(len(title), 8)]
    width = max(len(k) for k in result.params)
    for name, value in result.params.items():
        sigma = result.uncertainty.get(name, float("nan"))
        lines.append(f"{name:<{width}}  {value: .8g}  +/- {sigma:.3g}")
    lines.append(f"residual   {result.residual_norm:.6g}")
    lines.append(f"iterations {result.iterations}")
    lines.append(f"converged  {result.converged}")
    return "\n".join(lines)
