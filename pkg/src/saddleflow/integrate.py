"""Fixed-step integration of flows, trajectory recording, and rate fitting.

RK4 (default) or explicit Euler with a fixed step, plus one fractional step
so runs end exactly at the horizon. For projected flows the projected field
is evaluated at every stage and stage points as well as accepted states are
clamped onto the feasible set, which keeps trajectories feasible and is
first-order accurate at active faces.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .flows import Flow
from .projection import project_point

__all__ = [
    "IntegratorConfig",
    "Trajectory",
    "RateReport",
    "IntegrationError",
    "integrate",
    "detect_equilibrium",
    "distance_series",
    "lyapunov_series",
    "max_increment",
    "fit_rate",
    "envelope_check",
]


class IntegrationError(RuntimeError):
    """A non-finite state was produced; carries the last finite time."""

    def __init__(self, message: str, t_last: float):
        super().__init__(f"{message} (last finite time t={t_last:.6g})")
        self.t_last = t_last


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk4"  # "rk4" | "euler"
    step: float = 1e-3
    horizon: float = 1.0
    record_every: int = 1
    clamp: bool = True

    def __post_init__(self):
        if self.method not in ("rk4", "euler"):
            raise ValueError(f"method must be 'rk4' or 'euler', got {self.method!r}")
        if not self.step > 0:
            raise ValueError(f"step must be > 0, got {self.step}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be > 0, got {self.horizon}")
        if not self.step < self.horizon:
            raise ValueError(f"step {self.step} must be smaller than horizon {self.horizon}")
        if self.record_every < 1:
            raise ValueError(f"record_every must be >= 1, got {self.record_every}")


@dataclass(frozen=True)
class Trajectory:
    """Time-stamped states recorded along one integration run."""

    times: np.ndarray
    states: np.ndarray
    flow_label: str = ""

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        s = np.asarray(self.states, dtype=float)
        if t.ndim != 1 or s.ndim != 2 or t.shape[0] != s.shape[0]:
            raise ValueError(f"inconsistent trajectory shapes {t.shape}, {s.shape}")
        if t.shape[0] > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", s)

    def __len__(self) -> int:
        return self.times.shape[0]

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def write_csv(self, path) -> None:
        """CSV with header t,state_0,... and 17-significant-digit values."""
        dim = self.states.shape[1]
        header = "t," + ",".join(f"state_{j}" for j in range(dim))
        with open(path, "w", newline="\n") as fh:
            fh.write(header + "\n")
            for t, row in zip(self.times, self.states):
                fh.write(f"{t:.17g}," + ",".join(f"{v:.17g}" for v in row) + "\n")


@dataclass(frozen=True)
class RateReport:
    """Fitted exponential decay rate against a theoretical lower bound."""

    c_fit: float
    c_bound: Optional[float]
    r_squared: float
    window: tuple
    verdict: str  # "pass" | "fail" | "no_bound"


def integrate(flow: Flow, z0, config: IntegratorConfig) -> Trajectory:
    """Run a fixed-step integration; deterministic for given inputs.

    The start point is clamped onto the feasible set with a warning if it
    lies outside; every accepted state is clamped when ``config.clamp``.
    Raises :class:`IntegrationError` on a non-finite state.
    """
    z = np.atleast_1d(np.asarray(z0, dtype=float)).copy()
    if z.shape != (flow.dim,):
        raise ValueError(f"initial state has shape {z.shape}, flow dimension is {flow.dim}")
    fs = flow.feasible
    if fs is not None and not fs.contains(z, tol=1e-12):
        warnings.warn(
            f"initial state outside the feasible set by {fs.violation(z):.3e}; clamping",
            stacklevel=2,
        )
        z = project_point(fs, z)
    if flow.reset is not None:
        flow.reset()

    h = config.step
    n_full = int(config.horizon / h + 1e-9)
    rem = config.horizon - n_full * h
    has_rem = rem > 1e-9 * h
    n_steps = n_full + (1 if has_rem else 0)
    field = flow.field
    clamp = config.clamp and fs is not None
    lo = fs.lower if fs is not None else None
    up = fs.upper if fs is not None else None
    stage_clip = fs is not None

    times = [0.0]
    states = [z.copy()]
    for i in range(1, n_steps + 1):
        hi = h if i <= n_full else rem  # fractional last step lands on the horizon
        if config.method == "rk4":
            k1 = field(z)
            if stage_clip:
                k2 = field(np.clip(z + (0.5 * hi) * k1, lo, up))
                k3 = field(np.clip(z + (0.5 * hi) * k2, lo, up))
                k4 = field(np.clip(z + hi * k3, lo, up))
            else:
                k2 = field(z + (0.5 * hi) * k1)
                k3 = field(z + (0.5 * hi) * k2)
                k4 = field(z + hi * k3)
            z = z + (hi / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        else:
            z = z + hi * field(z)
        if clamp:
            z = np.clip(z, lo, up)
        if not np.all(np.isfinite(z)):
            raise IntegrationError("non-finite state encountered", times[-1])
        if i % config.record_every == 0 or i == n_steps:
            times.append(i * h if i <= n_full else config.horizon)
            states.append(z.copy())
    return Trajectory(np.asarray(times), np.asarray(states), flow_label=flow.label)


def detect_equilibrium(flow: Flow, traj: Trajectory, tol: float) -> Optional[np.ndarray]:
    """Final trajectory state, if the flow residual there is within ``tol``."""
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    z = traj.final_state
    return z if flow.residual(z) <= tol else None


def distance_series(traj: Trajectory, z_star) -> np.ndarray:
    """(t, ||z(t) - z_star||) pairs as a (k, 2) array."""
    z_star = np.asarray(z_star, dtype=float)
    if z_star.shape != (traj.states.shape[1],):
        raise ValueError(
            f"z_star has shape {z_star.shape}, trajectory dimension is {traj.states.shape[1]}"
        )
    d = np.linalg.norm(traj.states - z_star, axis=1)
    return np.column_stack((traj.times, d))


def lyapunov_series(traj: Trajectory, z_star) -> np.ndarray:
    """(t, V(t)) with V = 0.5*||z - z_star||^2, as a (k, 2) array."""
    series = distance_series(traj, z_star)
    series[:, 1] = 0.5 * series[:, 1] ** 2
    return series


def max_increment(series) -> float:
    """Largest step-to-step increase of the second column (<= 0 means monotone)."""
    v = np.asarray(series, dtype=float)[:, 1]
    if v.shape[0] < 2:
        return 0.0
    return float(np.max(np.diff(v)))


def _auto_window(t: np.ndarray, d: np.ndarray, floor: float) -> tuple:
    """Fit window: skip the transient, stop above the numerical noise floor."""
    d0 = d[0]
    below_half = np.nonzero(d < 0.5 * d0)[0]
    t_start = t[below_half[0]] if below_half.size else t[0]
    cutoff = max(100.0 * floor, 1e-9 * d0)
    tail = np.nonzero(d <= cutoff)[0]
    t_end = t[tail[0]] if tail.size else t[-1]
    if t_end <= t_start:
        t_end = t[-1]
    return (float(t_start), float(t_end))


def fit_rate(
    series,
    window: Optional[tuple] = None,
    floor: float = 1e-12,
    c_bound: Optional[float] = None,
) -> RateReport:
    """Least-squares slope of ln d(t) over a window, negated.

    With an automatic window the fit starts once d drops below half its
    initial value and stops when d reaches max(100*floor, 1e-9*d(0)). The
    verdict is "pass" when c_fit >= 0.9*c_bound, "fail" below it, and
    "no_bound" when no bound is supplied. Requires at least 3 usable samples
    (d above ``floor``) in the window.
    """
    arr = np.asarray(series, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"series must be a (k, 2) array, got shape {arr.shape}")
    t, d = arr[:, 0], arr[:, 1]
    if window is None:
        window = _auto_window(t, d, floor)
    t0, t1 = float(window[0]), float(window[1])
    mask = (t >= t0) & (t <= t1) & (d > floor)
    if int(mask.sum()) < 3:
        raise ValueError(f"too few usable samples in window [{t0}, {t1}]: {int(mask.sum())}")
    tw = t[mask]
    logd = np.log(d[mask])
    slope, intercept = np.polyfit(tw, logd, 1)
    resid = logd - (slope * tw + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((logd - logd.mean()) ** 2))
    r2 = 1.0 if ss_tot <= 1e-300 else 1.0 - ss_res / ss_tot
    c_fit = float(-slope)
    if c_bound is None:
        verdict = "no_bound"
    else:
        verdict = "pass" if c_fit >= 0.9 * c_bound else "fail"
    return RateReport(
        c_fit=c_fit, c_bound=c_bound, r_squared=r2, window=(t0, t1), verdict=verdict
    )


def envelope_check(series, c: float, K: float) -> bool:
    """True when d(t) <= K*d(t0)*exp(-c*(t - t0)) holds at every sample."""
    if not K >= 1.0:
        raise ValueError(f"K must be >= 1, got {K}")
    if not c > 0:
        raise ValueError(f"c must be > 0, got {c}")
    arr = np.asarray(series, dtype=float)
    t, d = arr[:, 0], arr[:, 1]
    bound = K * d[0] * np.exp(-c * (t - t[0])) * (1.0 + 1e-6)
    return bool(np.all(d <= bound))
