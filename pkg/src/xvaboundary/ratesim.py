"""Shifted two-factor LIBOR market model with a common CIR variance driver.

Forwards ``L_n`` cover the accrual period ``[T_n, T_{n+1}]`` of the tenor grid
and fix at ``T_n``. Under the spot-LIBOR measure the dynamics are

    dL_n = x (L_n + s_n) lam_n . sum_{k=m(t)}^{n} tau_k (L_k + s_k) lam_k / (1 + tau_k L_k) dt
           + (L_n + s_n) sqrt(x) lam_n . dW

with ``m(t)`` the first forward not yet fixed, and

    dx = theta (1 - x) dt + eta sqrt(x) dZ,   dZ dW = 0,   x(0) = 1.

Forwards are stepped with a log-Euler scheme on the shifted rate (drift frozen
at the start of the step) and the variance with full-truncation Euler. A
forward is frozen at its fixing once the simulation reaches ``T_n``.

The numeraire is the discretely rolled spot account deflated to the current
date by the stub bond,

    B(t) = prod_{k<m} (1 + tau_k L_k(T_k)) * P(t, T_m),

where ``T_m`` is the first tenor date at or after ``t``. The stub bond uses the
already-fixed front LIBOR: ``P(t, T_m) = 1 / (1 + (T_m - t) L_{m-1}(T_{m-1}))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GRID_TOL = 1e-9


@dataclass(frozen=True)
class CirParams:
    theta: float
    eta: np.ndarray
    x0: float = 1.0

    def __post_init__(self):
        eta = np.atleast_1d(np.asarray(self.eta, dtype=float))
        object.__setattr__(self, "eta", eta)
        if self.x0 != 1.0:
            raise ValueError("CIR variance must start at x0 = 1")
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        if np.any(eta < 0) or not np.all(np.isfinite(eta)):
            raise ValueError("eta must be finite and non-negative")


@dataclass(frozen=True)
class LmmParams:
    """Model inputs.

    ``vol_loadings`` has shape ``(n_buckets, n_forwards, 2)``; bucket ``b``
    applies on ``[bucket_starts[b], bucket_starts[b+1])``. A ``(n_forwards, 2)``
    array is accepted as a single time-homogeneous bucket. ``cir.eta`` must
    carry one value per bucket (or a single value).
    """

    tenor_grid: np.ndarray
    initial_forwards: np.ndarray
    shifts: np.ndarray
    vol_loadings: np.ndarray
    cir: CirParams
    bucket_starts: np.ndarray = field(default_factory=lambda: np.array([0.0]))

    def __post_init__(self):
        tenor = np.asarray(self.tenor_grid, dtype=float)
        fwd = np.asarray(self.initial_forwards, dtype=float)
        shifts = np.broadcast_to(np.asarray(self.shifts, dtype=float), fwd.shape).copy()
        loads = np.asarray(self.vol_loadings, dtype=float)
        if loads.ndim == 2:
            loads = loads[None, :, :]
        buckets = np.atleast_1d(np.asarray(self.bucket_starts, dtype=float))

        if tenor.ndim != 1 or tenor.size < 2 or np.any(np.diff(tenor) <= 0):
            raise ValueError("tenor_grid must be strictly increasing with at least two dates")
        if abs(tenor[0]) > GRID_TOL:
            raise ValueError("tenor_grid must start at 0")
        if fwd.shape != (tenor.size - 1,):
            raise ValueError(
                f"expected {tenor.size - 1} initial forwards, got {fwd.shape}")
        if np.any(shifts < 0):
            raise ValueError("shifts must be non-negative")
        if np.any(fwd < -shifts):
            raise ValueError("initial forwards must not be below -shift")
        if loads.ndim != 3 or loads.shape[1:] != (fwd.size, 2):
            raise ValueError(
                f"vol_loadings must have shape (n_buckets, {fwd.size}, 2), got {loads.shape}")
        if not np.all(np.isfinite(loads)):
            raise ValueError("vol_loadings must be finite")
        if buckets.size != loads.shape[0] or abs(buckets[0]) > GRID_TOL or np.any(np.diff(buckets) <= 0):
            raise ValueError("bucket_starts must start at 0, increase, and match the loading buckets")
        if self.cir.eta.size not in (1, buckets.size):
            raise ValueError("cir.eta must have one value per vol bucket")

        object.__setattr__(self, "tenor_grid", tenor)
        object.__setattr__(self, "initial_forwards", fwd)
        object.__setattr__(self, "shifts", shifts)
        object.__setattr__(self, "vol_loadings", loads)
        object.__setattr__(self, "bucket_starts", buckets)

    @property
    def accruals(self) -> np.ndarray:
        return np.diff(self.tenor_grid)

    @property
    def initial_discounts(self) -> np.ndarray:
        """P(0, T_j) for every tenor date, implied by the initial forwards."""
        return np.concatenate(
            [[1.0], np.cumprod(1.0 / (1.0 + self.accruals * self.initial_forwards))])

    def bucket_index(self, t: float) -> int:
        return int(np.searchsorted(self.bucket_starts, t + GRID_TOL, side="right") - 1)

    def eta_at(self, t: float) -> float:
        eta = self.cir.eta
        return float(eta[0] if eta.size == 1 else eta[self.bucket_index(t)])


@dataclass(frozen=True, eq=False)
class PathSet:
    """Simulated state. Arrays are read-only after construction."""

    date_grid: np.ndarray
    tenor_grid: np.ndarray
    forwards: np.ndarray  # (n_paths, n_dates, n_forwards)
    variance: np.ndarray  # (n_paths, n_dates)
    numeraire: np.ndarray  # (n_paths, n_dates)
    seed: int

    def __post_init__(self):
        for name in ("date_grid", "tenor_grid", "forwards", "variance", "numeraire"):
            getattr(self, name).setflags(write=False)

    @property
    def n_paths(self) -> int:
        return self.forwards.shape[0]

    @property
    def n_dates(self) -> int:
        return self.date_grid.size

    @property
    def accruals(self) -> np.ndarray:
        return np.diff(self.tenor_grid)

    def date_index(self, t: float) -> int:
        i = int(np.searchsorted(self.date_grid, t - GRID_TOL))
        if i >= self.date_grid.size or abs(self.date_grid[i] - t) > GRID_TOL:
            raise ValueError(f"date {t} is not on the simulation grid")
        return i

    def tenor_index(self, T: float) -> int:
        j = int(np.searchsorted(self.tenor_grid, T - GRID_TOL))
        if j >= self.tenor_grid.size or abs(self.tenor_grid[j] - T) > GRID_TOL:
            raise ValueError(f"date {T} is not on the tenor grid")
        return j

    def front_index(self, d: int) -> int:
        """Index m of the first tenor date at or after grid date ``d``."""
        t = self.date_grid[d]
        return int(np.searchsorted(self.tenor_grid, t - GRID_TOL))


def evolve_cir(x, theta: float, eta_bucket: float, dt: float, z):
    """One full-truncation Euler step of dx = theta(1-x)dt + eta sqrt(x) dZ."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    xp = np.maximum(x, 0.0)
    out = x + theta * (1.0 - xp) * dt + eta_bucket * np.sqrt(xp * dt) * z
    return np.maximum(out, 0.0)


def path_normals(seed: int, path: int, n_steps: int) -> np.ndarray:
    """Standard normals for one path: columns are (W1, W2, Z) per step.

    Each path draws from its own PCG64 substream keyed by ``(seed, path)``, so
    the draws for path ``i`` do not depend on how many paths are simulated.
    """
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(path,))
    return np.random.Generator(np.random.PCG64(ss)).standard_normal((n_steps, 3))


def check_grid(params: LmmParams, grid: np.ndarray) -> None:
    if grid.ndim != 1 or grid.size < 1:
        raise ValueError("date grid must be a non-empty vector")
    if abs(grid[0]) > GRID_TOL:
        raise ValueError("date grid must start at 0")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("date grid must be strictly increasing")
    tenor = params.tenor_grid
    if grid[-1] > tenor[-1] + GRID_TOL:
        raise ValueError("date grid extends beyond the last tenor date")
    inside = tenor[tenor <= grid[-1] + GRID_TOL]
    idx = np.searchsorted(grid, inside - GRID_TOL)
    if np.any(idx >= grid.size) or np.any(np.abs(grid[np.minimum(idx, grid.size - 1)] - inside) > GRID_TOL):
        raise ValueError("every tenor date inside the horizon must lie on the date grid")


def simulate_paths(params: LmmParams, grid, n_paths: int, seed: int) -> PathSet:
    grid = np.asarray(grid, dtype=float)
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    check_grid(params, grid)

    tenor = params.tenor_grid
    tau = params.accruals
    shifts = params.shifts
    n_fwd = tau.size
    n_steps = grid.size - 1

    normals = np.empty((n_paths, max(n_steps, 0), 3))
    for p in range(n_paths):
        normals[p] = path_normals(seed, p, n_steps)

    L = np.empty((n_paths, grid.size, n_fwd))
    x = np.empty((n_paths, grid.size))
    L[:, 0, :] = params.initial_forwards
    x[:, 0] = params.cir.x0

    cur = L[:, 0, :].copy()
    xc = x[:, 0].copy()
    for d in range(n_steps):
        t0, t1 = grid[d], grid[d + 1]
        dt = t1 - t0
        m = int(np.searchsorted(tenor, t0 + GRID_TOL, side="right"))
        # forwards with fixing strictly after t0 are still diffusing
        lam = params.vol_loadings[params.bucket_index(t0)]
        if m < n_fwd:
            live = slice(m, n_fwd)
            F = cur[:, live] + shifts[live]
            lam_live = lam[live]  # (k, 2)
            xpos = np.maximum(xc, 0.0)[:, None]
            w = (tau[live] * F / (1.0 + tau[live] * cur[:, live]))[:, :, None] * lam_live[None]
            drift_vec = np.cumsum(w, axis=1)  # (paths, k, 2)
            mu_over_F = xpos * np.einsum("pkf,kf->pk", drift_vec, lam_live)
            var = xpos * np.sum(lam_live ** 2, axis=1)[None, :]
            dw = normals[:, d, :2] * np.sqrt(dt)
            shock = np.sqrt(xpos) * (dw @ lam_live.T)
            cur[:, live] = cur[:, live] + F * np.expm1((mu_over_F - 0.5 * var) * dt + shock)
        xc = evolve_cir(xc, params.cir.theta, params.eta_at(t0), dt, normals[:, d, 2])
        L[:, d + 1, :] = cur
        x[:, d + 1] = xc

    numeraire = _numeraire(grid, tenor, tau, L)
    return PathSet(date_grid=grid, tenor_grid=tenor.copy(), forwards=L,
                   variance=x, numeraire=numeraire, seed=int(seed))


def _numeraire(grid, tenor, tau, L) -> np.ndarray:
    n_paths = L.shape[0]
    B = np.empty((n_paths, grid.size))
    for d, t in enumerate(grid):
        m = int(np.searchsorted(tenor, t - GRID_TOL))
        if m == 0:
            B[:, d] = 1.0
            continue
        rolled = np.prod(1.0 + tau[:m] * L[:, d, :m], axis=1)
        stub = 1.0 / (1.0 + (tenor[m] - t) * L[:, d, m - 1]) if tenor[m] - t > GRID_TOL else 1.0
        B[:, d] = rolled * stub
    return B


def discount_curve(ps: PathSet, d: int, bump: float = 0.0) -> np.ndarray:
    """P(t_d, T_j) for every path and tenor date; NaN for T_j < t_d.

    ``bump`` is a parallel shift applied to the forwards that have not fixed.
    """
    t = ps.date_grid[d]
    tenor = ps.tenor_grid
    tau = ps.accruals
    m = ps.front_index(d)
    out = np.full((ps.n_paths, tenor.size), np.nan)
    if m >= tenor.size:
        return out
    if m == 0 or tenor[m] - t <= GRID_TOL:
        stub = np.ones(ps.n_paths)
    else:
        stub = 1.0 / (1.0 + (tenor[m] - t) * ps.forwards[:, d, m - 1])
    out[:, m] = stub
    if m < tau.size:
        growth = 1.0 + tau[m:] * (ps.forwards[:, d, m:] + bump)
        out[:, m + 1:] = stub[:, None] / np.cumprod(growth, axis=1)
    return out


def discount_factor(ps: PathSet, path: int, t: float, T: float) -> float:
    if t > T + GRID_TOL:
        raise ValueError("t must not exceed T")
    d = ps.date_index(t)
    if abs(T - t) <= GRID_TOL:
        return 1.0
    j = ps.tenor_index(T)
    return float(discount_curve(ps, d)[path, j])
