"""Optimal-angle and peak-time searches, and least-squares scaling fits."""
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import least_squares, minimize_scalar

from .dynamics import _amps, cached_hamiltonian, cached_operator, initial_state
from .fock_basis import enumerate_basis
from .metrology import qfim_trajectory

__all__ = [
    "FitResult", "ThetaOpt", "TMax", "find_theta_opt", "find_t_max", "covariance_curve",
    "polyfit_quadratic", "fit_power_law", "fit_gaussian_offset", "default_time_grid",
]


@dataclass
class FitResult:
    model: str
    coefficients: dict
    residual_norm: float
    domain: tuple
    stderr: dict = field(default_factory=dict)
    converged: bool = True
    message: str = ""

    def __getitem__(self, key):
        return self.coefficients[key]

    def to_json(self):
        d = asdict(self)
        d["domain"] = list(self.domain)
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        d["domain"] = tuple(d["domain"])
        return cls(**d)


def default_time_grid(n_points=400, t_max=np.pi):
    """Uniform grid over ``(0, t_max]``."""
    return t_max * np.arange(1, n_points + 1) / n_points


@dataclass(frozen=True)
class ThetaOpt:
    theta: float
    variance: float
    flat: bool


def _var(psi_cols, op):
    a = op.matrix @ psi_cols
    mean = np.einsum("i...,i...->...", psi_cols.conj(), a).real
    sq = np.einsum("i...,i...->...", a.conj(), a).real
    return sq - mean ** 2


def find_theta_opt(probe, n_coarse=64, flat_tol=1e-10):
    """Angle in ``[0, pi)`` maximizing ``Var(Jz)`` of ``exp(-i theta Jx) probe``.

    A coarse scan brackets the maximum and golden-section search refines it.
    A flat objective returns ``theta = 0`` with ``flat=True``.
    """
    psi = _amps(probe)
    n = probe.basis_n
    jx, jz = cached_operator(n, "Jx"), cached_operator(n, "Jz")
    spec = jx.spectral
    grid = np.pi * np.arange(n_coarse) / n_coarse
    v = _var(spec.expm_many(psi, grid), jz)
    if v.max() - v.min() < flat_tol:
        return ThetaOpt(0.0, float(_var(psi, jz)), True)
    k = int(np.argmax(v))
    step = grid[1]

    def neg(t):
        return -float(_var(spec.expm(psi, t), jz))

    res = minimize_scalar(neg, bracket=(grid[k] - step, grid[k], grid[k] + step), method="golden",
                          tol=1e-10)
    theta = float(res.x) % np.pi
    best = -res.fun
    if best < v[k]:
        theta, best = float(grid[k]), float(v[k])
    return ThetaOpt(theta, float(best), False)


def covariance_curve(n_atoms, times, picture="lab", pair=(0, 5)):
    """``F^ij(t)`` for the initial state along a trajectory (default ``F16``)."""
    psi0 = initial_state(enumerate_basis(n_atoms)).amplitudes
    states = cached_hamiltonian(n_atoms, picture).spectral.expm_many(psi0, times)
    i, j = pair
    ops = [cached_operator(n_atoms, lab) for lab in (("Jx", "Jy", "Jz", "Kx", "Ky", "Kz")[i],
                                                      ("Jx", "Jy", "Jz", "Kx", "Ky", "Kz")[j])]
    return qfim_trajectory(states, ops)[:, 0, 1]


@dataclass(frozen=True)
class TMax:
    n_atoms: int
    t_max: float
    cov_max: float
    on_boundary: bool


def find_t_max(n_atoms, times=None, picture="lab", window=(0.0, np.pi / 2)):
    """Time of the first maximum of ``4 cov(Jx, Kz)``.

    For even N the covariance curve is symmetric under ``t -> pi - t``, so
    the search is confined to ``window``; the grid maximum is refined by a
    parabola through the three bracketing points.
    """
    times = default_time_grid() if times is None else np.asarray(times, dtype=float)
    sel = (times > window[0]) & (times <= window[1] + 1e-12)
    t = times[sel]
    f = covariance_curve(n_atoms, t, picture)
    k = int(np.argmax(f))
    if k == 0 or k == len(t) - 1:
        return TMax(n_atoms, float(t[k]), float(f[k]), True)
    y0, y1, y2 = f[k - 1:k + 2]
    denom = y0 - 2 * y1 + y2
    shift = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
    dt = 0.5 * (t[k + 1] - t[k - 1])
    t_best = t[k] + shift * dt
    f_best = y1 - 0.25 * (y0 - y2) * shift
    return TMax(n_atoms, float(t_best), float(f_best), False)


def _points(points):
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("points must be (x, y) pairs")
    return arr[:, 0], arr[:, 1]


def polyfit_quadratic(points, n_min=4):
    """Least-squares ``a N^2 + b N + c`` over points with ``N >= n_min`` (QR solve)."""
    x, y = _points(points)
    keep = x >= n_min
    x, y = x[keep], y[keep]
    if len(x) < 4:
        raise ValueError(f"need at least 4 points with N >= {n_min}, got {len(x)}")
    A = np.column_stack([x ** 2, x, np.ones_like(x)])
    q, r = np.linalg.qr(A)
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-12 * diag.max():
        raise np.linalg.LinAlgError("rank-deficient design matrix")
    coef = np.linalg.solve(r, q.T @ y)
    resid = y - A @ coef
    dof = max(len(x) - 3, 1)
    rinv = np.linalg.inv(r)
    cov = rinv @ rinv.T * (resid @ resid / dof)
    se = np.sqrt(np.diag(cov))
    return FitResult("quadratic", {"a": float(coef[0]), "b": float(coef[1]), "c": float(coef[2])},
                     float(np.linalg.norm(resid)), (float(x.min()), float(x.max())),
                     {"a": float(se[0]), "b": float(se[1]), "c": float(se[2])})


def fit_power_law(points):
    """``y = A x^nu`` by linear regression of ``log y`` on ``log x``."""
    x, y = _points(points)
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    A = np.column_stack([lx, np.ones_like(lx)])
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ coef
    dof = max(len(x) - 2, 1)
    s2 = resid @ resid / dof
    cov = np.linalg.inv(A.T @ A) * s2
    se_nu, se_log = np.sqrt(np.diag(cov))
    pref = float(np.exp(coef[1]))
    return FitResult("power_law", {"exponent": float(coef[0]), "prefactor": pref},
                     float(np.linalg.norm(resid)), (float(x.min()), float(x.max())),
                     {"exponent": float(se_nu), "prefactor": pref * float(se_log),
                      "log_prefactor": float(se_log)})


def _gauss(p, x):
    amp, sigma, off = p
    return amp * np.exp(-x ** 2 / (2 * sigma ** 2)) + off


def fit_gaussian_offset(curve, peak_fraction=0.1, max_nfev=2000):
    """Fit ``amp exp(-phi^2 / (2 sigma^2)) + offset`` to the central peak.

    The offset is first estimated as the curve minimum; the fit uses the
    contiguous region around the maximum where the curve exceeds
    ``offset + peak_fraction * (peak - offset)``. Initial ``sigma`` comes
    from the second moment of that region. ``offset >= 0`` is enforced.
    """
    x, y = _points(curve)
    order = np.argsort(x)
    x, y = x[order], y[order]
    off0 = max(float(y.min()), 0.0)
    k = int(np.argmax(y))
    thresh = off0 + peak_fraction * (y[k] - off0)
    lo = k
    while lo > 0 and y[lo - 1] > thresh:
        lo -= 1
    hi = k
    while hi < len(y) - 1 and y[hi + 1] > thresh:
        hi += 1
    xs, ys = x[lo:hi + 1], y[lo:hi + 1]
    w = np.clip(ys - off0, 0, None)
    sigma0 = float(np.sqrt(np.sum(w * xs ** 2) / np.sum(w))) if w.sum() > 0 else float(np.ptp(xs) / 4)
    sigma0 = max(sigma0, 1e-6)
    moments = {"amplitude": float(y[k] - off0), "sigma": sigma0, "offset": off0}
    if len(xs) < 4:
        return FitResult("gaussian_offset", moments, float("nan"), (float(xs[0]), float(xs[-1])),
                         converged=False, message="too few points in peak region")
    res = least_squares(lambda p: _gauss(p, xs) - ys, x0=[y[k] - off0, sigma0, off0],
                        bounds=([0, 1e-9, 0], [np.inf, np.inf, np.inf]), max_nfev=max_nfev,
                        xtol=1e-15, ftol=1e-15, gtol=1e-15)
    if not res.success:
        return FitResult("gaussian_offset", moments, float(np.linalg.norm(res.fun)),
                         (float(xs[0]), float(xs[-1])), converged=False, message=res.message)
    amp, sigma, off = res.x
    return FitResult("gaussian_offset",
                     {"amplitude": float(amp), "sigma": float(abs(sigma)), "offset": float(off)},
                     float(np.linalg.norm(res.fun)), (float(xs[0]), float(xs[-1])),
                     message=res.message)
