"""Two-parameter Bayesian interferometry and the auxiliary time-reversal scheme."""
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .analysis import find_theta_opt, fit_gaussian_offset
from .dynamics import (StateVector, _amps, apply_commuting_rotations, apply_rotation,
                       cached_hamiltonian, cached_operator, evolve, initial_state)
from .fock_basis import enumerate_basis
from .metrology import (OutcomeDistribution, cfi_marginal, cfi_matrix, fidelity_bound_cfi,
                        joint_outcome_distribution, k_top_probability, qfim)
from .su4_algebra import OperatorMatrix

__all__ = [
    "SchemeConfig", "MeasurementRecord", "PosteriorGrid", "PosteriorStats", "LikelihoodModel",
    "PosteriorUnderflowError", "prepare_probe", "encode_signal", "sample_measurements",
    "make_rng", "cell_centers", "bayesian_update", "posterior_stats", "estimate_phases",
    "two_parameter_scheme", "run_seed", "auxiliary_scheme", "fidelity_curve", "reversed_hamiltonian",
]


class PosteriorUnderflowError(FloatingPointError):
    pass


@dataclass(frozen=True)
class SchemeConfig:
    n_atoms: int = 20
    scheme: str = "two_parameter"
    chi_tau: float = None
    phi3: float = np.pi / 16
    phi5: float = np.pi / 16
    phi1: float = 0.0
    n_measurements: int = 5000
    rng_seed: int = 1234
    grid_points: int = 201
    picture: str = "interaction"
    theta_opt: float = None
    n_seeds: int = 20
    refine_points: int = 101
    scan_points: int = 601
    scan_halfwidth: float = np.pi / 2
    branch: tuple = (1, 1)
    opt_offset: float = 1e-3

    def __post_init__(self):
        if self.scheme not in ("two_parameter", "auxiliary"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.n_atoms < 1:
            raise ValueError("n_atoms must be >= 1")
        if self.n_measurements < 1:
            raise ValueError("n_measurements must be >= 1")
        if self.n_seeds < 1:
            raise ValueError("n_seeds must be >= 1")
        if self.grid_points < 51:
            raise ValueError("grid_points must be >= 51")
        for name in ("phi3", "phi5", "phi1"):
            v = getattr(self, name)
            if not -np.pi <= v < np.pi:
                raise ValueError(f"{name}={v} outside the prior domain [-pi, pi)")

    @property
    def tau(self):
        if self.chi_tau is not None:
            return float(self.chi_tau)
        return np.pi / 4 if self.scheme == "two_parameter" else float(self.n_atoms) ** -0.4

    def to_dict(self):
        d = asdict(self)
        d["branch"] = list(self.branch)
        d["tau"] = self.tau
        return d


def prepare_probe(config, theta_opt=None):
    """Probe state and the rotation angle used.

    Two-parameter: twist for ``tau`` then rotate by ``theta_opt`` about Jx.
    Auxiliary: twist for ``tau`` only.
    """
    n = config.n_atoms
    psi = evolve(initial_state(enumerate_basis(n)), cached_hamiltonian(n, config.picture), config.tau)
    if config.scheme == "auxiliary":
        return psi, 0.0
    theta = theta_opt if theta_opt is not None else config.theta_opt
    if theta is None:
        theta = find_theta_opt(psi).theta
    return apply_rotation(psi, cached_operator(n, "Jx"), theta), float(theta)


def encode_signal(state, phi3, phi5):
    """``exp(-i phi3 Jz - i phi5 Ky) |state>``."""
    n = state.basis_n
    return apply_commuting_rotations(
        state, [(cached_operator(n, "Jz"), phi3), (cached_operator(n, "Ky"), phi5)])


@dataclass(frozen=True)
class MeasurementRecord:
    """Sampled outcomes; ``indices`` point into an ``OutcomeDistribution``'s flat order."""

    indices: np.ndarray
    outcomes: tuple
    seed: object

    def __len__(self):
        return len(self.indices)

    def counts(self, n_outcomes):
        return np.bincount(self.indices, minlength=n_outcomes)


def make_rng(seed, task_index=None):
    """Philox (counter-based, 64-bit) generator; ``task_index`` mixes in a sub-stream."""
    entropy = [int(seed)] if task_index is None else [int(seed), int(task_index)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def sample_measurements(dist, n_measurements, seed, task_index=None):
    """``n_measurements`` i.i.d. draws by inverse CDF over the flat outcome order."""
    p = dist.flat if isinstance(dist, OutcomeDistribution) else np.asarray(dist, dtype=float)
    if abs(p.sum() - 1) > 1e-9:
        raise ValueError(f"distribution sums to {p.sum()}")
    cdf = np.cumsum(p)
    cdf /= cdf[-1]
    rng = make_rng(seed, task_index)
    u = 1.0 - rng.random(n_measurements)  # u in (0, 1]
    idx = np.minimum(np.searchsorted(cdf, u, side="left"), len(p) - 1)
    if isinstance(dist, OutcomeDistribution):
        nk = len(dist.m_k)
        outs = tuple((float(dist.m_j[i // nk]), float(dist.m_k[i % nk])) for i in idx)
    else:
        outs = tuple(int(i) for i in idx)
    return MeasurementRecord(idx, outs, (seed, task_index))


class LikelihoodModel:
    """``P(outcome | phi3, phi5)`` for a fixed probe and the (Jx, Kz) measurement.

    ``distribution`` goes through the generic rotate-and-bin route;
    ``table`` evaluates a whole grid with batched eigenbasis projections.
    """

    def __init__(self, probe, pair=("Jx", "Kz")):
        self.probe = probe
        self.pair = pair
        self.n = n = probe.basis_n
        self.n_outcomes = (n + 1) ** 2
        self._jz = cached_operator(n, "Jz").matrix.diagonal().real
        self._ky = cached_operator(n, "Ky").spectral
        self._jx = cached_operator(n, "Jx").spectral
        kz = cached_operator(n, "Kz").matrix.diagonal().real
        _, ev, first = self._jx.coefficients(np.zeros(probe.amplitudes.shape, complex))
        ij = np.rint(ev + n / 2).astype(int)
        ik = np.rint(kz[first] + n / 2).astype(int)
        flat = ij * (n + 1) + ik
        self._agg = sp.csr_matrix((np.ones(len(flat)), (flat, np.arange(len(flat)))),
                                  shape=(self.n_outcomes, len(flat)))

    def distribution(self, phi3, phi5):
        return joint_outcome_distribution(encode_signal(self.probe, phi3, phi5), self.pair)

    def table(self, phi3_grid, phi5_grid, outcomes=None):
        """Array ``(n_sel, len(phi3_grid), len(phi5_grid))`` of probabilities."""
        phi3_grid = np.atleast_1d(np.asarray(phi3_grid, dtype=float))
        phi5_grid = np.atleast_1d(np.asarray(phi5_grid, dtype=float))
        sel = np.arange(self.n_outcomes) if outcomes is None else np.asarray(outcomes)
        agg = self._agg[sel]
        psi5 = self._ky.expm_many(self.probe.amplitudes, phi5_grid)
        out = np.empty((len(sel), len(phi3_grid), len(phi5_grid)))
        for a, p3 in enumerate(phi3_grid):
            x = np.exp(-1j * p3 * self._jz)[:, None] * psi5
            c, _, _ = self._jx.coefficients(x)
            out[:, a, :] = agg @ (c.real ** 2 + c.imag ** 2)
        return np.clip(out, 0.0, None)


def cell_centers(lo, hi, n):
    """Midpoint-rule nodes of ``n`` equal cells on ``[lo, hi)``."""
    h = (hi - lo) / n
    return lo + h * (np.arange(n) + 0.5)


@dataclass
class PosteriorGrid:
    phi3: np.ndarray
    phi5: np.ndarray
    density: np.ndarray
    log_norm: float
    bounds: tuple

    @property
    def cell_area(self):
        return (self.phi3[1] - self.phi3[0]) * (self.phi5[1] - self.phi5[0])

    def integral(self):
        return float(self.density.sum() * self.cell_area)

    def mode(self):
        i, j = np.unravel_index(np.argmax(self.density), self.density.shape)
        return float(self.phi3[i]), float(self.phi5[j])


def _log_table(likelihood, record, phi3, phi5):
    uniq, inverse = np.unique(record.indices, return_inverse=True)
    if isinstance(likelihood, LikelihoodModel):
        tab = likelihood.table(phi3, phi5, uniq)
    else:
        tab = np.asarray(likelihood(phi3, phi5, uniq))
    with np.errstate(divide="ignore"):
        return np.log(tab), inverse


def bayesian_update(record, likelihood, phi3, phi5, bounds=(-np.pi, np.pi, -np.pi, np.pi)):
    """Sequential Bayes updates from a flat prior, accumulated in log space.

    ``likelihood`` is a ``LikelihoodModel`` or a callable
    ``(phi3_grid, phi5_grid, outcome_indices) -> table``.
    """
    phi3, phi5 = np.asarray(phi3, float), np.asarray(phi5, float)
    logpost = np.zeros((len(phi3), len(phi5)))
    if len(record):
        logl, inverse = _log_table(likelihood, record, phi3, phi5)
        for k in inverse:
            logpost += logl[k]
            top = logpost.max()
            if not np.isfinite(top):
                raise PosteriorUnderflowError(
                    "posterior vanished on the whole grid; accumulate in log space on a wider grid")
            logpost -= top
    dens = np.exp(logpost)
    area = (phi3[1] - phi3[0]) * (phi5[1] - phi5[0])
    z = dens.sum() * area
    return PosteriorGrid(phi3, phi5, dens / z, float(np.log(z)), tuple(bounds))


@dataclass(frozen=True)
class PosteriorStats:
    mean3: float
    mean5: float
    sigma3: float
    sigma5: float
    covariance: np.ndarray


def posterior_stats(post):
    """Marginal means, standard deviations and covariance by the midpoint rule."""
    w = post.density * post.cell_area
    w = w / w.sum()
    p3, p5 = w.sum(axis=1), w.sum(axis=0)
    m3, m5 = float(p3 @ post.phi3), float(p5 @ post.phi5)
    d3, d5 = post.phi3 - m3, post.phi5 - m5
    v3, v5 = float(p3 @ d3 ** 2), float(p5 @ d5 ** 2)
    c35 = float(d3 @ w @ d5)
    return PosteriorStats(m3, m5, np.sqrt(v3), np.sqrt(v5), np.array([[v3, c35], [c35, v5]]))


@dataclass
class PhaseEstimate:
    stats: PosteriorStats
    global_posterior: PosteriorGrid
    posterior: PosteriorGrid
    sign_ambiguous: tuple
    stages: int
    mode: tuple


def _restrict(post, keep3, keep5):
    dens = post.density[np.ix_(keep3, keep5)]
    return PosteriorGrid(post.phi3[keep3], post.phi5[keep5], dens / (dens.sum() * post.cell_area),
                         post.log_norm, post.bounds)


def estimate_phases(record, model, grid_points=201, refine_points=101, branch=(1, 1),
                    refine_stages=2, window_sigmas=10.0, zoom_cells=4.0):
    """Posterior on the full ``[-pi, pi)^2`` grid, then zoomed onto its mode.

    The measurement cannot tell ``phi -> -phi`` apart when the likelihood is
    mirror symmetric in that phase; such axes are flagged and the estimate
    is taken on the ``branch`` side. Zooming happens only when the posterior
    on that side is narrower than ``zoom_cells`` coarse cells; each stage is a
    flat prior over a window around the previous estimate, with the
    likelihood recomputed exactly on the finer nodes. A broad posterior is
    reported from the global grid as is.
    """
    g = cell_centers(-np.pi, np.pi, grid_points)
    post = bayesian_update(record, model, g, g)
    uniq = np.unique(record.indices)
    tab = model.table(g, g, uniq) if isinstance(model, LikelihoodModel) else model(g, g, uniq)
    amb3 = bool(np.max(np.abs(tab - tab[:, ::-1, :])) < 1e-10)
    amb5 = bool(np.max(np.abs(tab - tab[:, :, ::-1])) < 1e-10)
    keep3 = np.sign(g) == branch[0] if amb3 else np.ones(len(g), bool)
    keep5 = np.sign(g) == branch[1] if amb5 else np.ones(len(g), bool)
    side = _restrict(post, keep3, keep5)
    st = posterior_stats(side)
    h = g[1] - g[0]
    if refine_stages == 0 or max(st.sigma3, st.sigma5) > zoom_cells * h:
        return PhaseEstimate(posterior_stats(post), post, post, (amb3, amb5), 0, post.mode())
    c3, c5 = side.mode()
    w3 = w5 = zoom_cells * h
    current = post
    for _ in range(refine_stages):
        b = (c3 - w3, c3 + w3, c5 - w5, c5 + w5)
        f3 = cell_centers(b[0], b[1], refine_points)
        f5 = cell_centers(b[2], b[3], refine_points)
        current = bayesian_update(record, model, f3, f5, b)
        st = posterior_stats(current)
        c3, c5 = st.mean3, st.mean5
        w3 = max(window_sigmas * st.sigma3, 4 * (f3[1] - f3[0]))
        w5 = max(window_sigmas * st.sigma5, 4 * (f5[1] - f5[0]))
    return PhaseEstimate(st, post, current, (amb3, amb5), refine_stages, current.mode())


@dataclass
class TwoParamResult:
    config: dict
    theta_opt: float
    qfim_diag: dict
    cfi: dict
    cfi_joint: list
    cfi_effective: dict
    cfi_optimal: dict
    sigmas: list
    means: list
    modes: list
    inv_m_sigma2: dict
    sign_ambiguous: list
    seeds: list = field(default_factory=list)

    def ratios(self):
        out = {}
        for key, lab in (("phi3", "Jz"), ("phi5", "Ky")):
            out[f"cfi/qfim_{lab}"] = self.cfi[lab] / self.qfim_diag[lab]
            out[f"bayes/cfi_{lab}"] = self.inv_m_sigma2[key] / self.cfi[lab]
            out[f"bayes/cfi_effective_{lab}"] = self.inv_m_sigma2[key] / self.cfi_effective[lab]
            out[f"bayes/qfim_{lab}"] = self.inv_m_sigma2[key] / self.qfim_diag[lab]
            out[f"optimal/qfim_{lab}"] = self.cfi_optimal[lab] / self.qfim_diag[lab]
        return out

    def to_dict(self):
        d = asdict(self)
        d["ratios"] = self.ratios()
        return d


@lru_cache(maxsize=4)
def _scheme_model(config):
    probe, theta = prepare_probe(config)
    model = LikelihoodModel(probe)
    return probe, theta, model, model.distribution(config.phi3, config.phi5)


def run_seed(config, task_index):
    """Sample one measurement log and estimate the phases from it."""
    _, _, model, true_dist = _scheme_model(config)
    rec = sample_measurements(true_dist, config.n_measurements, config.rng_seed, task_index)
    return estimate_phases(rec, model, config.grid_points, config.refine_points, config.branch)


def _seed_task(args):
    est = run_seed(*args)
    return est.stats, est.sign_ambiguous, est.mode


def two_parameter_scheme(config, n_seeds=None, progress=None, map_fn=map):
    """Full scheme-a pipeline: probe, CFI/QFIM, sampling and Bayesian estimation per seed.

    ``map_fn`` must preserve input order (``map`` or ``Executor.map``).
    """
    n_seeds = config.n_seeds if n_seeds is None else n_seeds
    probe, theta, model, _ = _scheme_model(config)
    p3, p5 = config.phi3, config.phi5
    q = qfim(probe)
    qd = {"Jz": q.F(3, 3), "Ky": q.F(5, 5)}
    cfi = {"Jz": cfi_marginal(lambda a: model.distribution(a, p5), p3, "J").value,
           "Ky": cfi_marginal(lambda b: model.distribution(p3, b), p5, "K").value}
    joint = cfi_matrix(lambda a, b: model.distribution(a, b), [p3, p5])
    # At exactly the true phases the rotated-measurement statistics are even in
    # the phase shift, so the axes are set a small offset away from them.
    a3, a5 = p3 - config.opt_offset, p5 - config.opt_offset
    opt_pair = (("J", (np.cos(a3), np.sin(a3), 0.0)), ("K", (np.sin(a5), 0.0, np.cos(a5))))

    def opt_dist(a, b):
        return joint_outcome_distribution(encode_signal(probe, a, b), opt_pair)

    cfi_opt = {"Jz": cfi_marginal(lambda a: opt_dist(a, p5), p3, "J").value,
               "Ky": cfi_marginal(lambda b: opt_dist(p3, b), p5, "K").value}
    inv_joint = np.linalg.inv(np.asarray(joint))
    cfi_eff = {"Jz": float(1 / inv_joint[0, 0]), "Ky": float(1 / inv_joint[1, 1])}
    sigmas, means, modes, amb = [], [], [], []
    for k, (st, flags, mode) in enumerate(map_fn(_seed_task, [(config, k) for k in range(n_seeds)])):
        sigmas.append([st.sigma3, st.sigma5])
        means.append([st.mean3, st.mean5])
        modes.append(list(mode))
        amb.append(list(flags))
        if progress:
            progress(k, st)
    m = config.n_measurements
    s = np.array(sigmas)
    inv = 1.0 / (m * s ** 2)
    return TwoParamResult(config.to_dict(), theta, qd, cfi, np.asarray(joint).tolist(), cfi_eff, cfi_opt,
                          sigmas, means, modes,
                          {"phi3": float(inv[:, 0].mean()), "phi5": float(inv[:, 1].mean()),
                           "phi3_std": float(inv[:, 0].std()), "phi5_std": float(inv[:, 1].std())},
                          amb, list(range(n_seeds)))


def reversed_hamiltonian(h):
    """``-H``: the twisting run backwards by flipping the sign of chi."""
    return OperatorMatrix(h.basis_n, "custom", -h.matrix)


def fidelity_curve(config, phis):
    """``p_{N/2}(phi1)`` after twist, ``exp(-i phi1 Jx)``, and reversed twist."""
    n = config.n_atoms
    h = cached_hamiltonian(n, config.picture)
    back = _reversed(n, config.picture)
    psi = evolve(initial_state(enumerate_basis(n)), h, config.tau).amplitudes
    cols = cached_operator(n, "Jx").spectral.expm_many(psi, phis)
    cols = back.spectral.apply(cols, lambda ev: np.exp(-1j * config.tau * ev)[..., None])
    occ = enumerate_basis(n).occupations
    mask = (occ[:, 1] == 0) & (occ[:, 2] == 0)
    return np.sum(np.abs(cols[mask]) ** 2, axis=0)


_REVERSED = {}


def _reversed(n, picture):
    key = (n, picture)
    if key not in _REVERSED:
        _REVERSED[key] = reversed_hamiltonian(cached_hamiltonian(n, picture))
    return _REVERSED[key]


@dataclass
class AuxiliaryResult:
    config: dict
    phi1: np.ndarray
    p_top: np.ndarray
    fit: object
    sigma_fid: float
    inv_sigma2: float
    qfim_jx: float
    bound: object
    asymmetry: float

    @property
    def ratio(self):
        return self.inv_sigma2 / self.qfim_jx

    @property
    def bound_ratio(self):
        return self.bound.value / self.qfim_jx

    def summary(self):
        return {"center": 0.0, "sigma_Fid": self.sigma_fid, "inv_sigma2": self.inv_sigma2,
                "offset": self.fit.coefficients["offset"],
                "amplitude": self.fit.coefficients["amplitude"],
                "fit_residual": self.fit.residual_norm, "fit_converged": self.fit.converged,
                "qfim_Jx": self.qfim_jx, "ratio_inv_sigma2_to_qfim": self.ratio,
                "binary_cfi_bound": self.bound.value, "binary_cfi_phi": self.bound.phi,
                "binary_cfi_ratio": self.bound_ratio, "scan_asymmetry": self.asymmetry,
                "config": self.config}


def auxiliary_scheme(config):
    """Scheme b: phi1 scan of the Kz = N/2 probability, Gaussian fit and CFI bound."""
    if config.scheme != "auxiliary":
        config = replace(config, scheme="auxiliary")
    n = config.n_atoms
    phis = np.linspace(-config.scan_halfwidth, config.scan_halfwidth, config.scan_points)
    p = fidelity_curve(config, phis)
    fit = fit_gaussian_offset(np.column_stack([phis, p]))
    sigma = fit.coefficients["sigma"]
    probe, _ = prepare_probe(config)
    fjx = qfim(probe).F(1, 1)
    bound = fidelity_bound_cfi(lambda ph: float(fidelity_curve(config, np.array([ph]))[0]),
                               config.phi1)
    asym = float(np.max(np.abs(p - p[::-1])))
    return AuxiliaryResult(config.to_dict(), phis, p, fit, sigma, 1 / sigma ** 2, fjx, bound, asym)
