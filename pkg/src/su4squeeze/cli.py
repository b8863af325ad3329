"""Command-line front end: verification suite, sweeps and the two interferometry schemes.

Every command reads an optional JSON config, lets flags and ``--override KEY=VAL``
pairs replace its fields, and writes schema-tagged CSV/JSON plus a manifest into
``--out``. Exit codes: 0 success, 1 invariant failure, 2 config error, 3 numerical
failure.
"""
import argparse
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import __version__
from .analysis import default_time_grid, find_t_max, fit_power_law, polyfit_quadratic
from .dynamics import (KrylovConvergenceError, NonHermitianError, cached_hamiltonian,
                       cached_operator, initial_state)
from .fock_basis import dump_basis, enumerate_basis
from .interferometry import (PosteriorUnderflowError, SchemeConfig, auxiliary_scheme,
                             _scheme_model, sample_measurements, two_parameter_scheme)
from .metrology import GENERATOR_LABELS, QfimResult, entanglement_witness, qfim, qfim_trajectory
from .su4_algebra import TOL_ALG, collective_operator, verify_algebra

log = logging.getLogger("su4squeeze")

SCHEMA_VERSION = 1
EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3
N_WARN = 50
VERIFY_NS = (2, 3, 4, 6, 8)
DEFAULT_TOLERANCES = {
    "algebra": TOL_ALG,
    "conservation": 1e-8,
    "revival": 0.999,
    "psd": 1e-9,
    "qfim": 1e-8,
}
FAULTS = ("km-sign",)
NUMERICAL_ERRORS = (KrylovConvergenceError, PosteriorUnderflowError, NonHermitianError,
                    FloatingPointError, np.linalg.LinAlgError)

_DIAG = [(i, i) for i in range(6)]
_ANTI = [(0, 5), (1, 4), (2, 3)]
QFIM_PAIRS = _DIAG + _ANTI + [(i, j) for i in range(6) for j in range(i + 1, 6)
                              if (i, j) not in _ANTI]
QFIM_COLUMNS = [f"F{i + 1}{j + 1}" for i, j in QFIM_PAIRS]


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    n_atoms: int = 20
    n_range: list = None
    time_points: int = 400
    picture: str = None
    scheme: dict = field(default_factory=dict)
    rng_seed: int = 1234
    out: str = None
    jobs: int = 1
    tolerances: dict = field(default_factory=dict)
    inject_fault: str = None

    def tol(self, key):
        return float(self.tolerances.get(key, DEFAULT_TOLERANCES[key]))

    def canonical(self):
        return json.dumps(asdict(self), sort_keys=True, default=_jsonable)

    def digest(self):
        """Hash of the fields that determine results (not ``out`` or ``jobs``)."""
        d = {k: v for k, v in asdict(self).items() if k not in ("out", "jobs")}
        text = json.dumps(d, sort_keys=True, default=_jsonable)
        return hashlib.sha256(text.encode()).hexdigest()

    def ns(self, default):
        return list(self.n_range) if self.n_range else list(default)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(f"not serializable: {type(x).__name__}")


def parse_n_range(text):
    """``"4:30"``, ``"4:30:2"`` (inclusive) or ``"4,6,8"``."""
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            if len(parts) not in (2, 3):
                raise ValueError
            step = parts[2] if len(parts) == 3 else 1
            if step < 1:
                raise ValueError
            return list(range(parts[0], parts[1] + 1, step))
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"bad N range {text!r}") from None


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(data, item):
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not KEY=VAL")
    key, val = item.split("=", 1)
    path = key.strip().split(".")
    top = {f.name for f in fields(RunConfig)}
    if path[0] not in top or path[0] == "command":
        raise ConfigError(f"unknown config key {path[0]!r}")
    if len(path) == 1:
        data[path[0]] = _parse_value(val)
    elif len(path) == 2 and path[0] in ("scheme", "tolerances"):
        data.setdefault(path[0], {})[path[1]] = _parse_value(val)
    else:
        raise ConfigError(f"unsupported override key {key!r}")


def load_config(args):
    data = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(data) - {f.name for f in fields(RunConfig)}
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
    flags = {"n": "n_atoms", "time_points": "time_points", "picture": "picture",
             "seed": "rng_seed", "out": "out", "jobs": "jobs", "inject_fault": "inject_fault"}
    for flag, key in flags.items():
        v = getattr(args, flag, None)
        if v is not None:
            data[key] = v
    if getattr(args, "n_range", None):
        data["n_range"] = parse_n_range(args.n_range)
    for item in args.override or []:
        apply_override(data, item)
    data.pop("command", None)
    cfg = RunConfig(command=args.command, **data)
    validate(cfg)
    return cfg


def validate(cfg):
    ints = {"n_atoms": cfg.n_atoms, "time_points": cfg.time_points, "jobs": cfg.jobs,
            "rng_seed": cfg.rng_seed}
    for k, v in ints.items():
        if not isinstance(v, (int, np.integer)) or isinstance(v, bool):
            raise ConfigError(f"{k} must be an integer")
    if cfg.n_atoms < 1:
        raise ConfigError("n_atoms must be >= 1")
    if cfg.time_points < 3:
        raise ConfigError("time_points must be >= 3")
    if cfg.jobs < 1:
        raise ConfigError("jobs must be >= 1")
    if not 0 <= cfg.rng_seed < 2 ** 64:
        raise ConfigError("rng_seed must fit in 64 bits")
    if cfg.picture not in (None, "lab", "interaction"):
        raise ConfigError(f"picture must be lab or interaction, got {cfg.picture!r}")
    if cfg.inject_fault not in (None,) + FAULTS:
        raise ConfigError(f"unknown fault {cfg.inject_fault!r}")
    if not isinstance(cfg.scheme, dict) or not isinstance(cfg.tolerances, dict):
        raise ConfigError("scheme and tolerances must be objects")
    unknown = set(cfg.tolerances) - set(DEFAULT_TOLERANCES)
    if unknown:
        raise ConfigError(f"unknown tolerances {sorted(unknown)}")
    if cfg.n_range is not None:
        if not cfg.n_range or any(not isinstance(n, int) or n < 1 for n in cfg.n_range):
            raise ConfigError("n_range must list positive integers")
    for n in cfg.ns([cfg.n_atoms]):
        if n > N_WARN:
            log.warning("N=%d exceeds %d; expect long runtimes and large memory", n, N_WARN)
    if cfg.out:
        try:
            os.makedirs(cfg.out, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory: {exc}") from None
        if not os.access(cfg.out, os.W_OK):
            raise ConfigError(f"output directory {cfg.out} is not writable")


def scheme_config(cfg, scheme, n_atoms=None):
    opts = dict(cfg.scheme)
    if "branch" in opts:
        opts["branch"] = tuple(opts["branch"])
    opts.setdefault("picture", cfg.picture or "interaction")
    try:
        return SchemeConfig(n_atoms=n_atoms or cfg.n_atoms, scheme=scheme,
                            rng_seed=cfg.rng_seed, **opts)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid scheme parameters: {exc}") from None


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path, kind, columns, rows):
    with open(path, "w") as fh:
        fh.write(f"# schema=su4squeeze.{kind}/v{SCHEMA_VERSION}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
            fh.flush()


def write_json(path, obj):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")
    os.replace(tmp, path)


class Manifest:
    """``manifest.json`` describing a run; rewritten whenever its status changes."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.files = []
        self.path = os.path.join(cfg.out, "manifest.json") if cfg.out else None

    def out(self, name):
        self.files.append(name)
        return os.path.join(self.cfg.out, name)

    def write(self, status, **extra):
        if not self.path:
            return
        write_json(self.path, {"schema": f"su4squeeze.manifest/v{SCHEMA_VERSION}",
                               "command": self.cfg.command, "version": __version__,
                               "config": json.loads(self.cfg.canonical()),
                               "config_hash": self.cfg.digest(), "status": status,
                               "files": list(self.files), **extra})


def ordered_map(fn, items, jobs):
    """``map`` in input order; a process pool when ``jobs > 1``."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        yield from map(fn, items)
        return
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as ex:
        yield from ex.map(fn, items)


# verify ---------------------------------------------------------------------

def _expect_cols(op, cols):
    a = op.matrix @ cols
    return np.einsum("i...,i...->...", cols.conj(), a).real


def _verify_n(n, cfg):
    basis = enumerate_basis(n)
    checks = []
    overrides = None
    if cfg.inject_fault == "km-sign":
        overrides = {"Km": -1 * collective_operator(basis, "Km")}
    alg = verify_algebra(basis, overrides, cfg.tol("algebra"))
    for name, r in alg["residuals"].items():
        checks.append((f"algebra {name}", r, cfg.tol("algebra"), r <= cfg.tol("algebra")))
    psi0 = initial_state(basis).amplitudes
    times = default_time_grid(min(cfg.time_points, 64))
    ops = [cached_operator(n, lab) for lab in GENERATOR_LABELS]
    for picture in ("lab", "interaction"):
        h = cached_hamiltonian(n, picture)
        cols = h.spectral.expm_many(psi0, times)
        tol = cfg.tol("conservation")
        for lab, op in (("Jz", ops[2]), ("Kx", ops[3]), ("H", h)):
            v = _expect_cols(op, cols)
            drift = float(np.max(np.abs(v - _expect_cols(op, psi0[:, None])[0])))
            checks.append((f"conservation <{lab}> {picture}", drift, tol, drift < tol))
        drift = float(np.max(np.abs(np.linalg.norm(cols, axis=0) - 1)))
        checks.append((f"conservation norm {picture}", drift, tol, drift < tol))
        if picture == "lab":
            fs = qfim_trajectory(cols, ops)
            asym = float(np.max(np.abs(fs - np.transpose(fs, (0, 2, 1)))))
            checks.append(("qfim symmetric", asym, cfg.tol("qfim"), asym < cfg.tol("qfim")))
            low = float(min(np.linalg.eigvalsh(f).min() for f in fs))
            checks.append(("qfim psd (min eigenvalue)", low, -cfg.tol("psd"),
                           low >= -cfg.tol("psd")))
            q0 = qfim(initial_state(basis)).matrix
            for k, lab in ((2, "F33"), (3, "F44")):
                d = float(np.max(np.abs(fs[:, k, k] - q0[k, k])))
                checks.append((f"qfim {lab} conserved", d, cfg.tol("qfim"), d < cfg.tol("qfim")))
    if n % 2 == 0:
        h = cached_hamiltonian(n, "lab")
        fid = float(abs(np.vdot(psi0, h.spectral.expm(psi0, np.pi))) ** 2)
        checks.append(("revival fidelity at pi", fid, cfg.tol("revival"), fid > cfg.tol("revival")))
    q0 = qfim(initial_state(basis)).matrix
    target = np.diag([0.0, n, 0.0, 0.0, n, 0.0])
    target[2, 2] = q0[2, 2]
    target[3, 3] = q0[3, 3]
    d = float(np.max(np.abs(q0 - target)))
    checks.append(("qfim initial state", d, cfg.tol("qfim"), d < cfg.tol("qfim")))
    w = entanglement_witness(qfim(initial_state(basis)))
    checks.append(("witness off for product state", float(w.any_entangled), 0.0,
                   not w.any_entangled and not any(w.diagonal.values())))
    return [(name, n, r, tol, bool(ok)) for name, r, tol, ok in checks]


def cmd_verify(cfg):
    ns = cfg.ns(VERIFY_NS)
    rows = []
    for part in ordered_map(_verify_task, [(n, cfg) for n in ns], cfg.jobs):
        rows.extend(part)
    worst = {}
    for name, n, r, tol, ok in rows:
        prev = worst.get(name)
        if prev is None or (prev[3], -abs(prev[1])) > (ok, -abs(r)):
            worst[name] = (name, r, tol, ok, n)
    passed = all(r[4] for r in rows)
    width = max(len(k) for k in worst)
    print(f"{'check':<{width}}  {'worst':>12}  {'tol':>9}  N   status")
    for name, r, tol, ok, n in worst.values():
        print(f"{name:<{width}}  {r:12.3e}  {tol:9.2e}  {n:<3} {'PASS' if ok else 'FAIL'}")
    print(f"verify: {'PASS' if passed else 'FAIL'} ({sum(r[4] for r in rows)}/{len(rows)} checks, N={ns})")
    if cfg.out:
        m = Manifest(cfg)
        write_json(m.out("verify.json"), {
            "schema": f"su4squeeze.verify/v{SCHEMA_VERSION}", "passed": passed,
            "checks": [{"check": a, "N": b, "residual": c, "tol": d, "passed": e}
                       for a, b, c, d, e in rows]})
        m.write("complete", passed=passed)
    return EXIT_OK if passed else EXIT_INVARIANT


def _verify_task(args):
    return _verify_n(*args)


# qfim sweep -------------------------------------------------------------------

def _qfim_at(n, picture, t):
    psi0 = initial_state(enumerate_basis(n)).amplitudes
    col = cached_hamiltonian(n, picture).spectral.expm(psi0, t)
    ops = [cached_operator(n, lab) for lab in GENERATOR_LABELS]
    return qfim_trajectory(col[:, None], ops)[0]


def _sweep_task(args):
    n, picture, times = args
    psi0 = initial_state(enumerate_basis(n)).amplitudes
    cols = cached_hamiltonian(n, picture).spectral.expm_many(psi0, times)
    fs = qfim_trajectory(cols, [cached_operator(n, lab) for lab in GENERATOR_LABELS])
    f_q = _qfim_at(n, picture, np.pi / 4)
    f_s = _qfim_at(n, picture, n ** -0.4)
    w_q = entanglement_witness(QfimResult(n, np.pi / 4, f_q))
    w_s = entanglement_witness(QfimResult(n, n ** -0.4, f_s))
    tm = find_t_max(n, times, picture)
    summary = {
        "N": n,
        "plateau_pi_4": {lab: float(f_q[k, k] / n ** 2) for k, lab in enumerate(GENERATOR_LABELS)},
        "qfim_pi_4": {c: float(f_q[i, j]) for c, (i, j) in zip(QFIM_COLUMNS, QFIM_PAIRS)},
        "diagonal_witness_pi_4": w_q.diagonal,
        "F16_pi_4": float(f_q[0, 5]),
        "F16_n_pow": float(f_s[0, 5]),
        "offdiag_witness_n_pow": {f"{a}-{b}": v for (a, b), v in w_s.off_diagonal.items()},
        "t_max": asdict(tm),
    }
    return fs, summary


def cmd_qfim_sweep(cfg):
    picture = cfg.picture or "lab"
    ns = cfg.ns([cfg.n_atoms])
    times = default_time_grid(cfg.time_points)
    m = Manifest(cfg)
    csv_path = m.out("qfim_sweep.csv") if cfg.out else None
    summaries, curves = [], {}
    fh = open(csv_path, "w") if csv_path else sys.stdout
    status = "partial"
    try:
        fh.write(f"# schema=su4squeeze.qfim_sweep/v{SCHEMA_VERSION}\n")
        fh.write(",".join(["N", "chi_t"] + QFIM_COLUMNS) + "\n")
        m.write("running", completed_n=[])
        for fs, summ in ordered_map(_sweep_task, [(n, picture, times) for n in ns], cfg.jobs):
            n = summ["N"]
            for t, f in zip(times, fs):
                fh.write(",".join([fmt(n), fmt(t)] + [fmt(f[i, j]) for i, j in QFIM_PAIRS]) + "\n")
            fh.flush()
            summaries.append(summ)
            curves[n] = np.array([fs[:, k, k] / n ** 2 for k in range(6)])
            m.write("running", completed_n=[s["N"] for s in summaries])
        status = "complete"
    finally:
        if csv_path:
            fh.close()
        m.write(status, completed_n=[s["N"] for s in summaries])
    report = {"schema": f"su4squeeze.qfim_summary/v{SCHEMA_VERSION}", "picture": picture,
              "per_n": summaries}
    if len(ns) >= 2:
        report["curve_distance"] = [
            {"N_pair": [a, b], "sup_norm": float(np.max(np.abs(curves[a] - curves[b])))}
            for a, b in zip(ns, ns[1:])]
    if len(ns) >= 4:
        report["fits"] = {
            key: asdict(polyfit_quadratic([(s["N"], s["qfim_pi_4"][key]) for s in summaries]))
            for key in ("F11", "F66", "F16")}
    if cfg.out:
        write_json(m.out("qfim_summary.json"), report)
        m.write(status, completed_n=[s["N"] for s in summaries])
    else:
        print(json.dumps(report, indent=2, default=_jsonable))
    return EXIT_OK


# schemes ------------------------------------------------------------------------

def cmd_two_param(cfg):
    sc = scheme_config(cfg, "two_parameter")
    m = Manifest(cfg)
    m.write("running")

    def progress(k, st):
        log.info("seed %d: sigma3=%.4g sigma5=%.4g", k, st.sigma3, st.sigma5)

    res = two_parameter_scheme(sc, progress=progress,
                               map_fn=lambda fn, it: ordered_map(fn, it, cfg.jobs))
    _, _, _, dist = _scheme_model(sc)
    rec = sample_measurements(dist, sc.n_measurements, sc.rng_seed, 0)
    counts = rec.counts(len(dist.flat))
    top = np.argsort(-counts, kind="stable")[:5]
    nk = len(dist.m_k)
    report = res.to_dict()
    report["schema"] = f"su4squeeze.two_param/v{SCHEMA_VERSION}"
    report["measurement_log_seed0"] = {
        "M": len(rec), "distinct_outcomes": int(np.count_nonzero(counts)),
        "most_frequent": [{"m_J": float(dist.m_j[i // nk]), "m_K": float(dist.m_k[i % nk]),
                           "count": int(counts[i])} for i in top]}
    s = np.array(res.sigmas)
    report["posterior"] = {"sigma_J_mean": float(s[:, 0].mean()), "sigma_K_mean": float(s[:, 1].mean())}
    text = json.dumps(report, indent=2, sort_keys=True, default=_jsonable)
    if cfg.out:
        write_json(m.out("two_param.json"), report)
        m.write("complete")
    print(text)
    return EXIT_OK


def _aux_task(sc):
    return auxiliary_scheme(sc)


def cmd_auxiliary(cfg):
    ns = cfg.ns([cfg.n_atoms])
    configs = [scheme_config(cfg, "auxiliary", n) for n in ns]
    m = Manifest(cfg)
    m.write("running")
    summaries = []
    for sc, res in zip(configs, ordered_map(_aux_task, configs, cfg.jobs)):
        summ = res.summary()
        summ["N"] = sc.n_atoms
        if not res.fit.converged:
            log.warning("N=%d: Gaussian fit did not converge (%s)", sc.n_atoms, res.fit.message)
        summaries.append(summ)
        rows = list(zip(res.phi1, res.p_top))
        if cfg.out:
            write_csv(m.out(f"auxiliary_N{sc.n_atoms}.csv"), "auxiliary_scan", ["phi1", "p_top"], rows)
        m.write("running")
    report = {"schema": f"su4squeeze.auxiliary/v{SCHEMA_VERSION}", "per_n": summaries}
    if len(ns) >= 4:
        report["inv_sigma2_fit"] = asdict(polyfit_quadratic(
            [(s["N"], s["inv_sigma2"]) for s in summaries]))
        report["qfim_Jx_fit"] = asdict(polyfit_quadratic([(s["N"], s["qfim_Jx"]) for s in summaries]))
    if cfg.out:
        write_json(m.out("auxiliary.json"), report)
        m.write("complete")
    print(json.dumps(report, indent=2, sort_keys=True, default=_jsonable))
    return EXIT_OK


# scaling ----------------------------------------------------------------------------

SCALING_COLUMNS = ["N", "F11_pi_4", "F66_pi_4", "F16_pi_4", "F11_n_pow", "F16_n_pow", "t_max"]


def _scaling_task(args):
    n, picture, time_points = args
    fq = _qfim_at(n, picture, np.pi / 4)
    fs = _qfim_at(n, picture, n ** -0.4)
    tm = find_t_max(n, default_time_grid(time_points), picture)
    return [n, fq[0, 0], fq[5, 5], fq[0, 5], fs[0, 0], fs[0, 5], tm.t_max]


def scaling_fits(rows):
    arr = np.asarray(rows, dtype=float)
    n = arr[:, 0]
    big = n >= 6
    fits = {
        "F11_pi_4_quadratic": polyfit_quadratic(arr[:, [0, 1]]),
        "F66_pi_4_quadratic": polyfit_quadratic(arr[:, [0, 2]]),
        "F16_pi_4_quadratic": polyfit_quadratic(arr[:, [0, 3]]),
        "F11_pi_4_power": fit_power_law(arr[:, [0, 1]]),
        "F66_pi_4_power": fit_power_law(arr[:, [0, 2]]),
        "F11_n_pow_quadratic": polyfit_quadratic(arr[big][:, [0, 4]]),
        "F16_n_pow_quadratic": polyfit_quadratic(arr[big][:, [0, 5]]),
        "t_max_power": fit_power_law(arr[big][:, [0, 6]]),
    }
    return fits


def cmd_scaling(cfg):
    picture = cfg.picture or "lab"
    ns = cfg.ns(range(4, 31, 2))
    if len(ns) < 6 or min(ns) < 4:
        raise ConfigError("scaling needs at least 6 values of N, all >= 4")
    m = Manifest(cfg)
    m.write("running")
    rows = list(ordered_map(_scaling_task, [(n, picture, cfg.time_points) for n in ns], cfg.jobs))
    fits = scaling_fits(rows)
    report = {"schema": f"su4squeeze.scaling/v{SCHEMA_VERSION}", "picture": picture,
              "fits": {k: asdict(v) for k, v in fits.items()}}
    if cfg.out:
        write_csv(m.out("scaling_points.csv"), "scaling_points", SCALING_COLUMNS, rows)
        write_json(m.out("scaling.json"), report)
        m.write("complete")
    print(json.dumps(report, indent=2, sort_keys=True, default=_jsonable))
    return EXIT_OK


def cmd_basis_dump(cfg):
    text = "\n".join(["index,alpha,beta,gamma,delta"] + dump_basis(enumerate_basis(cfg.n_atoms)))
    if cfg.out:
        m = Manifest(cfg)
        with open(m.out(f"basis_N{cfg.n_atoms}.csv"), "w") as fh:
            fh.write(text + "\n")
        m.write("complete")
    else:
        print(text)
    return EXIT_OK


COMMANDS = {
    "verify": cmd_verify,
    "qfim-sweep": cmd_qfim_sweep,
    "two-param": cmd_two_param,
    "auxiliary": cmd_auxiliary,
    "scaling": cmd_scaling,
    "basis-dump": cmd_basis_dump,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON config; flags override its fields")
    common.add_argument("--n", type=int, help="atom number")
    common.add_argument("--n-range", help="N values: 4:30, 4:30:2 or 4,6,8")
    common.add_argument("--time-points", type=int, help="points on the (0, pi] time grid")
    common.add_argument("--picture", choices=("lab", "interaction"))
    common.add_argument("--seed", type=int, help="base RNG seed")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--jobs", type=int, help="worker processes")
    common.add_argument("--override", action="append", metavar="KEY=VAL",
                        help="set a config field, e.g. scheme.phi3=0.1 or tolerances.algebra=1e-10")
    common.add_argument("--inject-fault", choices=FAULTS, help=argparse.SUPPRESS)
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="su4squeeze", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "verify": "algebra, conservation, revival and QFIM invariant suite",
        "qfim-sweep": "QFIM along trajectories for one or more N",
        "two-param": "two-parameter Bayesian interferometry",
        "auxiliary": "auxiliary time-reversal scheme",
        "scaling": "quadratic and power-law fits over an N range",
        "basis-dump": "print the Fock basis in canonical order",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args)
        return COMMANDS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
