"""Ensemble sweeps over intensities and the dilute-law comparison.

For each (intensity, L, N) the sweep samples M configurations, solves
the corrector problem, and aggregates the effective tensor against the
dilute prediction A1 + phi * hatA2. The same sample (same seed) is
reused across grid resolutions so that first-order Richardson
extrapolation in the cell size cancels discretization bias per member;
a second extrapolation in L^-d handles finite volume when several torus
sizes are configured. Member seeds are spawned from a single base seed,
so a sweep is reproducible row by row.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ConfigError, NonConvergenceError
from .microstructure import InclusionSet, estimate_lambda2, rasterize
from .phases import PhaseModel
from .point_process import (ProcessSpec, TorusSpec, analytic_lambda2,
                            sample_matern2, sample_poisson)
from .corrector_fft import SolverConfig, effective_tensor
from .single_inclusion import cm_prediction, hatA2_isotropic, hatA2_numeric

_CONFIG_KEYS = {
    "d", "process_kind", "intensities", "r_hard", "L_levels", "N_levels",
    "ensemble_size", "alpha", "beta", "A1", "A2", "solver", "seed_base",
    "lambda2_bin_width",
}
_SOLVER_KEYS = {"scheme", "alpha0", "tol", "max_iter"}


@dataclass(frozen=True)
class SweepConfig:
    d: int
    process_kind: str                  # "poisson" | "matern2"
    intensities: tuple                 # strictly increasing
    L_levels: tuple
    N_levels: tuple                    # grid sizes used for every L
    ensemble_size: int
    phases: PhaseModel
    solver: SolverConfig = SolverConfig()
    seed_base: int = 0
    r_hard: float = 0.0                # matern2 only
    lambda2_bin_width: float = 1.0

    def __post_init__(self):
        lam = list(self.intensities)
        if not lam or any(b <= a for a, b in zip(lam, lam[1:])):
            raise ConfigError("intensity grid must be non-empty, strictly increasing")
        if self.ensemble_size < 8:
            raise ConfigError("ensemble size must be >= 8")
        if len(self.L_levels) * len(self.N_levels) < 2:
            raise ConfigError("need at least two (L, N) levels for extrapolation")
        if self.process_kind not in ("poisson", "matern2"):
            raise ConfigError(f"unsupported sweep process {self.process_kind!r}")
        if self.process_kind == "matern2" and self.r_hard <= 0:
            raise ConfigError("matern2 sweep needs r_hard > 0")

    def to_dict(self):
        d = {
            "d": self.d, "process_kind": self.process_kind,
            "intensities": list(self.intensities),
            "L_levels": list(self.L_levels), "N_levels": list(self.N_levels),
            "ensemble_size": self.ensemble_size,
            "solver": {"scheme": self.solver.scheme, "alpha0": self.solver.alpha0,
                       "tol": self.solver.tol, "max_iter": self.solver.max_iter},
            "seed_base": self.seed_base,
            "lambda2_bin_width": self.lambda2_bin_width,
        }
        if self.process_kind == "matern2":
            d["r_hard"] = self.r_hard
        if self.phases.is_isotropic:
            d["alpha"] = self.phases.alpha
            d["beta"] = self.phases.beta
        else:
            d["A1"] = self.phases.A1.tolist()
            d["A2"] = self.phases.A2.tolist()
        return d

    @classmethod
    def from_dict(cls, raw):
        unknown = set(raw) - _CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown sweep config keys: {sorted(unknown)}")
        missing = {"d", "process_kind", "intensities", "L_levels", "N_levels",
                   "ensemble_size"} - set(raw)
        if missing:
            raise ConfigError(f"missing sweep config keys: {sorted(missing)}")
        d = int(raw["d"])
        if "alpha" in raw or "beta" in raw:
            if not ("alpha" in raw and "beta" in raw):
                raise ConfigError("isotropic phases need both alpha and beta")
            phases = PhaseModel.isotropic(float(raw["alpha"]), float(raw["beta"]), d)
        elif "A1" in raw and "A2" in raw:
            phases = PhaseModel(np.array(raw["A1"], dtype=float),
                                np.array(raw["A2"], dtype=float))
        else:
            raise ConfigError("phases missing: give alpha/beta or A1/A2")
        sraw = dict(raw.get("solver", {}))
        unknown = set(sraw) - _SOLVER_KEYS
        if unknown:
            raise ConfigError(f"unknown solver config keys: {sorted(unknown)}")
        solver = SolverConfig(**sraw)
        return cls(
            d=d, process_kind=raw["process_kind"],
            intensities=tuple(float(x) for x in raw["intensities"]),
            L_levels=tuple(float(x) for x in raw["L_levels"]),
            N_levels=tuple(int(x) for x in raw["N_levels"]),
            ensemble_size=int(raw["ensemble_size"]), phases=phases,
            solver=solver, seed_base=int(raw.get("seed_base", 0)),
            r_hard=float(raw.get("r_hard", 0.0)),
            lambda2_bin_width=float(raw.get("lambda2_bin_width", 1.0)),
        )


@dataclass
class SweepRow:
    lam: float
    L: float
    N: int
    M: int
    n_failed: int
    phi_mean: float
    phi_se: float
    lambda2_analytic: float | None
    lambda2_hat: float | None
    Abar_mean: np.ndarray = field(repr=False, default=None)
    Abar_se: np.ndarray = field(repr=False, default=None)
    cm_pred: np.ndarray = field(repr=False, default=None)
    eps: float = 0.0
    eps_se: float = 0.0
    seed_lo: int = 0
    seed_hi: int = 0


@dataclass
class ExtrapolatedRow:
    lam: float
    phi_mean: float
    lambda2: float | None          # analytic when known, else estimate
    eps: float
    eps_se: float
    above_noise: bool
    delta: np.ndarray = field(repr=False, default=None)


@dataclass
class DiluteSweepReport:
    config: SweepConfig
    rows: list
    extrapolated: list
    fit: dict | None = None

    CSV_PREFIX = ("lam", "L", "N", "M", "n_failed", "phi_mean", "phi_se",
                  "lambda2_analytic", "lambda2_hat")

    def csv_columns(self):
        d = self.config.d
        cols = list(self.CSV_PREFIX)
        cols += [f"Abar_{i}{j}" for i in range(d) for j in range(d)]
        cols += [f"Abar_se_{i}{j}" for i in range(d) for j in range(d)]
        cols += [f"cm_{i}{j}" for i in range(d) for j in range(d)]
        cols += ["eps", "eps_se", "seed_lo", "seed_hi"]
        return cols

    def to_csv(self):
        lines = [",".join(self.csv_columns())]
        for r in self.rows:
            vals = [f"{r.lam:.17g}", f"{r.L:.17g}", str(r.N), str(r.M),
                    str(r.n_failed), f"{r.phi_mean:.17g}", f"{r.phi_se:.17g}",
                    "" if r.lambda2_analytic is None else f"{r.lambda2_analytic:.17g}",
                    "" if r.lambda2_hat is None else f"{r.lambda2_hat:.17g}"]
            for m in (r.Abar_mean, r.Abar_se, r.cm_pred):
                vals += [f"{v:.17g}" for v in np.asarray(m).ravel()]
            vals += [f"{r.eps:.17g}", f"{r.eps_se:.17g}",
                     str(r.seed_lo), str(r.seed_hi)]
            lines.append(",".join(vals))
        return "\n".join(lines) + "\n"

    def to_json(self):
        doc = {
            "config": self.config.to_dict(),
            "rows": [_row_dict(r) for r in self.rows],
            "extrapolated": [
                {"lam": x.lam, "phi_mean": x.phi_mean, "lambda2": x.lambda2,
                 "eps": x.eps, "eps_se": x.eps_se, "above_noise": x.above_noise,
                 "delta": np.asarray(x.delta).tolist()}
                for x in self.extrapolated],
            "fit": self.fit,
        }
        return json.dumps(doc, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        cfg = SweepConfig.from_dict(doc["config"])
        rows = []
        for rd in doc["rows"]:
            rows.append(SweepRow(
                lam=rd["lam"], L=rd["L"], N=rd["N"], M=rd["M"],
                n_failed=rd["n_failed"], phi_mean=rd["phi_mean"],
                phi_se=rd["phi_se"], lambda2_analytic=rd["lambda2_analytic"],
                lambda2_hat=rd["lambda2_hat"],
                Abar_mean=np.array(rd["Abar_mean"]),
                Abar_se=np.array(rd["Abar_se"]), cm_pred=np.array(rd["cm_pred"]),
                eps=rd["eps"], eps_se=rd["eps_se"], seed_lo=rd["seed_lo"],
                seed_hi=rd["seed_hi"]))
        extrap = [ExtrapolatedRow(
            lam=xd["lam"], phi_mean=xd["phi_mean"], lambda2=xd["lambda2"],
            eps=xd["eps"], eps_se=xd["eps_se"], above_noise=xd["above_noise"],
            delta=np.array(xd["delta"])) for xd in doc["extrapolated"]]
        return cls(cfg, rows, extrap, doc.get("fit"))


def _row_dict(r):
    return {
        "lam": r.lam, "L": r.L, "N": r.N, "M": r.M, "n_failed": r.n_failed,
        "phi_mean": r.phi_mean, "phi_se": r.phi_se,
        "lambda2_analytic": r.lambda2_analytic, "lambda2_hat": r.lambda2_hat,
        "Abar_mean": np.asarray(r.Abar_mean).tolist(),
        "Abar_se": np.asarray(r.Abar_se).tolist(),
        "cm_pred": np.asarray(r.cm_pred).tolist(),
        "eps": r.eps, "eps_se": r.eps_se,
        "seed_lo": r.seed_lo, "seed_hi": r.seed_hi,
    }


def _member_seed(seed_base, i_lam, L, m):
    # stable 63-bit mix; independent of N so grids share samples
    h = (seed_base * 1_000_003 + i_lam * 10_007 + int(round(L)) * 101 + m)
    return h & 0x7FFF_FFFF_FFFF_FFFF


def _draw_sample(cfg, lam, torus, seed):
    if cfg.process_kind == "poisson":
        return sample_poisson(lam, torus, seed)
    return sample_matern2(lam, cfg.r_hard, torus, seed)


def _run_member(args):
    """One ensemble member: sample once, solve at every grid resolution."""
    cfg, lam, L, seed = args
    torus = TorusSpec(cfg.d, L)
    sample = _draw_sample(cfg, lam, torus, seed)
    incl = InclusionSet(sample)
    out = {}
    for N in cfg.N_levels:
        fld = rasterize(incl, cfg.phases, N)
        try:
            sol = effective_tensor(fld, cfg.solver)
        except NonConvergenceError:
            out[N] = None
            continue
        out[N] = (fld.phi_raster(), sol.Abar)
    return sample, out


def _hat_a2(cfg):
    if cfg.phases.is_isotropic:
        return hatA2_isotropic(cfg.phases.alpha, cfg.phases.beta, cfg.d)
    return hatA2_numeric(cfg.phases.A1, cfg.phases.A2, cfg.d,
                         solver_cfg=cfg.solver).matrix


def _eps_and_se(members):
    """Operator-norm error of the mean delta matrix and its standard error.

    The se is the delta-method one: eps = u' mean(D) v with (u, v) the top
    singular pair, so se(eps) is the standard error of the scalar
    projections u' D_m v. The operator norm of the entrywise-se matrix
    would overstate the floor (independent entry noise mostly cancels in
    the norm direction).
    """
    members = np.asarray(members)
    mean = members.mean(axis=0)
    U, S, Vt = np.linalg.svd(mean)
    eps = float(S[0])
    if len(members) < 2:
        return eps, 0.0
    proj = np.einsum("i,mij,j->m", U[:, 0], members, Vt[0])
    se = float(proj.std(ddof=1) / math.sqrt(len(members)))
    return eps, se


def run_sweep(cfg, workers=1, checkpoint_dir=None, progress=None):
    """Execute the full sweep; returns a DiluteSweepReport.

    ``checkpoint_dir``: completed (intensity, L) blocks are persisted as
    JSON and replayed on resume. Results are identical with or without
    checkpointing and for any worker count.
    """
    hatA2 = _hat_a2(cfg)
    A1 = cfg.phases.A1
    rows = []
    extrapolated = []
    total_failed = 0
    total_members = 0

    for i_lam, lam in enumerate(cfg.intensities):
        per_L_delta = {}       # L -> per-member N-extrapolated delta matrices
        per_L_phi = {}
        lam2_analytic = _sweep_lambda2_analytic(cfg, lam)
        lam2_hat_last = None
        for L in cfg.L_levels:
            seeds = [_member_seed(cfg.seed_base, i_lam, L, m)
                     for m in range(cfg.ensemble_size)]
            block = _load_block(checkpoint_dir, i_lam, L, cfg)
            samples = None
            if block is None:
                jobs = [(cfg, lam, L, s) for s in seeds]
                if workers > 1:
                    with ProcessPoolExecutor(max_workers=workers) as pool:
                        results = list(pool.map(_run_member, jobs))
                else:
                    results = [_run_member(j) for j in jobs]
                samples = [r[0] for r in results]
                block = {"per_N": {str(N): [] for N in cfg.N_levels}}
                for _, out in results:
                    for N in cfg.N_levels:
                        v = out[N]
                        block["per_N"][str(N)].append(
                            None if v is None else
                            {"phi": v[0], "Abar": v[1].tolist()})
                lam2 = _estimate_block_lambda2(cfg, samples)
                block["lambda2_hat"] = lam2
                _save_block(checkpoint_dir, i_lam, L, cfg, block)
            lam2_hat_last = block.get("lambda2_hat")

            # per-(L, N) rows
            deltas_by_N = {}
            phis_by_N = {}
            for N in cfg.N_levels:
                entries = block["per_N"][str(N)]
                ok = [e for e in entries if e is not None]
                n_failed = len(entries) - len(ok)
                total_failed += n_failed
                total_members += len(entries)
                if not ok:
                    raise NonConvergenceError(
                        f"sweep row lam={lam} L={L} N={N}: all members failed")
                phis = np.array([e["phi"] for e in ok])
                Abars = np.array([np.array(e["Abar"]) for e in ok])
                deltas = Abars - A1[None] - phis[:, None, None] * hatA2[None]
                deltas_by_N[N] = deltas
                phis_by_N[N] = phis
                Abar_mean = Abars.mean(axis=0)
                Abar_se = Abars.std(axis=0, ddof=1) / math.sqrt(len(ok)) \
                    if len(ok) > 1 else np.zeros_like(Abar_mean)
                phi_mean = float(phis.mean())
                cm = cm_prediction(cfg.phases, cfg.d, phi_mean, hatA2=hatA2)
                row_eps, row_eps_se = _eps_and_se(deltas)
                rows.append(SweepRow(
                    lam=lam, L=L, N=N, M=cfg.ensemble_size, n_failed=n_failed,
                    phi_mean=phi_mean,
                    phi_se=float(phis.std(ddof=1) / math.sqrt(len(ok)))
                    if len(ok) > 1 else 0.0,
                    lambda2_analytic=lam2_analytic,
                    lambda2_hat=block.get("lambda2_hat"),
                    Abar_mean=Abar_mean, Abar_se=Abar_se, cm_pred=cm,
                    eps=row_eps, eps_se=row_eps_se,
                    seed_lo=min(seeds), seed_hi=max(seeds)))
            # Richardson in h at this L (needs equal member counts across N)
            per_L_delta[L], per_L_phi[L] = _extrapolate_in_h(
                cfg, deltas_by_N, phis_by_N)
            if progress:
                progress(f"lam={lam:g} L={L:g} done")

        delta_members, phi_fin = _extrapolate_in_L(cfg, per_L_delta, per_L_phi)
        dmean = delta_members.mean(axis=0)
        eps, eps_se = _eps_and_se(delta_members)
        lam2 = lam2_analytic if lam2_analytic is not None else lam2_hat_last
        extrapolated.append(ExtrapolatedRow(
            lam=lam, phi_mean=float(phi_fin), lambda2=lam2, eps=eps,
            eps_se=eps_se, above_noise=eps > 3 * eps_se, delta=dmean))

    if total_members and total_failed / total_members > 0.20:
        raise NonConvergenceError(
            f"sweep aborted: {total_failed}/{total_members} member solves failed")

    report = DiluteSweepReport(cfg, rows, extrapolated)
    report.fit = fit_error_scaling(report)
    return report


def _sweep_lambda2_analytic(cfg, lam):
    if cfg.process_kind == "poisson":
        return analytic_lambda2(ProcessSpec("poisson", intensity=lam))
    return None


def _estimate_block_lambda2(cfg, samples):
    import warnings

    if len(samples) < 10:
        return None
    try:
        with warnings.catch_warnings():
            # at-cutoff / bound warnings are routine for small sweep tori
            warnings.simplefilter("ignore", UserWarning)
            est = estimate_lambda2(samples, bin_width=cfg.lambda2_bin_width)
    except (ConfigError, ValueError):
        return None
    return est.value


def _extrapolate_in_h(cfg, deltas_by_N, phis_by_N):
    Ns = sorted(deltas_by_N)
    if len(Ns) == 1:
        return deltas_by_N[Ns[0]], phis_by_N[Ns[0]]
    N1, N2 = Ns[-2], Ns[-1]
    d1, d2 = deltas_by_N[N1], deltas_by_N[N2]
    if len(d1) != len(d2):
        # failed members differ between levels; fall back to the finest grid
        return d2, phis_by_N[N2]
    h1, h2 = 1.0 / N1, 1.0 / N2
    w = h1 / (h1 - h2)
    return w * d2 - (w - 1.0) * d1, phis_by_N[N2]


def _extrapolate_in_L(cfg, per_L_delta, per_L_phi):
    Ls = sorted(per_L_delta)
    if len(Ls) == 1:
        return per_L_delta[Ls[0]], per_L_phi[Ls[0]].mean()
    L1, L2 = Ls[-2], Ls[-1]
    d1 = per_L_delta[L1].mean(axis=0)
    d2m = per_L_delta[L2]
    x1, x2 = L1 ** (-cfg.d), L2 ** (-cfg.d)
    w = x1 / (x1 - x2)
    # shift the finest-L members by the ensemble-mean finite-volume correction
    corr = (w - 1.0) * (d2m.mean(axis=0) - d1)
    return d2m + corr[None], per_L_phi[L2].mean()


def _block_path(checkpoint_dir, i_lam, L, cfg):
    name = f"block_i{i_lam}_L{L:g}_M{cfg.ensemble_size}.json"
    return os.path.join(checkpoint_dir, name)


def _load_block(checkpoint_dir, i_lam, L, cfg):
    if not checkpoint_dir:
        return None
    path = _block_path(checkpoint_dir, i_lam, L, cfg)
    if not os.path.exists(path):
        return None
    with open(path) as f:
        return json.load(f)


def _save_block(checkpoint_dir, i_lam, L, cfg, block):
    if not checkpoint_dir:
        return
    os.makedirs(checkpoint_dir, exist_ok=True)
    path = _block_path(checkpoint_dir, i_lam, L, cfg)
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        json.dump(block, f)
    os.replace(tmp, path)


def fit_error_scaling(report):
    """Least-squares fit of log eps against log(lambda2 |log lambda2|).

    Uses analytic lambda2 when available, else the empirical estimate.
    Rows below the 3-standard-error noise floor are dropped; fewer than
    three usable rows yields status 'inconclusive' and no slope.
    """
    pts = []
    for x in report.extrapolated:
        if not x.above_noise or x.lambda2 is None or x.lambda2 <= 0 or x.eps <= 0:
            continue
        ab = x.lambda2 * abs(math.log(x.lambda2))
        if ab <= 0:
            continue
        pts.append((math.log(ab), math.log(x.eps)))
    if len(pts) < 3:
        return {"status": "inconclusive", "n_points": len(pts),
                "slope": None, "constant": None, "r_squared": None}
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    ss_tot = float(((ys - ys.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return {"status": "ok", "n_points": len(pts), "slope": float(slope),
            "constant": float(math.exp(intercept)), "r_squared": r2}


def cm_gap_table(report):
    """Per-intensity comparison table; returns (aligned_text, csv_text)."""
    header = ["lam", "phi_hat", "Abar_11", "CM_11", "eps", "eps_over_l2logl2"]
    rows = []
    by_lam = {}
    for r in report.rows:
        by_lam.setdefault(r.lam, r)   # keep first; replaced by finer below
        prev = by_lam[r.lam]
        if (r.L, r.N) >= (prev.L, prev.N):
            by_lam[r.lam] = r
    extrap = {x.lam: x for x in report.extrapolated}
    for lam in sorted(by_lam):
        r = by_lam[lam]
        x = extrap.get(lam)
        eps = x.eps if x is not None else r.eps
        lam2 = x.lambda2 if x is not None else r.lambda2_analytic
        if lam2 and lam2 > 0:
            ratio = eps / (lam2 * abs(math.log(lam2)))
            ratio_s = f"{ratio:.6g}"
        else:
            ratio_s = "nan"
        rows.append([f"{lam:.6g}", f"{r.phi_mean:.6g}",
                     f"{np.asarray(r.Abar_mean)[0, 0]:.10g}",
                     f"{np.asarray(r.cm_pred)[0, 0]:.10g}",
                     f"{eps:.6g}", ratio_s])
    widths = [max(len(header[i]), *(len(r[i]) for r in rows)) if rows
              else len(header[i]) for i in range(len(header))]
    text_lines = ["  ".join(h.rjust(w) for h, w in zip(header, widths))]
    for r in rows:
        text_lines.append("  ".join(v.rjust(w) for v, w in zip(r, widths)))
    csv_lines = [",".join(header)] + [",".join(r) for r in rows]
    return "\n".join(text_lines) + "\n", "\n".join(csv_lines) + "\n"
