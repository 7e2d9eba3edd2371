"""Experiment orchestration: denoising sweeps, bound curves and figure data.

Every trial draws from streams keyed by (master seed, dictionary, r, trial),
and noise additionally by the SNR index, so results are identical for any
worker count. Result files carry their config in a leading ``#`` comment line
and hold no timestamps; wall time goes to the manifest only.
"""

from __future__ import annotations

import csv
import io
import json
import math
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import _rng
from .bounds import Variant, bound_at_ratio, bound_curve, g_base, optimize_beta, snr_grid
from .bounds import theorem1_bound, theorem2_bound, zmin_prob_bound
from .dictionary import AnalysisDictionary, load_dictionary, make_dif, make_family, make_mix, make_rand
from .errors import BudgetExceeded, ConfigurationError, InvalidArgument
from .linalg import nullspace_projector
from .metrics import (
    ENUMERATION_BUDGET,
    DictionaryProfile,
    Mode,
    alpha_of_signal,
    build_profile,
    enumerate_cosupports,
    profile_from_samples,
    ropp_constant,
    sample_signals,
    signature,
)
from .pursuit import ISNR_CAP_DB, threshold_pursuit
from .signal import add_noise, generate_signal, ratio_of_snr, zmin_of

DESK_TRIALS, DESK_TRIALS_QUICK = 10_000, 500
HIGHDIM_TRIALS, HIGHDIM_TRIALS_QUICK = 1_000, 100
SWEEP_SNR_POINTS = 18
MAX_ENTRIES = 10**7

FIGURES = (
    "cosparsity-hist",
    "signature",
    "success-vs-snr",
    "beta-curve-thm1",
    "beta-curve-thm2",
    "joint-dist",
    "bound-curves",
    "highdim-grid",
)


@dataclass
class DictSpec:
    """How to obtain one dictionary: a family recipe or a file path."""

    family: str = "dif"
    d: int = 9
    p: int | None = None
    seed: int = 0
    path: str | None = None

    def build(self) -> AnalysisDictionary:
        if self.path:
            return load_dictionary(self.path)
        return make_family(self.family, self.d, self.p, self.seed)


@dataclass
class ExperimentConfig:
    dictionaries: list = field(default_factory=lambda: [DictSpec("dif"), DictSpec("mix"), DictSpec("rand")])
    r_grid: list = field(default_factory=lambda: [2])
    snr_grid: list = field(default_factory=lambda: snr_grid(6.0, 74.0, SWEEP_SNR_POINTS).tolist())
    trials: int = DESK_TRIALS
    master_seed: int = 0
    mode: str = "auto"
    outdir: str = "results"
    workers: int = 1
    bins: int = 100
    sigma_u: float = 1.0

    def __post_init__(self):
        self.dictionaries = [s if isinstance(s, DictSpec) else DictSpec(**s) for s in self.dictionaries]
        self.r_grid = [int(r) for r in self.r_grid]
        self.snr_grid = [float(s) for s in self.snr_grid]

    def validate(self) -> None:
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1")
        if not self.dictionaries or not self.r_grid or not self.snr_grid:
            raise ConfigurationError("need at least one dictionary, r and SNR value")
        if self.mode not in ("auto", "exact", "empirical"):
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        for s in self.snr_grid:
            if not math.isfinite(s) or abs(s) > 600:
                raise ConfigurationError(f"SNR {s} dB is outside the representable range")
        for spec in self.dictionaries:
            if spec.path is None and spec.family.lower() not in ("dif", "rand", "mix"):
                raise ConfigurationError(f"unknown dictionary family {spec.family!r}")
            for r in self.r_grid:
                if not 1 <= r < spec.d:
                    raise ConfigurationError(f"r={r} must satisfy 1 <= r < d={spec.d}")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        try:
            return cls(**obj)
        except TypeError as exc:
            raise ConfigurationError(f"bad experiment config: {exc}") from exc

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            return cls.from_json(json.loads(Path(path).read_text()))
        except (OSError, ValueError) as exc:
            raise ConfigurationError(f"{path}: {exc}") from exc

    @classmethod
    def desk(cls, quick: bool = False, **kw) -> "ExperimentConfig":
        kw.setdefault("trials", DESK_TRIALS_QUICK if quick else DESK_TRIALS)
        return cls(**kw)

    @classmethod
    def highdim(cls, quick: bool = False, **kw) -> "ExperimentConfig":
        kw.setdefault("dictionaries", [DictSpec(f, 100, 200) for f in ("dif", "mix", "rand")])
        kw.setdefault("r_grid", [2, 10, 25])
        kw.setdefault("snr_grid", [10.0, 30.0, 50.0])
        kw.setdefault("trials", HIGHDIM_TRIALS_QUICK if quick else HIGHDIM_TRIALS)
        kw.setdefault("mode", "empirical")
        return cls(**kw)


@dataclass
class SweepResult:
    """One row per (dictionary, r, SNR) plus the config that produced them."""

    config: ExperimentConfig
    rows: list
    profiles: dict = field(default_factory=dict, repr=False)

    COLUMNS = (
        "dictionary", "family", "r", "snr_db", "ratio", "trials", "success_rate", "success_se",
        "mean_isnr_db", "oracle_isnr_db", "bound_marginal", "bound_joint",
    )

    def select(self, **match) -> list:
        return [row for row in self.rows if all(row[k] == v for k, v in match.items())]

    def matrix(self, dictionary: str, column: str) -> np.ndarray:
        """(r x SNR) matrix of one column for one dictionary label."""
        cfg = self.config
        out = np.full((len(cfg.r_grid), len(cfg.snr_grid)), np.nan)
        for row in self.select(dictionary=dictionary):
            out[cfg.r_grid.index(row["r"]), cfg.snr_grid.index(row["snr_db"])] = row[column]
        return out

    def to_csv(self) -> str:
        return _csv_text(self.COLUMNS, self.rows, self.config.to_json())


# ---------------------------------------------------------------------------
# Trial machinery


def _stream(master, *keys) -> int:
    return _rng.subseed(master, *keys)


def _trial_block(dic: AnalysisDictionary, r, ratios, master, sigma_u, start, stop) -> dict:
    """Outcomes of trials [start, stop) at every noise ratio."""
    n, s = stop - start, len(ratios)
    out = {
        "success": np.zeros((s, n), dtype=bool),
        "err": np.zeros((s, n)),
        "oracle_err": np.zeros((s, n)),
        "ell": np.zeros(n, dtype=np.int64),
        "alpha": np.zeros(n),
        "zmin": np.zeros(n),
    }
    label = dic.label
    for i, t in enumerate(range(start, stop)):
        sig = generate_signal(dic, r, _stream(master, "signal", label, r, t), sigma_u)
        proj = nullspace_projector(dic.rows(sig.effective_cosupport.indices))
        out["ell"][i] = sig.ell
        out["alpha"][i] = alpha_of_signal(dic, sig)
        out["zmin"][i] = zmin_of(dic, sig)
        for j, q in enumerate(ratios):
            sigma = q * sigma_u
            inst = add_noise(sig, sigma, _stream(master, "noise", label, r, j, t))
            res = threshold_pursuit(dic, inst, r)
            out["success"][j, i] = res.success
            out["err"][j, i] = np.sum((res.x_hat - sig.x) ** 2)
            out["oracle_err"][j, i] = np.sum((proj @ inst.y - sig.x) ** 2)
    return out


def run_trials(dic: AnalysisDictionary, r: int, ratios, trials: int, master_seed=0, workers: int = 1,
               sigma_u: float = 1.0) -> dict:
    """Per-trial outcome arrays, merged in trial order across workers."""
    ratios = list(ratios)
    workers = max(1, min(int(workers), trials))
    step = math.ceil(trials / workers)
    spans = [(a, min(a + step, trials)) for a in range(0, trials, step)]
    if workers == 1:
        parts = [_trial_block(dic, r, ratios, master_seed, sigma_u, a, b) for a, b in spans]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(_trial_block, dic, r, ratios, master_seed, sigma_u, a, b) for a, b in spans]
            parts = [f.result() for f in futs]
    merged = {}
    for key in parts[0]:
        axis = 1 if parts[0][key].ndim == 2 else 0
        merged[key] = np.concatenate([p[key] for p in parts], axis=axis)
    return merged


def _exact_feasible(dic: AnalysisDictionary, r: int) -> bool:
    return math.comb(dic.p, dic.d - r) <= ENUMERATION_BUDGET


def _profile_for(dic, r, mode, outcomes, bins, workers) -> DictionaryProfile:
    if mode == "exact" or (mode == "auto" and _exact_feasible(dic, r)):
        if not _exact_feasible(dic, r):
            raise BudgetExceeded(f"{dic.label}: exact profile at r={r} exceeds the enumeration budget")
        return build_profile(dic, r, Mode.EXACT, bins=bins, workers=workers)
    return profile_from_samples(dic, r, outcomes["ell"], outcomes["alpha"], bins)


def mean_isnr(sq_err, d: int, sigma: float) -> float:
    """ISNR of the mean squared error (not the mean of per-trial dB values).

    This is the averaging under which the oracle reaches -10 log10(r/d).
    """
    mse = float(np.mean(sq_err))
    if mse <= 0.0:
        return ISNR_CAP_DB
    return min(ISNR_CAP_DB, -10.0 * math.log10(mse / (d * sigma**2)))


def binomial_se(rate: float, n: int) -> float:
    return math.sqrt(max(rate * (1.0 - rate), 0.0) / n)


def run_denoise_sweep(config: ExperimentConfig) -> SweepResult:
    """Empirical success and ISNR over the config grid, with both theoretical bounds."""
    config.validate()
    rows, profiles = [], {}
    for spec in config.dictionaries:
        dic = spec.build()
        if dic.p * dic.d > MAX_ENTRIES:
            raise BudgetExceeded(f"{dic.label} is too large for the sweep harness")
        for r in config.r_grid:
            if r >= dic.d:
                raise ConfigurationError(f"r={r} must be < d={dic.d}")
            ratios = [ratio_of_snr(s, dic.d, r) for s in config.snr_grid]
            out = run_trials(dic, r, ratios, config.trials, config.master_seed, config.workers, config.sigma_u)
            prof = _profile_for(dic, r, config.mode, out, config.bins, config.workers)
            profiles[(dic.label, r)] = prof
            for j, (snr, q) in enumerate(zip(config.snr_grid, ratios)):
                rate = float(np.mean(out["success"][j]))
                rows.append({
                    "dictionary": dic.label,
                    "family": dic.family.value,
                    "r": r,
                    "snr_db": snr,
                    "ratio": q,
                    "trials": config.trials,
                    "success_rate": rate,
                    "success_se": binomial_se(rate, config.trials),
                    "mean_isnr_db": mean_isnr(out["err"][j], dic.d, q * config.sigma_u),
                    "oracle_isnr_db": mean_isnr(out["oracle_err"][j], dic.d, q * config.sigma_u),
                    "bound_marginal": bound_at_ratio(prof, q, Variant.MARGINAL),
                    "bound_joint": bound_at_ratio(prof, q, Variant.JOINT),
                })
    return SweepResult(config, rows, profiles)


def run_bound_sweep(config: ExperimentConfig, profile: DictionaryProfile, snr_db=None):
    """Marginal and joint averaged-bound curves for one profile."""
    axis = np.asarray(config.snr_grid if snr_db is None else snr_db, dtype=float)
    if axis.size > 1 and np.any(np.diff(axis) <= 0):
        raise ConfigurationError("SNR axis must be strictly increasing")
    return bound_curve(profile, Variant.MARGINAL, axis), bound_curve(profile, Variant.JOINT, axis)


def run_highdim_grid(config: ExperimentConfig) -> SweepResult:
    """Empirical vs. joint-bound success matrices over (r, SNR), empirical profiles only."""
    if config.mode != "empirical":
        raise ConfigurationError("the high-dimensional grid requires mode='empirical'")
    return run_denoise_sweep(config)


# ---------------------------------------------------------------------------
# Output helpers


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return v


def _csv_text(columns, rows, config: dict | None = None) -> str:
    buf = io.StringIO()
    if config is not None:
        buf.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def read_csv(path) -> list[dict]:
    """Read a result CSV written by this module, skipping ``#`` comment lines."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _git_describe() -> str:
    try:
        res = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            capture_output=True, text=True, timeout=10, cwd=Path(__file__).resolve().parent,
        )
        return res.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def _desk_dicts(seed) -> list[AnalysisDictionary]:
    return [make_dif(3), make_mix(3, seed), make_rand(18, 9, seed)]


# ---------------------------------------------------------------------------
# Figure data


def _fig_cosparsity_hist(out: Path, cfg: ExperimentConfig) -> tuple[list, dict]:
    rows = []
    r = cfg.r_grid[0]
    for dic in _desk_dicts(cfg.master_seed):
        closures = enumerate_cosupports(dic, r, workers=cfg.workers)
        exact = {}
        for c in closures:
            exact[c.ell] = exact.get(c.ell, 0.0) + c.weight
        sigs = sample_signals(dic, r, cfg.trials, cfg.master_seed)
        counts = np.bincount([s.ell for s in sigs], minlength=dic.p + 1)
        for k in range(1, dic.p + 1):
            rows.append({
                "dictionary": dic.label, "ell": k,
                "exact": exact.get(k, 0.0), "empirical": counts[k] / len(sigs),
            })
    path = _write(out / "cosparsity_hist.csv", _csv_text(("dictionary", "ell", "exact", "empirical"), rows, cfg.to_json()))
    return [path], {}


def _fig_signature(out: Path, cfg: ExperimentConfig):
    rows, sparks = [], {}
    for dic in _desk_dicts(cfg.master_seed):
        f, spark = signature(dic, workers=cfg.workers)
        sparks[dic.label] = spark
        rows.extend({"dictionary": dic.label, "k": k + 1, "f": float(v)} for k, v in enumerate(f))
    return [
        _write(out / "signature.csv", _csv_text(("dictionary", "k", "f"), rows, cfg.to_json())),
        _write(out / "spark.json", json.dumps(sparks, indent=2, sort_keys=True) + "\n"),
    ], {}


def _fig_success(out: Path, cfg: ExperimentConfig):
    res = run_denoise_sweep(cfg)
    return [_write(out / "success_vs_snr.csv", res.to_csv())], {}


BETA_AXIS = np.round(np.arange(0.25, 20.0001, 0.25), 10)


def _fig_beta1(out: Path, cfg: ExperimentConfig):
    p, d, r, ell = 18, 9, 2, 14
    rows = [{"beta": b, "g": g_base(b), "bound": theorem1_bound(p, d, r, ell, b)} for b in BETA_AXIS]
    return [_write(out / "beta_curve_thm1.csv", _csv_text(("beta", "g", "bound"), rows, {"p": p, "d": d, "r": r, "ell": ell}))], {}


def _fig_beta2(out: Path, cfg: ExperimentConfig):
    p, d, r, ell, ratio, alpha = 18, 9, 2, 14, 0.01, 0.75
    rows = [
        {
            "beta": b,
            "conditional": theorem1_bound(p, d, r, ell, b),
            "zmin_prob": zmin_prob_bound(p, ell, b, ratio, alpha),
            "bound": theorem2_bound(p, d, r, ell, ratio, alpha, b),
        }
        for b in BETA_AXIS
    ]
    best = optimize_beta(p, d, r, ell, ratio, alpha)
    meta = {"p": p, "d": d, "r": r, "ell": ell, "ratio": ratio, "alpha": alpha}
    return [
        _write(out / "beta_curve_thm2.csv", _csv_text(("beta", "conditional", "zmin_prob", "bound"), rows, meta)),
        _write(out / "beta_optimum.json", json.dumps(asdict(best), indent=2) + "\n"),
    ], {}


def _fig_joint(out: Path, cfg: ExperimentConfig):
    rows, ropp = [], []
    r = cfg.r_grid[0]
    for dic in _desk_dicts(cfg.master_seed):
        prof = build_profile(dic, r, Mode.EXACT, bins=cfg.bins, workers=cfg.workers)
        for k, m in zip(*np.nonzero(prof.joint)):
            rows.append({"dictionary": dic.label, "ell": int(k) + 1, "m": int(m) + 1, "prob": float(prof.joint[k, m])})
        for rr in range(1, dic.d):
            ropp.append({"dictionary": dic.label, "r": rr, "alpha_r": ropp_constant(dic, rr, workers=cfg.workers)})
    return [
        _write(out / "joint_dist.csv", _csv_text(("dictionary", "ell", "m", "prob"), rows, cfg.to_json())),
        _write(out / "ropp.csv", _csv_text(("dictionary", "r", "alpha_r"), ropp, cfg.to_json())),
    ], {}


def _fig_bounds(out: Path, cfg: ExperimentConfig):
    rows = []
    axis = snr_grid()
    r = cfg.r_grid[0]
    for dic in _desk_dicts(cfg.master_seed):
        prof = build_profile(dic, r, Mode.EXACT, bins=cfg.bins, workers=cfg.workers)
        for curve in run_bound_sweep(cfg, prof, axis):
            rows.extend(dict(row, dictionary=dic.label) for row in curve.rows())
    cols = ("dictionary", "snr_db", "ratio", "bound", "variant")
    return [_write(out / "bound_curves.csv", _csv_text(cols, rows, cfg.to_json()))], {}


def _fig_highdim(out: Path, cfg: ExperimentConfig):
    res = run_highdim_grid(cfg)
    mats = {}
    for spec in cfg.dictionaries:
        label = spec.build().label
        mats[label] = {
            "r": cfg.r_grid,
            "snr_db": cfg.snr_grid,
            "empirical": res.matrix(label, "success_rate").tolist(),
            "empirical_se": res.matrix(label, "success_se").tolist(),
            "bound_joint": res.matrix(label, "bound_joint").tolist(),
        }
    return [
        _write(out / "highdim_grid.csv", res.to_csv()),
        _write(out / "highdim_grid.json", json.dumps({"config": cfg.to_json(), "matrices": mats}, indent=2) + "\n"),
    ], {}


_FIGURE_FNS = {
    "cosparsity-hist": _fig_cosparsity_hist,
    "signature": _fig_signature,
    "success-vs-snr": _fig_success,
    "beta-curve-thm1": _fig_beta1,
    "beta-curve-thm2": _fig_beta2,
    "joint-dist": _fig_joint,
    "bound-curves": _fig_bounds,
    "highdim-grid": _fig_highdim,
}

_GNUPLOT = {
    "cosparsity-hist": ("cosparsity_hist.csv", "ell", "exact", "boxes"),
    "signature": ("signature.csv", "k", "f", "linespoints"),
    "success-vs-snr": ("success_vs_snr.csv", "snr_db", "success_rate", "linespoints"),
    "beta-curve-thm1": ("beta_curve_thm1.csv", "beta", "bound", "lines"),
    "beta-curve-thm2": ("beta_curve_thm2.csv", "beta", "bound", "lines"),
    "joint-dist": ("joint_dist.csv", "m", "ell", "points"),
    "bound-curves": ("bound_curves.csv", "snr_db", "bound", "lines"),
    "highdim-grid": ("highdim_grid.csv", "snr_db", "success_rate", "linespoints"),
}


def gnuplot_script(figure_id: str) -> str:
    """A plain gnuplot script for the figure's main CSV (columns addressed by name)."""
    data, x, y, style = _GNUPLOT[figure_id]
    return (
        f"# gnuplot script for {figure_id}\n"
        "set datafile separator ','\n"
        "set datafile commentschars '#'\n"
        "set key autotitle columnhead\n"
        f"set xlabel '{x}'\nset ylabel '{y}'\n"
        "set terminal pngcairo size 800,600\n"
        f"set output '{figure_id}.png'\n"
        f"plot '{data}' using '{x}':'{y}' with {style}\n"
    )


def default_config(figure_id: str, quick: bool = False, **kw) -> ExperimentConfig:
    if figure_id == "highdim-grid":
        return ExperimentConfig.highdim(quick, **kw)
    return ExperimentConfig.desk(quick, **kw)


def reproduce(figure_id: str, outdir, *, quick: bool = False, seed: int = 0, workers: int = 1,
              config: ExperimentConfig | None = None, gnuplot: bool = False) -> list[Path]:
    """Write the data behind one figure plus ``manifest.json`` into ``outdir``."""
    if figure_id not in _FIGURE_FNS:
        raise InvalidArgument(f"unknown figure id {figure_id!r}; choose from {', '.join(FIGURES)}")
    out = Path(outdir)
    cfg = config or default_config(figure_id, quick, master_seed=seed, workers=workers, outdir=str(out))
    cfg.validate()
    t0 = time.perf_counter()
    files, _ = _FIGURE_FNS[figure_id](out, cfg)
    if gnuplot:
        files.append(_write(out / f"{figure_id}.gp", gnuplot_script(figure_id)))
    manifest = {
        "figure": figure_id,
        "config": cfg.to_json(),
        "master_seed": cfg.master_seed,
        "quick": quick,
        "git_describe": _git_describe(),
        "wall_time_s": round(time.perf_counter() - t0, 3),
        "files": [f.name for f in files],
    }
    files.append(_write(out / "manifest.json", json.dumps(manifest, indent=2) + "\n"))
    return files
