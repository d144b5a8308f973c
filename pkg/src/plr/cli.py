"""Command-line harness: build problems, run solves, sweep parameters.

Usage::

    plr synth --config experiment.cfg [--out DIR] [--seed N] [--regen-from-seed]
    plr solve --config experiment.cfg [--out DIR] [--seed N]
    plr sweep --config experiment.cfg [--out DIR] [--seed N] [--threads N]

Configs are flat ``key = value`` text files (``#`` starts a comment), one
experiment per file.  Every command is reproducible byte-for-byte from its
config and seeds, except the wall-time line of the metrics file.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import (CompletionObservations, CompressiveObservations, FeasibleSet,
                   _atomic_write_text, load_dense_csv, load_observations_csv,
                   save_dense_csv, save_observations_csv, seeded_rng)
from .metrics import hellinger_matrix, kl_matrix, squared_error
from .objectives import completion_objective, recovery_objective
from .projections import positive_rescale
from .sensing import (build_sensing_ensemble, load_ensemble,
                      sample_compressive_counts, save_ensemble)
from .solvers import (SolverAbort, SolverConfig, accelerated_proximal_gradient,
                      default_init, pmlsvt, proximal_gradient, select_lambda_default)
from .synthdata import (PatchLayout, gen_exact_low_rank, image_to_patch_matrix,
                        load_count_csv, rank_l_approx, read_pgm,
                        sample_completion_observations)

# Offset separating the ensemble stream from the measurement-noise stream
# when both derive from one experiment seed.
COUNT_SEED_OFFSET = 500_000_007

_MODES = {"complete": "completion", "completion": "completion",
          "recover": "recovery", "recovery": "recovery"}
_SOURCES = ("synthetic", "matrix", "image", "counts")
_SOLVERS = ("pmlsvt", "proximal", "accelerated")
_AXES = ("rho", "m", "lambda", "p_obs")


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


def parse_config(path):
    """Read a flat key = value file into a dict of strings."""
    cfg = {}
    try:
        fh = open(path)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}: line {lineno}: expected 'key = value'")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if not key or not val:
                raise ConfigError(f"{path}: line {lineno}: empty key or value")
            if key in cfg:
                raise ConfigError(f"{path}: line {lineno}: duplicate key {key!r}")
            cfg[key] = val
    return cfg


def _get(cfg, key, cast, default=None, required=False):
    if key not in cfg:
        if required:
            raise ConfigError(f"missing required config key {key!r}")
        return default
    try:
        if cast is bool:
            val = cfg[key].lower()
            if val not in ("true", "false", "0", "1", "yes", "no"):
                raise ValueError(f"not a boolean: {cfg[key]!r}")
            return val in ("true", "1", "yes")
        return cast(cfg[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config key {key!r}: {exc}") from None


@dataclass
class ExperimentConfig:
    """Resolved experiment description: problem source, observations, solver, sweep."""

    mode: str
    source: str
    seed: int = 0
    # problem source
    d1: int = None
    d2: int = None
    rank: int = None
    matrix_file: str = None
    image_file: str = None
    patch_h: int = None
    patch_w: int = None
    trunc_rank: int = None
    counts_file: str = None
    rho: float = 1.0
    # constraint set
    alpha: float = None
    beta: float = None
    rank_budget: int = None
    entry_floor: float = 1e-6
    total_intensity: float = None
    # observations
    m: float = None
    p_obs: float = None
    p: float = 0.5
    obs_seed: int = None
    poissonize: bool = None
    obs_file: str = None
    y_file: str = None
    ensemble_file: str = None
    ensemble_meta: str = None
    # solver
    solver: str = "pmlsvt"
    max_iter: int = 1000
    step_recip: float = 1e-4
    step_scale: float = 1.1
    penalty: float = None
    tol: float = 0.0
    stop_on_objective_delta: bool = False
    # sweep
    sweep_axis: str = None
    sweep_values: list = field(default_factory=list)
    trials: int = 5

    @classmethod
    def from_file(cls, path, seed_override=None):
        cfg = parse_config(path)
        mode_raw = _get(cfg, "mode", str, required=True).lower()
        if mode_raw not in _MODES:
            raise ConfigError(f"mode must be one of {sorted(set(_MODES))}, got {mode_raw!r}")
        source = _get(cfg, "source", str, required=True).lower()
        if source not in _SOURCES:
            raise ConfigError(f"source must be one of {_SOURCES}, got {source!r}")
        ec = cls(
            mode=_MODES[mode_raw],
            source=source,
            seed=_get(cfg, "seed", int, default=0),
            d1=_get(cfg, "d1", int),
            d2=_get(cfg, "d2", int),
            rank=_get(cfg, "rank", int),
            matrix_file=_get(cfg, "matrix_file", str),
            image_file=_get(cfg, "image_file", str),
            patch_h=_get(cfg, "patch_h", int),
            patch_w=_get(cfg, "patch_w", int),
            trunc_rank=_get(cfg, "trunc_rank", int),
            counts_file=_get(cfg, "counts_file", str),
            rho=_get(cfg, "rho", float, default=1.0),
            alpha=_get(cfg, "alpha", float),
            beta=_get(cfg, "beta", float),
            rank_budget=_get(cfg, "rank_budget", int),
            entry_floor=_get(cfg, "entry_floor", float, default=1e-6),
            total_intensity=_get(cfg, "total_intensity", float),
            m=_get(cfg, "m", float),
            p_obs=_get(cfg, "p_obs", float),
            p=_get(cfg, "p", float, default=0.5),
            obs_seed=_get(cfg, "obs_seed", int),
            poissonize=_get(cfg, "poissonize", bool),
            obs_file=_get(cfg, "obs_file", str),
            y_file=_get(cfg, "y_file", str),
            ensemble_file=_get(cfg, "ensemble_file", str),
            ensemble_meta=_get(cfg, "ensemble_meta", str),
            solver=_get(cfg, "solver", str, default="pmlsvt").lower(),
            max_iter=_get(cfg, "max_iter", int, default=1000),
            step_recip=_get(cfg, "step_recip", float, default=1e-4),
            step_scale=_get(cfg, "step_scale", float, default=1.1),
            penalty=_get(cfg, "lambda", float),
            tol=_get(cfg, "tol", float, default=0.0),
            stop_on_objective_delta=_get(cfg, "stop_on_objective_delta", bool, default=False),
            sweep_axis=_get(cfg, "sweep_axis", str),
            trials=_get(cfg, "trials", int, default=5),
        )
        if "sweep_values" in cfg:
            try:
                ec.sweep_values = [float(v) for v in cfg["sweep_values"].split(",") if v.strip()]
            except ValueError as exc:
                raise ConfigError(f"config key 'sweep_values': {exc}") from None
        if seed_override is not None:
            ec.seed = seed_override
        if ec.obs_seed is None:
            ec.obs_seed = ec.seed
        if ec.poissonize is None:
            ec.poissonize = ec.source != "counts"
        return ec

    def validate(self, need_sweep=False):
        if self.solver not in _SOLVERS:
            raise ConfigError(f"solver must be one of {_SOLVERS}, got {self.solver!r}")
        if need_sweep:
            if self.sweep_axis is None:
                raise ConfigError("sweep command requires sweep_axis")
        elif self.sweep_axis is not None:
            raise ConfigError("sweep_axis set, but this command runs a single experiment")
        if self.sweep_axis is not None:
            if self.sweep_axis not in _AXES:
                raise ConfigError(f"sweep_axis must be one of {_AXES}")
            if not self.sweep_values:
                raise ConfigError("sweep requires a non-empty sweep_values list")
            if self.trials < 1:
                raise ConfigError("trials must be >= 1")
            if self.sweep_axis in ("m", "p_obs") and (
                    self.obs_file or self.y_file or self.ensemble_file or self.ensemble_meta):
                raise ConfigError(
                    f"sweeping {self.sweep_axis} is incompatible with fixed observation files")
        if self.source == "synthetic":
            for key in ("d1", "d2", "rank"):
                if getattr(self, key) is None:
                    raise ConfigError(f"synthetic source requires {key}")
            if self.alpha is None or self.beta is None:
                raise ConfigError("synthetic source requires alpha and beta")
        if self.source == "matrix" and self.matrix_file is None:
            raise ConfigError("matrix source requires matrix_file")
        if self.source == "image":
            for key in ("image_file", "patch_h", "patch_w"):
                if getattr(self, key) is None:
                    raise ConfigError(f"image source requires {key}")
        if self.source == "counts" and self.counts_file is None:
            raise ConfigError("counts source requires counts_file")
        if self.mode == "completion" and (self.alpha is None or self.beta is None):
            raise ConfigError("completion requires alpha and beta")
        for key in ("matrix_file", "image_file", "counts_file", "obs_file",
                    "y_file", "ensemble_file", "ensemble_meta"):
            path = getattr(self, key)
            if path is not None and not os.path.exists(path):
                raise ConfigError(f"{key} = {path!r} does not exist")


# ---------------------------------------------------------------------------
# Problem construction
# ---------------------------------------------------------------------------

def build_ground_truth(ec, rho=None):
    """Materialize (M, observed_mask) from the configured source.

    ``rho`` scales the intensity; for completion the scaled matrix is clamped
    back into the entry box.  ``observed_mask`` is non-None only for the
    counts source, where M is a count realization rather than an intensity.
    """
    rho = ec.rho if rho is None else rho
    mask = None
    if ec.source == "synthetic":
        fset = FeasibleSet(alpha=ec.alpha, beta=ec.beta,
                           rank_budget=ec.rank_budget or ec.rank,
                           entry_floor=ec.entry_floor)
        M = gen_exact_low_rank(ec.d1, ec.d2, ec.rank, fset, ec.seed)
    elif ec.source == "matrix":
        M = load_dense_csv(ec.matrix_file)
    elif ec.source == "image":
        image = read_pgm(ec.image_file)
        layout = PatchLayout(image_shape=image.shape, patch_shape=(ec.patch_h, ec.patch_w))
        M = image_to_patch_matrix(image, layout)
        if ec.trunc_rank is not None:
            M = np.maximum(rank_l_approx(M, ec.trunc_rank), 0.0)
    else:  # counts
        M, mask = load_count_csv(ec.counts_file)
    if rho != 1.0:
        M = rho * M
    if ec.total_intensity is not None and ec.mode == "recovery":
        M = positive_rescale(M, rho * ec.total_intensity)
    if ec.mode == "completion" and ec.source != "counts":
        M = np.clip(M, ec.beta, ec.alpha)
    return M, mask


def feasible_set_for(ec, M, m_value=None):
    """FeasibleSet for the solve, filling recovery defaults from the data."""
    total = float(np.abs(M).sum())
    alpha = ec.alpha
    beta = ec.beta
    if ec.mode == "recovery":
        if alpha is None:
            alpha = total
        if beta is None:
            beta = ec.entry_floor / (m_value or 1)
        if beta >= alpha:
            beta = alpha * 1e-9
    return FeasibleSet(alpha=alpha, beta=beta,
                       rank_budget=ec.rank_budget or ec.rank or ec.trunc_rank or 1,
                       total_intensity=total, entry_floor=ec.entry_floor)


def _completion_m(ec, dims):
    if ec.p_obs is not None:
        if not 0 < ec.p_obs <= 1:
            raise ConfigError(f"p_obs must lie in (0, 1], got {ec.p_obs}")
        return ec.p_obs * dims[0] * dims[1]
    if ec.m is not None:
        return float(ec.m)
    raise ConfigError("completion requires m or p_obs")


def make_completion_observations(ec, M, mask, seed, p_obs=None):
    """Sample (or subsample) the observed entries for a completion problem."""
    d1, d2 = M.shape
    if ec.obs_file is not None:
        return load_observations_csv(ec.obs_file, (d1, d2))
    if p_obs is None:
        m_expected = _completion_m(ec, (d1, d2))
    else:
        m_expected = p_obs * d1 * d2
    if ec.poissonize:
        return sample_completion_observations(M, m_expected, seed)
    # Counts are already a Poisson realization: Bernoulli-subsample the cells
    # present in the file and take their values as the observations.
    rng = seeded_rng(seed)
    keep = rng.random(M.shape) < m_expected / (d1 * d2)
    if mask is not None:
        keep &= mask
    rows, cols = np.nonzero(keep)
    return CompletionObservations(rows=rows, cols=cols,
                                  counts=np.rint(M[rows, cols]).astype(np.int64),
                                  dims=(d1, d2), sample_prob=m_expected / (d1 * d2))


def make_recovery_observations(ec, M, seed, m_value=None):
    """Build (or load) the sensing ensemble and its Poisson counts."""
    d1, d2 = M.shape
    if ec.ensemble_file is not None:
        ensemble = load_ensemble(ec.ensemble_file)
    elif ec.ensemble_meta is not None:
        meta = parse_config(ec.ensemble_meta)
        ensemble = build_sensing_ensemble(
            int(meta["d1"]), int(meta["d2"]), int(meta["m"]),
            float(meta["p"]), int(meta["seed"]))
    else:
        m = int(m_value if m_value is not None else (ec.m or 0))
        if m < 1:
            raise ConfigError("recovery requires m >= 1")
        ensemble = build_sensing_ensemble(d1, d2, m, ec.p, seed)
    if (ensemble.d1, ensemble.d2) != (d1, d2):
        raise ConfigError(f"ensemble shape {(ensemble.d1, ensemble.d2)} != matrix {M.shape}")
    if ec.y_file is not None:
        counts = np.loadtxt(ec.y_file, dtype=np.int64, ndmin=1)
        y = CompressiveObservations(counts=counts)
        if len(y) != ensemble.m:
            raise ConfigError(f"y has {len(y)} counts but ensemble has m={ensemble.m}")
    else:
        y = sample_compressive_counts(ensemble, M, seed + COUNT_SEED_OFFSET)
    return ensemble, y


# ---------------------------------------------------------------------------
# Solving and metrics
# ---------------------------------------------------------------------------

def run_single_solve(ec, M, mask, seed, rho=None, m_value=None, p_obs=None, penalty=None):
    """Observe + solve one instance; returns (Mhat, trace, fset, extras)."""
    if ec.mode == "completion":
        obs = make_completion_observations(ec, M, mask, seed, p_obs=p_obs)
        fset = feasible_set_for(ec, M)
        obj = completion_objective(obs, fset)
        obs_extras = {"observed": len(obs)}
    else:
        ensemble, y = make_recovery_observations(ec, M, seed, m_value=m_value)
        fset = feasible_set_for(ec, M, m_value=ensemble.m)
        obj = recovery_objective(ensemble, y.counts, fset)
        obs_extras = {"m": ensemble.m}

    lam = penalty if penalty is not None else ec.penalty
    if lam is None:
        lam = select_lambda_default(fset, *M.shape)
    config = SolverConfig(max_iter=ec.max_iter, step_recip=ec.step_recip,
                          step_scale=ec.step_scale, penalty=lam, tol=ec.tol,
                          mode=ec.mode,
                          stop_on_objective_delta=ec.stop_on_objective_delta)
    if ec.solver == "pmlsvt":
        Mhat, trace = pmlsvt(obj, fset, X0=None, config=config)
    elif ec.solver == "proximal":
        Mhat, trace = proximal_gradient(obj, fset, default_init(obj, fset), config)
    else:
        Mhat, trace = accelerated_proximal_gradient(obj, fset, default_init(obj, fset), config)
    return Mhat, trace, fset, obs_extras


def normalized_error(ec, M, Mhat, fset):
    """R/I^2 for recovery, R/(d1*d2) for completion."""
    R = squared_error(M, Mhat)
    if ec.mode == "recovery":
        return R / fset.total_intensity**2
    return R / (M.shape[0] * M.shape[1])


def metrics_lines(ec, M, mask, Mhat, fset, trace, wall_time):
    R = squared_error(M, Mhat)
    lines = [f"mode={ec.mode}", f"d1={M.shape[0]}", f"d2={M.shape[1]}",
             f"R={R!r}"]
    if ec.mode == "recovery":
        lines.append(f"normalized_error={R / fset.total_intensity**2!r}")
        lines.append("normalization=I^2")
    else:
        lines.append(f"normalized_error={R / (M.shape[0] * M.shape[1])!r}")
        lines.append("normalization=d1*d2")
    if ec.source == "counts":
        # no intensity ground truth: report the data fit on observed cells
        resid = float(np.sum(((M - Mhat) * mask) ** 2))
        lines.append(f"R_observed={resid!r}")
        lines.append("kl=nan")
        lines.append("hellinger=nan")
    else:
        if M.min() > 0 and Mhat.min() > 0:
            lines.append(f"kl={kl_matrix(M, Mhat)!r}")
        else:
            lines.append("kl=inf")
        lines.append(f"hellinger={hellinger_matrix(np.maximum(M, 0), np.maximum(Mhat, 0))!r}")
    lines.append(f"iterations={trace.iterations_run}")
    lines.append(f"terminated_by={trace.terminated_by}")
    if trace.objective_values:
        lines.append(f"final_objective={trace.objective_values[-1]!r}")
    lines.append(f"wall_time_s={wall_time:.6f}")
    return lines


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_synth(ec, out_dir, regen_from_seed=False):
    """Write ground truth and observations: M.csv plus obs.csv or y.csv."""
    ec.validate()
    os.makedirs(out_dir, exist_ok=True)
    M, mask = build_ground_truth(ec)
    save_dense_csv(os.path.join(out_dir, "M.csv"), M)
    if ec.mode == "completion":
        obs = make_completion_observations(ec, M, mask, ec.obs_seed)
        save_observations_csv(os.path.join(out_dir, "obs.csv"), obs)
    else:
        ensemble, y = make_recovery_observations(ec, M, ec.obs_seed)
        _atomic_write_text(os.path.join(out_dir, "y.csv"),
                           "\n".join(str(v) for v in y.counts) + "\n")
        meta = (f"d1 = {ensemble.d1}\nd2 = {ensemble.d2}\nm = {ensemble.m}\n"
                f"p = {ensemble.p!r}\nseed = {ensemble.seed}\n")
        _atomic_write_text(os.path.join(out_dir, "ensemble.meta"), meta)
        if not regen_from_seed:
            save_ensemble(os.path.join(out_dir, "ensemble.bin"), ensemble)
    return 0


def cmd_solve(ec, out_dir):
    """Run one solve; write Mhat.csv, trace.csv and a flat metrics file."""
    ec.validate()
    os.makedirs(out_dir, exist_ok=True)
    M, mask = build_ground_truth(ec)
    start = time.perf_counter()
    try:
        Mhat, trace, fset, _ = run_single_solve(ec, M, mask, ec.obs_seed)
    except SolverAbort as exc:
        exc.trace.to_csv(os.path.join(out_dir, "trace.csv"))
        print(f"plr solve: aborted: {exc}", file=sys.stderr)
        return 3
    wall = time.perf_counter() - start
    save_dense_csv(os.path.join(out_dir, "Mhat.csv"), Mhat)
    trace.to_csv(os.path.join(out_dir, "trace.csv"))
    lines = metrics_lines(ec, M, mask, Mhat, fset, trace, wall)
    _atomic_write_text(os.path.join(out_dir, "metrics.txt"), "\n".join(lines) + "\n")
    return 0


def _sweep_point(ec, value, trial):
    """One (sweep value, trial) cell; returns the normalized error."""
    seed = ec.obs_seed + trial
    rho = m_value = p_obs = penalty = None
    if ec.sweep_axis == "rho":
        rho = value
    elif ec.sweep_axis == "m":
        m_value = value
    elif ec.sweep_axis == "p_obs":
        p_obs = value
    else:
        penalty = value
    M, mask = build_ground_truth(ec, rho=rho)
    if ec.sweep_axis == "m" and ec.mode == "completion":
        m_value, p_obs = None, value / (M.shape[0] * M.shape[1])
    Mhat, _, fset, _ = run_single_solve(ec, M, mask, seed, rho=rho, m_value=m_value,
                                        p_obs=p_obs, penalty=penalty)
    return normalized_error(ec, M, Mhat, fset)


def cmd_sweep(ec, out_dir, threads=1):
    """Run trials at every sweep value; write value,mean,std rows sorted by value."""
    ec.validate(need_sweep=True)
    os.makedirs(out_dir, exist_ok=True)
    points = [(value, trial) for value in sorted(ec.sweep_values)
              for trial in range(ec.trials)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            errs = list(pool.map(lambda vt: _sweep_point(ec, *vt), points))
    else:
        errs = [_sweep_point(ec, *vt) for vt in points]
    lines = ["value,mean,std"]
    for i, value in enumerate(sorted(ec.sweep_values)):
        chunk = np.array(errs[i * ec.trials:(i + 1) * ec.trials])
        lines.append(f"{value!r},{chunk.mean()!r},{chunk.std(ddof=0)!r}")
    _atomic_write_text(os.path.join(out_dir, "sweep.csv"), "\n".join(lines) + "\n")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="plr",
        description="Poisson low-rank matrix recovery and completion experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("synth", "write ground truth and observations"),
                           ("solve", "run one solve and write metrics"),
                           ("sweep", "sweep one parameter axis")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", required=True, help="flat key=value experiment file")
        sp.add_argument("--out", default="out", help="output directory (default: out)")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--threads", type=int, default=None,
                        help="parallel sweep workers (default: PLR_THREADS or 1)")
        if name == "synth":
            sp.add_argument("--regen-from-seed", action="store_true",
                            help="record ensemble parameters instead of mask bits")
    args = parser.parse_args(argv)

    threads = args.threads
    if threads is None:
        threads = int(os.environ.get("PLR_THREADS", "1"))
    try:
        ec = ExperimentConfig.from_file(args.config, seed_override=args.seed)
        if args.command == "synth":
            return cmd_synth(ec, args.out, regen_from_seed=args.regen_from_seed)
        if args.command == "solve":
            return cmd_solve(ec, args.out)
        return cmd_sweep(ec, args.out, threads=threads)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"plr {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
