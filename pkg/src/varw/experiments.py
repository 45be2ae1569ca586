"""Experiment harnesses: LLN sweeps, concentration checks, distribution tests.

Each harness is deterministic given its config: per-trial stack seeds are
derived from the config seed with the same 64-bit mix the stacks use, rows
are emitted in config order, and CSV/report files are byte-stable across
invocations.  (n, seed) stabilization runs are independent and executed on
a process pool sized by the VARW_THREADS environment variable.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.stats import chi2

from .errors import AcceptanceCheckError, ValidationError
from .limit import LimitSolution, phi, sleep_profile, solve_fixed_point
from .model import ModelParams, SpectralData, compute_spectral, eta_norm, validate_model
from .simulator import _check_odometer, single_loop, single_loop_tilde, stabilize
from .stacks import StackSource, derive_seed

LLN_ROWS_HEADER = "experiment,n,seed,village,m_n,s_n,m_limit,s_limit,err_m_inf,err_s_inf,err_m_eta"
LLN_SUMMARY_HEADER = "n,metric,median,p90,runs"


def worker_count() -> int:
    """Worker parallelism: VARW_THREADS when set, else machine parallelism."""
    env = os.environ.get("VARW_THREADS")
    if env is not None:
        try:
            count = int(env)
        except ValueError as exc:
            raise ValidationError(f"VARW_THREADS must be an integer, got {env!r}") from exc
        if count < 1:
            raise ValidationError(f"VARW_THREADS must be >= 1, got {count}")
        return count
    return os.cpu_count() or 1


@dataclass(frozen=True, eq=False)
class LLNConfig:
    params: ModelParams
    n_values: list[int]
    seeds: list[int]
    tol: float = 1e-10


@dataclass(frozen=True, eq=False)
class ConcentrationConfig:
    params: ModelParams
    n: int
    M: np.ndarray
    a: float
    trials: int
    seed: int = 0


@dataclass(frozen=True, eq=False)
class LLNReport:
    rows: list[dict]
    summary: list[dict]
    limit: LimitSolution
    spectral: SpectralData
    rows_path: Path | None = None
    summary_path: Path | None = None


@dataclass(frozen=True, eq=False)
class ConcentrationReport:
    n: int
    a: float
    trials: int
    freq_s: float
    bound_s: float
    freq_phi: float
    bound_phi: float
    slack_s: float
    slack_phi: float
    violated: bool
    path: Path | None = None


@dataclass(frozen=True, eq=False)
class KappaReport:
    n: int
    trials: int
    p_values: list[float]
    statistics: list[float]
    bins: list[int]
    path: Path | None = None


def _lln_task(args):
    """Stabilize one (n, seed) run and verify the exact loop identity."""
    params, n, seed = args
    src = StackSource(params, n, seed)
    sim = stabilize(params, n, src)
    loop = single_loop(params, n, src, sim.M_star)
    fixed_point_ok = bool(
        np.array_equal(loop.Phi, sim.M_star) and np.array_equal(loop.S, sim.S_star)
    )
    return sim.M_star, sim.S_star, fixed_point_ok


def _format(value) -> str:
    return repr(float(value)) if isinstance(value, float) else str(value)


def _write_csv(path: Path, header: str, rows: list[tuple]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [header]
    lines.extend(",".join(_format(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_lln(config: LLNConfig, out_dir=None) -> LLNReport:
    """Convergence sweep of the stabilized system against the continuum limit.

    Solves the limit once, then for every (n, seed) pair runs a
    stabilization, records scaled odometer/sleeper profiles and their
    distances to the limit, and verifies the exact single-loop fixed-point
    identity.  A single identity failure fails the whole sweep.
    """
    params = validate_model(config.params, require_subcritical=True)
    if not config.n_values:
        raise ValidationError("n_values must be nonempty")
    if not config.seeds:
        raise ValidationError("seeds must be nonempty")
    spectral = compute_spectral(params)
    limit = solve_fixed_point(params, spectral, tol=config.tol)
    V = params.num_villages

    tasks = [(params, int(n), int(seed)) for n in config.n_values for seed in config.seeds]
    workers = min(worker_count(), len(tasks))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_lln_task, tasks, chunksize=1))
    else:
        results = [_lln_task(t) for t in tasks]

    rows: list[dict] = []
    per_n_errors: dict[int, dict[str, list[float]]] = {
        int(n): {"err_m_inf": [], "err_s_inf": [], "err_m_eta": []} for n in config.n_values
    }
    for (params_, n, seed), (M_star, S_star, fp_ok) in zip(tasks, results):
        if not fp_ok:
            raise AcceptanceCheckError(
                f"single-loop fixed-point identity failed at n={n}, seed={seed}"
            )
        m_n = M_star / n
        s_n = S_star / n
        err_m_inf = float(np.max(np.abs(m_n - limit.m_star)))
        err_s_inf = float(np.max(np.abs(s_n - limit.s_star)))
        err_m_eta = eta_norm(spectral, m_n - limit.m_star)
        per_n_errors[n]["err_m_inf"].append(err_m_inf)
        per_n_errors[n]["err_s_inf"].append(err_s_inf)
        per_n_errors[n]["err_m_eta"].append(err_m_eta)
        for x in range(V):
            rows.append(
                {
                    "experiment": "lln",
                    "n": n,
                    "seed": seed,
                    "village": x,
                    "m_n": float(m_n[x]),
                    "s_n": float(s_n[x]),
                    "m_limit": float(limit.m_star[x]),
                    "s_limit": float(limit.s_star[x]),
                    "err_m_inf": err_m_inf,
                    "err_s_inf": err_s_inf,
                    "err_m_eta": err_m_eta,
                }
            )

    summary: list[dict] = []
    for n in config.n_values:
        for metric in ("err_m_inf", "err_s_inf", "err_m_eta"):
            vals = per_n_errors[int(n)][metric]
            summary.append(
                {
                    "n": int(n),
                    "metric": metric,
                    "median": float(np.median(vals)),
                    "p90": float(np.percentile(vals, 90)),
                    "runs": len(vals),
                }
            )

    rows_path = summary_path = None
    if out_dir is not None:
        out = Path(out_dir)
        rows_path = out / "lln_rows.csv"
        summary_path = out / "lln_summary.csv"
        _write_csv(
            rows_path,
            LLN_ROWS_HEADER,
            [tuple(r[k] for k in LLN_ROWS_HEADER.split(",")) for r in rows],
        )
        _write_csv(
            summary_path,
            LLN_SUMMARY_HEADER,
            [tuple(r[k] for k in LLN_SUMMARY_HEADER.split(",")) for r in summary],
        )
    return LLNReport(
        rows=rows,
        summary=summary,
        limit=limit,
        spectral=spectral,
        rows_path=rows_path,
        summary_path=summary_path,
    )


def concentration_bounds(params: ModelParams, n: int, M: np.ndarray, a: float):
    """The two tail bounds for the single-loop deviation events at level a."""
    V = params.num_villages
    m1 = float(np.sum(np.abs(M)))
    nu1 = float(np.sum(params.init_actives))
    t_s = max(a * n - 2.0, 0.0)
    if t_s == 0.0:
        bound_s = 2.0 * V
    elif m1 == 0.0:
        bound_s = 0.0
    else:
        bound_s = 2.0 * V * float(np.exp(-2.0 * t_s**2 / m1))
    t_phi = max(a * n - nu1 - m1 / n - 2.0, 0.0)
    denom = 81.0 * (n + nu1 * n + a * n + m1)
    bound_phi = 4.0 * V * float(np.exp(-2.0 * t_phi**2 / denom))
    return bound_s, bound_phi


def run_concentration(config: ConcentrationConfig, out_path=None) -> ConcentrationReport:
    """Estimate the single-loop deviation tail frequencies at level a and
    compare them against their closed-form bounds.

    Each trial evaluates the single-loop map at the fixed odometer M on an
    independent stack source and measures the sup-norm distance of the
    scaled sleeper/outflux profiles from their continuum counterparts.  A
    frequency is flagged as a violation only if it exceeds its bound by more
    than three binomial standard errors.
    """
    params = validate_model(config.params, require_subcritical=True)
    n = int(config.n)
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    if not config.a > 0:
        raise ValidationError(f"a must be positive, got {config.a!r}")
    if config.trials < 1:
        raise ValidationError(f"trials must be >= 1, got {config.trials}")
    M = _check_odometer(params, config.M)
    m_scaled = M / n
    s_limit = sleep_profile(params, m_scaled)
    phi_limit = phi(params, m_scaled)

    hits_s = 0
    hits_phi = 0
    a = float(config.a)
    for t in range(config.trials):
        src = StackSource(params, n, derive_seed(config.seed, 1, t))
        res = single_loop(params, n, src, M)
        dev_s = float(np.max(np.abs(res.S / n - s_limit)))
        dev_phi = float(np.max(np.abs(res.Phi / n - phi_limit)))
        hits_s += dev_s >= a
        hits_phi += dev_phi >= a

    freq_s = hits_s / config.trials
    freq_phi = hits_phi / config.trials
    bound_s, bound_phi = concentration_bounds(params, n, M, a)
    p_s = min(bound_s, 1.0)
    p_phi = min(bound_phi, 1.0)
    slack_s = 3.0 * float(np.sqrt(p_s * (1.0 - p_s) / config.trials))
    slack_phi = 3.0 * float(np.sqrt(p_phi * (1.0 - p_phi) / config.trials))
    violated = freq_s > bound_s + slack_s or freq_phi > bound_phi + slack_phi

    report = ConcentrationReport(
        n=n,
        a=a,
        trials=config.trials,
        freq_s=freq_s,
        bound_s=bound_s,
        freq_phi=freq_phi,
        bound_phi=bound_phi,
        slack_s=slack_s,
        slack_phi=slack_phi,
        violated=violated,
        path=None,
    )
    if out_path is not None:
        path = Path(out_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [
            "experiment: concentration",
            f"n: {n}",
            f"M: {','.join(str(v) for v in M.tolist())}",
            f"a: {a!r}",
            f"trials: {config.trials}",
            f"freq_s: {freq_s!r}",
            f"bound_s: {bound_s!r}",
            f"slack_s: {slack_s!r}",
            f"freq_phi: {freq_phi!r}",
            f"bound_phi: {bound_phi!r}",
            f"slack_phi: {slack_phi!r}",
            f"violated: {str(violated).lower()}",
        ]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        report = replace(report, path=path)
    return report


def _pooled_chi_square(sample_a: np.ndarray, sample_b: np.ndarray, min_expected: float = 5.0):
    """Two-sample chi-square on integer samples with bins pooled so that
    every expected count reaches `min_expected`.  Returns (stat, dof, p, bins)."""
    lo = int(min(sample_a.min(), sample_b.min()))
    hi = int(max(sample_a.max(), sample_b.max()))
    count_a = np.bincount(sample_a - lo, minlength=hi - lo + 1).astype(np.float64)
    count_b = np.bincount(sample_b - lo, minlength=hi - lo + 1).astype(np.float64)
    n_a = count_a.sum()
    n_b = count_b.sum()
    total = n_a + n_b

    pooled_a: list[float] = []
    pooled_b: list[float] = []
    acc_a = acc_b = 0.0
    for ca, cb in zip(count_a, count_b):
        acc_a += ca
        acc_b += cb
        exp_a = n_a * (acc_a + acc_b) / total
        exp_b = n_b * (acc_a + acc_b) / total
        if exp_a >= min_expected and exp_b >= min_expected:
            pooled_a.append(acc_a)
            pooled_b.append(acc_b)
            acc_a = acc_b = 0.0
    if acc_a or acc_b:
        if pooled_a:
            pooled_a[-1] += acc_a
            pooled_b[-1] += acc_b
        else:
            pooled_a.append(acc_a)
            pooled_b.append(acc_b)
    k = len(pooled_a)
    if k < 2:
        raise ValidationError(
            "insufficient trials: sample pooling left fewer than two chi-square bins"
        )
    stat = 0.0
    for oa, ob in zip(pooled_a, pooled_b):
        ea = n_a * (oa + ob) / total
        eb = n_b * (oa + ob) / total
        stat += (oa - ea) ** 2 / ea + (ob - eb) ** 2 / eb
    p = float(chi2.sf(stat, k - 1))
    return float(stat), k - 1, p, k


def run_kappa_equivalence(
    params: ModelParams, n: int, M, trials: int, seed: int = 0, out_path=None
) -> KappaReport:
    """Two-sample test that resampling terminal notices preserves the
    outflux distribution.

    Each trial shares one stack source between the plain single-loop outflux
    and its resampled variant, then the per-village marginal samples are
    compared with a pooled two-sample chi-square.
    """
    params = validate_model(params)
    if trials < 1:
        raise ValidationError(f"trials must be >= 1, got {trials}")
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    M = _check_odometer(params, M)
    V = params.num_villages
    phis = np.empty((trials, V), dtype=np.int64)
    tildes = np.empty((trials, V), dtype=np.int64)
    for t in range(trials):
        src = StackSource(params, n, derive_seed(seed, 1, t))
        phis[t] = single_loop(params, n, src, M).Phi
        tildes[t] = single_loop_tilde(params, n, src, M, derive_seed(seed, 2, t))

    p_values: list[float] = []
    statistics: list[float] = []
    bins: list[int] = []
    for x in range(V):
        stat, _, p, k = _pooled_chi_square(phis[:, x], tildes[:, x])
        statistics.append(stat)
        p_values.append(p)
        bins.append(k)

    report = KappaReport(
        n=n, trials=trials, p_values=p_values, statistics=statistics, bins=bins, path=None
    )
    if out_path is not None:
        path = Path(out_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [
            "experiment: kappa-test",
            f"n: {n}",
            f"M: {','.join(str(v) for v in M.tolist())}",
            f"trials: {trials}",
        ]
        for x in range(V):
            lines.append(f"village_{x}_p_value: {p_values[x]!r}")
            lines.append(f"village_{x}_statistic: {statistics[x]!r}")
            lines.append(f"village_{x}_bins: {bins[x]}")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        report = replace(report, path=path)
    return report
