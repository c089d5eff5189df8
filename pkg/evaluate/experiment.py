"""
Experiment harness: coreset fits against the full-data fit

For every error level epsilon and repetition, a CRGMM coreset is built, the
Uni and LFKF baselines are drawn at the same number of pairs Gamma, each is
fitted, and the fitted parameters are scored on the full data. The quality
metric is the likelihood ratio gamma_S = 2 (V*_S - V*).
"""

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from coreset.baselines import lfkf_baseline, uniform_baseline
from coreset.sampling import SamplerConfig, build_coreset, theoretical_sizes
from fit.em import FitConfig, fit
from generate.synthetic import GenConfig, generate
from model.types import Coreset, ModelBounds, TimeSeriesDataset
from utils.parallel import parallel_map
from utils.rng import stream

logger = logging.getLogger(__name__)

METHODS = ('crgmm', 'uni', 'lfkf')


def likelihood_ratio(v_full: float, v_coreset: float) -> float:
    """gamma_S = 2 (V*_S - V*); negative when the coreset fit beats the full-data optimum"""
    return 2.0 * (v_coreset - v_full)


@dataclass(frozen=True)
class SizeSpec:
    """Explicit (M, L), or the leading constants of the theoretical sizes"""
    c_entity: float = 1.0
    c_time: float = 1.0
    m_entities: Optional[int] = None
    l_times: Optional[int] = None

    def sizes(self, epsilon: float, k: int, d: int, bounds: ModelBounds) -> Tuple[int, int]:
        if self.m_entities is not None and self.l_times is not None:
            return self.m_entities, self.l_times
        m, l = theoretical_sizes(epsilon, k, d, bounds, self.c_entity, self.c_time)
        return self.m_entities or m, self.l_times or l


@dataclass
class ReportRow:
    """One method x epsilon x repetition"""
    method: str
    epsilon: float
    rep: int
    v_s: float
    gamma: float
    size: int
    t_c: float
    t_s: float


@dataclass
class AggregateRow:
    """Mean and std over repetitions of one method x epsilon"""
    method: str
    epsilon: float
    n_reps: int
    v_s_mean: float
    gamma_mean: float
    gamma_std: float
    size_mean: float
    time_mean: float


@dataclass
class ExperimentReport:
    """Per-repetition rows, aggregates and the full-data reference"""
    v_full: float
    t_full: float
    rows: List[ReportRow] = field(default_factory=list)
    aggregates: List[AggregateRow] = field(default_factory=list)
    failures: int = 0
    settings: Dict[str, object] = field(default_factory=dict)

    def rows_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.rows], columns=[f for f in ReportRow.__dataclass_fields__])

    def aggregate_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(a) for a in self.aggregates],
                            columns=[f for f in AggregateRow.__dataclass_fields__])

    def to_dict(self) -> dict:
        return {
            'v_full': self.v_full,
            't_full': self.t_full,
            'failures': self.failures,
            'settings': self.settings,
            'rows': [asdict(r) for r in self.rows],
            'aggregates': [asdict(a) for a in self.aggregates],
        }


def aggregate(rows: Sequence[ReportRow]) -> List[AggregateRow]:
    """Mean and unbiased std of gamma_S per (method, epsilon), in first-seen order"""
    frame = pd.DataFrame([asdict(r) for r in rows])
    if frame.empty:
        return []
    result = []
    for (method, epsilon), group in frame.groupby(['method', 'epsilon'], sort=False):
        n = len(group)
        result.append(AggregateRow(
            method=method,
            epsilon=float(epsilon),
            n_reps=n,
            v_s_mean=float(group['v_s'].mean()),
            gamma_mean=float(group['gamma'].mean()),
            gamma_std=float(group['gamma'].std(ddof=1)) if n > 1 else math.nan,
            size_mean=float(group['size'].mean()),
            time_mean=float((group['t_c'] + group['t_s']).mean()),
        ))
    return result


def _fit_and_score(data: TimeSeriesDataset, coreset: Coreset, fit_config: FitConfig,
                   v_full: float, method: str, epsilon: float, rep: int, t_c: float) -> ReportRow:
    """Fit on the coreset and score on the full data; size is the coreset's distinct pairs"""
    result = fit(data, coreset, fit_config)
    return ReportRow(method=method, epsilon=epsilon, rep=rep, v_s=result.objective,
                     gamma=likelihood_ratio(v_full, result.objective), size=coreset.size,
                     t_c=t_c, t_s=result.wall_time)


def run_experiment(gen_config: GenConfig, epsilons: Sequence[float], reps: int, fit_config: FitConfig,
                   size_constants: SizeSpec = SizeSpec(), methods: Sequence[str] = METHODS,
                   full_coverage: bool = False, threads: int = 1,
                   data: Optional[TimeSeriesDataset] = None,
                   bounds: Optional[ModelBounds] = None) -> ExperimentReport:
    """Full-data fit once, then every method x epsilon x repetition at matched Gamma"""
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")
    unknown = set(methods) - set(METHODS)
    if unknown or 'crgmm' not in methods:
        raise ValueError(f"Methods must include 'crgmm' and be drawn from {METHODS}, got {list(methods)}")

    if data is None:
        data, truth = generate(gen_config, threads=threads)
        if bounds is None:
            bounds = ModelBounds.from_params(truth.params, gen_config.lambda_param)
    elif bounds is None:
        raise ValueError("Model bounds are required when the dataset is supplied")

    full = fit(data, None, fit_config)
    v_full = full.objective
    logger.info(f"Full-data fit: V* = {v_full:.6f} in {full.wall_time:.2f}s")

    def repetition(task: Tuple[int, float, int]) -> Tuple[List[ReportRow], int]:
        eps_index, epsilon, rep = task
        seed = int(stream(gen_config.seed, 'repetition', eps_index, rep).integers(0, 2 ** 63))
        m, l = size_constants.sizes(epsilon, fit_config.k, data.d, bounds)
        rows, failures = [], 0

        # baselines match the distinct pairs of the CRGMM coreset, or its M L draws if it failed
        gamma_size = m * l
        try:
            sampler = SamplerConfig(m_entities=m, l_times=l, bounds=bounds, k=fit_config.k,
                                    seed=seed, full_coverage=full_coverage)
            coreset, _, t_c = build_coreset(data, sampler)
            gamma_size = coreset.size
            rows.append(_fit_and_score(data, coreset, fit_config, v_full, 'crgmm', epsilon, rep, t_c))
        except Exception as e:
            logger.warning(f"crgmm repetition {rep} at epsilon={epsilon} failed: {e}")
            failures += 1

        for method in methods:
            if method == 'crgmm':
                continue
            try:
                started = time.perf_counter()
                if full_coverage:
                    baseline = Coreset.identity(data)
                elif method == 'uni':
                    baseline = uniform_baseline(data, gamma_size, seed)
                else:
                    baseline = lfkf_baseline(data, gamma_size, fit_config.k, seed)
                t_c = time.perf_counter() - started
                rows.append(_fit_and_score(data, baseline, fit_config, v_full, method, epsilon, rep, t_c))
            except Exception as e:
                logger.warning(f"{method} repetition {rep} at epsilon={epsilon} failed: {e}")
                failures += 1
        return rows, failures

    tasks = [(j, float(eps), rep) for j, eps in enumerate(epsilons) for rep in range(reps)]
    outcomes = parallel_map(repetition, tasks, threads)

    report = ExperimentReport(v_full=v_full, t_full=full.wall_time)
    for rows, failures in outcomes:
        report.rows.extend(rows)
        report.failures += failures
    order = {m: n for n, m in enumerate(METHODS)}
    report.rows.sort(key=lambda r: (r.epsilon, order[r.method], r.rep))
    report.aggregates = aggregate(report.rows)
    report.settings = {
        'gen': asdict(gen_config),
        'fit': asdict(fit_config),
        'sizes': asdict(size_constants),
        'bounds': asdict(bounds),
        'epsilons': [float(e) for e in epsilons],
        'reps': reps,
        'methods': list(methods),
        'full_coverage': full_coverage,
    }
    if report.failures:
        logger.warning(f"{report.failures} repetition(s) failed and were excluded")
    return report
