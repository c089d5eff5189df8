#!/usr/bin/env python3
"""
tscoreset: coresets for clustering GMM-AR(1) time series

Command-line entry point binding generation, coreset construction, weighted
EM fitting, evaluation and the baseline experiment together.

Usage:
    python app.py generate --preset desk --seed 7 --out data/desk.csv
    python app.py coreset --data data/desk.csv --method crgmm --m 60 --l 40 --k 3 --seed 1
    python app.py fit --data data/desk.csv --coreset data/desk.coreset.json --k 3 --seed 1
    python app.py eval --data data/desk.csv --params data/desk.params.json --seed 1
    python app.py experiment --preset desk --epsilons 0.1 0.2 --reps 5 --seed 1
"""

import sys
import argparse
import logging
import time
from dataclasses import asdict
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from dotenv import load_dotenv

# Load environment variables from .env file before the config is built
load_dotenv()

from coreset.baselines import lfkf_baseline, uniform_baseline
from coreset.sampling import SamplerConfig, build_coreset, theoretical_sizes
from evaluate.experiment import METHODS, SizeSpec, likelihood_ratio, run_experiment
from fit.em import FitConfig, fit
from generate.synthetic import GenConfig, generate
from model.likelihood import coreset_objective, full_objective, normalized_objective
from model.types import ModelBounds
from utils.config import config
from utils.database import RunDatabase
from utils.errors import NumericError
from utils.logger import setup_logging
from utils.rng import RNG_NAME, check_seed
from utils import formats

__version__ = "1.0.0"

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

# Settings that must not change an artifact's bytes
NON_ECHOED = {'func', 'threads', 'log_level', 'ledger'}


def _seed(value: str) -> int:
    try:
        return check_seed(int(value))
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def _sidecar(path: Path, suffix: str) -> Path:
    """data/x.csv -> data/x<suffix>"""
    return path.with_name(path.stem + suffix)


def _echo(args: argparse.Namespace) -> Dict[str, Any]:
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items())
            if k not in NON_ECHOED}


def _bounds(args: argparse.Namespace):
    """Model bounds from a ground-truth file when given, else from --d-ratio/--lambda"""
    if getattr(args, 'truth', None):
        params, _ = formats.read_truth(args.truth)
        return ModelBounds.from_params(params, args.lambda_param)
    return ModelBounds(args.d_ratio, args.lambda_param)


def _finish(args: argparse.Namespace, manifest_path: Path, artifacts: List[Path],
            started: float, report=None) -> None:
    """Hash artifacts into the run manifest and record the run in the ledger if one is set"""
    manifest = formats.RunManifest(command=args.command, config=_echo(args), seed=args.seed,
                                   version=__version__, rng=RNG_NAME)
    for path in artifacts:
        manifest.add_artifact(path)
    manifest.write(manifest_path)

    ledger = args.ledger or config.get_ledger_path()
    if ledger:
        db = RunDatabase(ledger)
        run_id = db.record_run(manifest, time.perf_counter() - started)
        if report is not None:
            db.record_rows(run_id, report.rows)


# Commands

def cmd_generate(args: argparse.Namespace) -> int:
    """Write a synthetic dataset and its ground truth"""
    started = time.perf_counter()
    overrides = dict(n_entities=args.n, series_len=args.t, d=args.d, k=args.k,
                     lambda_param=args.lambda_param, init=args.init)
    if args.preset:
        gen = GenConfig.from_preset(args.preset, args.seed, **overrides)
    elif args.n is None or args.t is None:
        raise ValueError("Either --preset or both --n and --t are required")
    else:
        gen = GenConfig(seed=args.seed, **{k: v for k, v in overrides.items() if v is not None})

    data, truth = generate(gen, threads=config.threads(args.threads))
    out = Path(args.out or Path(config.get('DATA_DIR')) / f"dataset.{args.format}")
    truth_path = Path(args.truth_out) if args.truth_out else _sidecar(out, '.truth.json')
    formats.write_dataset(data, out, args.format)
    formats.write_truth(truth.params, truth.labels, truth_path)
    _finish(args, _sidecar(out, '.manifest.json'), [out, truth_path], started)

    print(f"Wrote {out}: N={data.N}, sum T_i={data.total_pairs}, d={data.d}")
    print(f"Ground truth: {truth_path}")
    return EXIT_OK


def cmd_coreset(args: argparse.Namespace) -> int:
    """Build a CRGMM, Uni or LFKF coreset from a dataset file"""
    started = time.perf_counter()
    data = formats.read_dataset(args.data)
    bounds = _bounds(args)
    out = Path(args.out) if args.out else _sidecar(Path(args.data), f'.{args.method}.coreset.json')
    report_path = _sidecar(out, '.report.json')
    restarts = args.restarts or config.get('KMEANS_RESTARTS')

    if args.method == 'crgmm':
        if args.m is not None and args.l is not None:
            m, l = args.m, args.l
        elif args.epsilon is not None:
            constants = config.get('SIZE_CONSTANTS')
            m, l = theoretical_sizes(args.epsilon, args.k, data.d, bounds,
                                     args.c_entity or constants['c_entity'], args.c_time or constants['c_time'])
            m, l = args.m or m, args.l or l
        else:
            raise ValueError("CRGMM needs --m and --l, or --epsilon")
        sampler = SamplerConfig(m_entities=m, l_times=l, bounds=bounds, k=args.k, restarts=restarts,
                                seed=args.seed, full_coverage=args.full_coverage,
                                threads=config.threads(args.threads))
        coreset, profile, elapsed = build_coreset(data, sampler)
        report = {'method': 'crgmm', 'M': m, 'L': l, 'bounds': asdict(bounds),
                  'entity_bound': profile.entity_bound(bounds), 'time_bound': profile.time_bound(bounds),
                  'size': coreset.size, 't_c': elapsed, 'sensitivities': profile.to_dict()}
    else:
        if args.gamma is None:
            raise ValueError(f"{args.method} needs --gamma")
        tick = time.perf_counter()
        if args.method == 'uni':
            coreset = uniform_baseline(data, args.gamma, args.seed)
        else:
            coreset = lfkf_baseline(data, args.gamma, args.k, args.seed, restarts)
        report = {'method': args.method, 'gamma': args.gamma, 'size': coreset.size,
                  't_c': time.perf_counter() - tick}

    formats.write_coreset(coreset, out)
    formats.write_report(report, report_path)
    _finish(args, _sidecar(out, '.manifest.json'), [out], started)

    print(f"Wrote {out}: {len(coreset.entity_ids)} entities, {coreset.size} pairs "
          f"(total entity weight {coreset.total_entity_weight:.4f})")
    return EXIT_OK


def cmd_fit(args: argparse.Namespace) -> int:
    """Fit the mixture on the full data or on a coreset"""
    started = time.perf_counter()
    data = formats.read_dataset(args.data)
    coreset = formats.read_coreset(args.coreset) if args.coreset else None
    init = formats.read_params(args.init) if args.init else None
    fit_config = FitConfig(
        k=args.k,
        max_iters=args.max_iters or config.get('EM_MAX_ITERS'),
        tol=args.tol or config.get('EM_TOL'),
        n_init=args.n_init or config.get('EM_N_INIT'),
        seed=args.seed,
        bounds=_bounds(args),
        fix_sigma=args.fix_sigma,
        fix_ar=args.fix_ar,
    )
    result = fit(data, coreset, fit_config, init)

    source = Path(args.coreset or args.data)
    out = Path(args.out) if args.out else _sidecar(source, '.params.json')
    formats.write_params(result.params, out)
    formats.write_report({
        'objective': result.objective,
        'train_objective': result.train_objective,
        'trace': result.trace,
        'n_iter': result.n_iter,
        'converged': result.converged,
        't_s': result.wall_time,
        'coreset_size': coreset.size if coreset else data.total_pairs,
    }, _sidecar(out, '.report.json'))
    _finish(args, _sidecar(out, '.manifest.json'), [out], started)

    print(f"Wrote {out}: V = {result.objective:.6f} after {result.n_iter} iterations"
          f"{' (converged)' if result.converged else ''}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    """Score parameters on a dataset: V = f, f', phi, and gamma_S against a reference"""
    started = time.perf_counter()
    threads = config.threads(args.threads)
    data = formats.read_dataset(args.data)
    params = formats.read_params(args.params)
    value = full_objective(data, params, threads)
    f_prime, phi, alpha_prime = normalized_objective(data, params, threads)
    metrics: Dict[str, Any] = {'V': value, 'f_prime': f_prime, 'phi': phi, 'alpha_prime': alpha_prime}
    if args.reference is not None:
        metrics['gamma'] = likelihood_ratio(args.reference, value)
    if args.coreset:
        coreset = formats.read_coreset(args.coreset)
        metrics['f_prime_coreset'] = coreset_objective(data, coreset, params, alpha_prime)

    print(f"V = {value:.10g}  (f' = {f_prime:.10g}, phi = {phi:.10g})")
    if 'gamma' in metrics:
        print(f"gamma_S = {metrics['gamma']:.10g}")
    if 'f_prime_coreset' in metrics:
        print(f"f'_S = {metrics['f_prime_coreset']:.10g}")

    if args.out:
        out = Path(args.out)
        formats.write_report(metrics, out)
        _finish(args, _sidecar(out, '.manifest.json'), [out], started)
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    """Coreset methods against the full-data fit over epsilons and repetitions"""
    started = time.perf_counter()
    overrides = dict(n_entities=args.n, series_len=args.t, d=args.d, k=args.k, lambda_param=args.lambda_param)
    if args.preset:
        gen = GenConfig.from_preset(args.preset, args.seed, **overrides)
    elif args.n is None or args.t is None:
        raise ValueError("Either --preset or both --n and --t are required")
    else:
        gen = GenConfig(seed=args.seed, **{k: v for k, v in overrides.items() if v is not None})

    constants = config.get('SIZE_CONSTANTS')
    sizes = SizeSpec(c_entity=args.c_entity or constants['c_entity'], c_time=args.c_time or constants['c_time'],
                     m_entities=args.m, l_times=args.l)
    fit_config = FitConfig(
        k=gen.k,
        max_iters=args.max_iters or config.get('EM_MAX_ITERS'),
        tol=args.tol or config.get('EM_TOL'),
        n_init=args.n_init or config.get('EM_N_INIT'),
        seed=args.seed,
        bounds=ModelBounds(lambda_param=gen.lambda_param),
    )
    report = run_experiment(gen, args.epsilons, args.reps, fit_config, sizes,
                            methods=args.methods or METHODS, full_coverage=args.full_coverage,
                            threads=config.threads(args.threads))

    out = Path(args.out or Path(config.get('DATA_DIR')) / 'experiment')
    out.mkdir(parents=True, exist_ok=True)
    rows_path = formats.write_frame(report.rows_frame(), out / 'rows.csv')
    aggregate_path = formats.write_frame(report.aggregate_frame(), out / 'aggregate.csv')
    report_path = formats.write_report(report.to_dict(), out / 'report.json')
    _finish(args, out / 'manifest.json', [rows_path, aggregate_path, report_path], started, report)

    print(f"V* (full data) = {report.v_full:.6f}")
    for row in report.aggregates:
        print(f"{row.method:>6} eps={row.epsilon:<6g} gamma_S = {row.gamma_mean:.4f} +/- {row.gamma_std:.4f} "
              f"(size {row.size_mean:.0f}, {row.time_mean:.2f}s)")
    if report.failures:
        print(f"{report.failures} repetition(s) failed")
    return EXIT_OK


# Parser

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--seed', type=_seed, required=True, help='Random seed in [0, 2**64)')
    parser.add_argument('--threads', type=int, default=0, help='Worker threads (0 = auto; TSC_THREADS overrides)')
    parser.add_argument('--log-level', default=None, help='Logging level (default LOG_LEVEL or INFO)')
    parser.add_argument('--ledger', default=None, help='sqlite run ledger path (default RUN_LEDGER)')


def _add_shape(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--preset', choices=sorted(config.get('PRESETS')), help='Named dataset shape')
    parser.add_argument('--n', type=int, help='Number of entities N')
    parser.add_argument('--t', type=int, help='Series length T')
    parser.add_argument('--d', type=int, help='Feature dimension d')
    parser.add_argument('--k', type=int, help='Number of components k')
    parser.add_argument('--lambda', dest='lambda_param', type=float, help='AR bound lambda')


def _add_bounds(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--d-ratio', type=float, default=1.0, help='Covariance condition bound D')
    parser.add_argument('--lambda', dest='lambda_param', type=float, default=0.01, help='AR bound lambda')
    parser.add_argument('--truth', help='Ground-truth file; D is taken from its covariances')


def _add_em(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--max-iters', type=int, help='EM iteration cap (default EM_MAX_ITERS)')
    parser.add_argument('--tol', type=float, help='EM relative tolerance (default EM_TOL)')
    parser.add_argument('--n-init', type=int, help='EM restarts (default EM_N_INIT)')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='tscoreset', description='Coresets for GMM-AR(1) time-series clustering')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    commands = parser.add_subparsers(dest='command', required=True)

    p = commands.add_parser('generate', help='Synthetic dataset and ground truth')
    _add_common(p)
    _add_shape(p)
    p.add_argument('--init', choices=['stationary', 'zero'], help='Initial AR state')
    p.add_argument('--format', choices=['csv', 'bin'], default='csv', help='Dataset file format')
    p.add_argument('--out', help='Dataset path (default DATA_DIR/dataset.<format>)')
    p.add_argument('--truth-out', help='Ground-truth path (default next to the dataset)')
    p.set_defaults(func=cmd_generate)

    p = commands.add_parser('coreset', help='CRGMM coreset or a baseline')
    _add_common(p)
    _add_bounds(p)
    p.add_argument('--data', required=True, help='Dataset file')
    p.add_argument('--method', choices=['crgmm', 'uni', 'lfkf'], default='crgmm')
    p.add_argument('--k', type=int, required=True, help='Number of components k')
    p.add_argument('--m', type=int, help='Entity sample size M')
    p.add_argument('--l', type=int, help='Time sample size L')
    p.add_argument('--epsilon', type=float, help='Error level for the theoretical sizes')
    p.add_argument('--c-entity', type=float, help='Leading constant of M')
    p.add_argument('--c-time', type=float, help='Leading constant of L')
    p.add_argument('--gamma', type=int, help='Number of pairs for uni/lfkf')
    p.add_argument('--restarts', type=int, help='k-means restarts (default KMEANS_RESTARTS)')
    p.add_argument('--full-coverage', action='store_true', help='Every pair with unit weights')
    p.add_argument('--out', help='Coreset path')
    p.set_defaults(func=cmd_coreset)

    p = commands.add_parser('fit', help='Weighted EM fit')
    _add_common(p)
    _add_bounds(p)
    _add_em(p)
    p.add_argument('--data', required=True, help='Dataset file')
    p.add_argument('--coreset', help='Coreset file (default: full data)')
    p.add_argument('--k', type=int, required=True, help='Number of components k')
    p.add_argument('--init', help='Starting params file')
    p.add_argument('--fix-sigma', action='store_true', help='Keep covariances at their start')
    p.add_argument('--fix-ar', action='store_true', help='Keep AR coefficients at their start')
    p.add_argument('--out', help='Params path')
    p.set_defaults(func=cmd_fit)

    p = commands.add_parser('eval', help='Objective values of params on a dataset')
    _add_common(p)
    p.add_argument('--data', required=True, help='Dataset file')
    p.add_argument('--params', required=True, help='Params file')
    p.add_argument('--coreset', help='Also evaluate f\' on this coreset')
    p.add_argument('--reference', type=float, help='Reference V* for gamma_S')
    p.add_argument('--out', help='Metrics path')
    p.set_defaults(func=cmd_eval)

    p = commands.add_parser('experiment', help='Coreset methods against the full-data fit')
    _add_common(p)
    _add_shape(p)
    _add_em(p)
    p.add_argument('--epsilons', type=float, nargs='+', default=[0.1, 0.2, 0.3, 0.4, 0.5])
    p.add_argument('--reps', type=int, default=5, help='Repetitions per epsilon')
    p.add_argument('--methods', nargs='+', choices=['crgmm', 'uni', 'lfkf'])
    p.add_argument('--m', type=int, help='Fixed entity sample size M')
    p.add_argument('--l', type=int, help='Fixed time sample size L')
    p.add_argument('--c-entity', type=float, help='Leading constant of M')
    p.add_argument('--c-time', type=float, help='Leading constant of L')
    p.add_argument('--full-coverage', action='store_true', help='Every method uses every pair')
    p.add_argument('--out', help='Output directory (default DATA_DIR/experiment)')
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level or config.get('LOG_LEVEL'), config.get('LOG_FILE'))

    try:
        return args.func(args)
    except (NumericError, np.linalg.LinAlgError, IndexError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_RUNTIME
    except ValueError as e:
        logger.error(f"{args.command}: {e}")
        return EXIT_USAGE


if __name__ == '__main__':
    sys.exit(main())
