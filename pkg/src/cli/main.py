"""
Command-line Entry Point
"""

import argparse
import logging
import warnings
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from ..diagnostics.comparison import compare_models
from ..diagnostics.csd import csd_battery, pesaran_cd_permutation, pooled_ols_residuals
from ..errors import DiagnosticsWarning, PanelValidationError, ToolkitError
from ..estimation.design import load_spec_file
from ..panel.dataset import coal_predicate
from ..report.manifest import RunManifest
from ..report.tables import (
    coefficient_frame, coefplot_frame, csd_frame, decomposition_matrix, impacts_frame, lincom_frame,
    regression_text, statistics_frame, summary_statistics, write_table, write_text,
)
from ..services.estimation_service import EstimationService, load_fits
from ..services.workspace_service import WorkspaceService
from ..settings import ToolkitSettings, configure_logging, load_settings
from ..synth.generators import DgpConfig, dump_csvs, gen_blobs, gen_factor, gen_spatial, gen_twfe, torus_weights
from ..typology.clustering import cluster_features, write_labels
from ..typology.features import read_features, split_columns, standardize

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_ESTIMATION = 3
EXIT_DIAGNOSTICS = 4
EXTENSIONS = {'csv': 'csv', 'json': 'json', 'text': 'txt'}


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out) if args.out else Path(args.workspace) / "outputs" / args.command
    out.mkdir(parents=True, exist_ok=True)
    return out


def _table_path(out: Path, stem: str, fmt: str) -> Path:
    return out / f"{stem}.{EXTENSIONS[fmt]}"


def _load_configs(args: argparse.Namespace):
    configs = load_spec_file(args.spec)
    if getattr(args, 'model', None):
        wanted = set(args.model)
        configs = [c for c in configs if c.name in wanted]
        if not configs:
            raise PanelValidationError(f"No model named {sorted(wanted)} in {args.spec}")
    if getattr(args, 'subset', None):
        configs = [c.model_copy(update={'sample': args.subset}) for c in configs]
    return configs


def cmd_ingest(args: argparse.Namespace, settings: ToolkitSettings) -> int:
    store = WorkspaceService(args.workspace)
    report = store.ingest(args.panel, args.adjacency, args.features, args.fips_remap)
    out = _out_dir(args)
    workspace = store.load()
    manifest_hash = report.manifest_hash
    outputs = {
        'missingness': write_table(report.missingness, out / "missingness.csv", 'csv', manifest_hash),
        'summary': write_table(summary_statistics(workspace.panel), out / "summary_statistics.csv", 'csv', manifest_hash),
    }
    if report.absent_from_adjacency:
        absent = pd.DataFrame({'fips': report.absent_from_adjacency})
        outputs['absent_from_adjacency'] = write_table(absent, out / "absent_from_adjacency.csv", 'csv', manifest_hash)
    store.record_outputs(report.run_id, outputs)
    print(f"Workspace {args.workspace}: N={report.n_entities}, T={report.n_years}, {report.n_variables} variables")
    print(report.missingness.to_string(index=False))
    if report.absent_from_adjacency:
        print(f"Warning: {len(report.absent_from_adjacency)} entities have no neighbors in the adjacency file")
    return EXIT_OK


def cmd_estimate(args: argparse.Namespace, settings: ToolkitSettings) -> int:
    store = WorkspaceService(args.workspace)
    workspace = store.load()
    configs = _load_configs(args)
    seed = settings.random.seed if args.seed is None else args.seed

    manifest = RunManifest(
        command="estimate",
        specs=[c.model_dump(mode='json') for c in configs],
        seeds={'seed': seed},
        options={'sims': args.sims, 'flip_sign': args.flip_sign, 'subset': args.subset},
    )
    manifest.add_input("spec", args.spec)
    for cfg in configs:
        if cfg.groups:
            manifest.add_input("groups", cfg.groups.path)
    store.add_inputs(manifest)
    h = manifest.hash

    service = EstimationService(workspace, settings, store)
    outcomes, failures = service.run_all(configs, seed=seed, n_sim=args.sims)
    run_id = store.record_run(manifest)
    out = _out_dir(args)
    outputs: Dict[str, Path] = {}

    for outcome in outcomes:
        service.persist(run_id, outcome)
        fit = outcome.fit
        name = fit.model_name
        outputs[f"{name}:coefficients"] = write_table(
            coefficient_frame([fit]), _table_path(out, f"{name}_coefficients", args.format), args.format, h, name
        )
        outputs[f"{name}:statistics"] = write_table(
            statistics_frame([fit]), _table_path(out, f"{name}_statistics", args.format), args.format, h, name
        )
        if outcome.impacts is not None:
            outputs[f"{name}:impacts"] = write_table(
                impacts_frame([outcome.impacts]), _table_path(out, f"{name}_impacts", args.format), args.format, h, name
            )
        if outcome.lincoms is not None:
            outputs[f"{name}:lincom"] = write_table(
                lincom_frame({name: outcome.lincoms}), _table_path(out, f"{name}_lincom", args.format), args.format, h, name
            )
        print(f"[fit {outcome.fit_id}] {outcome.config.title or name}")

    if outcomes:
        fits = [o.fit for o in outcomes]
        text = regression_text(fits, title=Path(args.spec).stem)
        outputs['regression'] = write_text(text, out / "regression.txt", h)
        print(text)
        outputs['coefplot'] = write_table(coefplot_frame(fits, flip_sign=args.flip_sign), out / "coefplot.csv", 'csv', h)
        comparable = _comparable_groups(fits)
        if comparable:
            table = pd.concat([compare_models(group) for group in comparable], ignore_index=True)
            outputs['comparison'] = write_table(table, _table_path(out, "comparison", args.format), args.format, h)
    manifest.write(out / "manifest.json")
    store.record_outputs(run_id, outputs)

    for name, exc in failures:
        logger.error(f"Model '{name}' failed: {exc}")
    return EXIT_ESTIMATION if failures else EXIT_OK


def _comparable_groups(fits) -> List[list]:
    groups: Dict[tuple, list] = {}
    for fit in fits:
        groups.setdefault((fit.dependent, fit.nobs), []).append(fit)
    return [g for g in groups.values() if len(g) > 1]


def cmd_diagnose(args: argparse.Namespace, settings: ToolkitSettings) -> int:
    store = WorkspaceService(args.workspace)
    workspace = store.load()
    seed = settings.random.seed if args.seed is None else args.seed
    manifest = RunManifest(
        command="diagnose",
        seeds={'seed': seed},
        options={'fits': args.fits, 'variables': args.variables, 'permutation': args.permutation},
    )
    store.add_inputs(manifest)
    stored_fits = load_fits(store, args.fits) if (args.fits or not args.variables) else []
    manifest.options['fit_ids'] = [s.fit_id for s in stored_fits]
    h = manifest.hash
    results = {}
    residual_pvalues = []

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter('always', DiagnosticsWarning)
        for stored in stored_fits:
            key = f"fit {stored.fit_id} ({stored.model_name}) residuals"
            tests = list(csd_battery(stored.residuals))
            if args.permutation:
                draws = settings.diagnostics.permutation_draws
                tests.append(pesaran_cd_permutation(stored.residuals, draws=draws, seed=seed))
            results[key] = tests
            residual_pvalues.append(tests[0].p_value)
        panel = workspace.panel
        if args.subset == 'coal':
            coal = coal_predicate(panel)
            panel = panel.select_entities([e for e in panel.entities if coal(e)])
        for var in args.variables or []:
            col = panel.get(var)
            y = np.where(col.mask, np.nan, col.values)
            results[f"{var} (raw)"] = list(csd_battery(y))
            results[f"{var} (pooled OLS residuals)"] = list(csd_battery(pooled_ols_residuals(y)))
    for w in caught:
        logger.warning(str(w.message))

    if not results:
        raise PanelValidationError("Nothing to diagnose: no fits in the registry and no variables given")
    out = _out_dir(args)
    table = csd_frame(results)
    run_id = store.record_run(manifest)
    path = write_table(table, _table_path(out, "csd", args.format), args.format, h)
    store.record_outputs(run_id, {'csd': path})
    manifest.write(out / "manifest.json")
    print(table.to_string(index=False))

    threshold = settings.diagnostics.warn_pvalue
    if any(p < threshold for p in residual_pvalues):
        logger.warning(f"Residual cross-sectional dependence at p < {threshold}")
        return EXIT_DIAGNOSTICS
    return EXIT_OK


def cmd_cluster(args: argparse.Namespace, settings: ToolkitSettings) -> int:
    typ = settings.typology
    seed = settings.random.seed if args.seed is None else args.seed
    store = None
    if args.features:
        if args.subset == 'coal':
            raise PanelValidationError("--subset coal needs the workspace panel; it cannot be combined with --features")
        frame = read_features(args.features)
        reference = frame.set_index('fips')
    else:
        store = WorkspaceService(args.workspace)
        workspace = store.load()
        frame = workspace.require_features()
        reference = frame.set_index('fips')
        if args.subset == 'coal':
            coal = coal_predicate(workspace.panel)
            frame = frame[[coal(f) for f in frame['fips']]].reset_index(drop=True)
    if args.reference is not None:
        reference = read_features(args.reference).set_index('fips')
    columns, passive = split_columns(frame, args.columns, args.passive)
    f = standardize(frame, columns=columns, passive=passive)
    manifest = RunManifest(
        command="cluster",
        seeds={'seed': seed},
        options={'k_max': args.k_max or typ.k_max, 'refs': args.refs or typ.gap_refs, 'k': args.k or typ.k},
    )
    if args.features:
        manifest.add_input("features", args.features)
    else:
        store.add_inputs(manifest)
    if args.reference is not None:
        manifest.add_input("reference", args.reference)
    result = cluster_features(
        f,
        k_max=args.k_max or typ.k_max,
        n_refs=args.refs or typ.gap_refs,
        seed=seed,
        k=args.k or typ.k,
        reference=reference,
    )
    h = manifest.hash
    out = Path(args.out) if args.out else Path(args.workspace or ".") / "outputs" / "cluster"
    out.mkdir(parents=True, exist_ok=True)
    profile = result.typology.profile.reset_index().rename(columns={'index': 'indicator'})
    selection = pd.DataFrame([{'criterion': k, 'k': v} for k, v in result.selection.choice.items()])
    outputs = {
        'curves': write_table(result.selection.curves(), _table_path(out, "k_curves", args.format), args.format, h),
        'choice': write_table(selection, _table_path(out, "k_choice", args.format), args.format, h),
        'profile': write_table(profile, _table_path(out, "type_profile", args.format), args.format, h),
        'labels': write_labels(result.typology, out / "labels.csv"),
    }
    if store is not None:
        store.record_outputs(store.record_run(manifest), outputs)
    manifest.write(out / "manifest.json")
    print(result.selection.note)
    print(f"Type sizes at k={result.typology.k}: {result.typology.sizes}")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace, settings: ToolkitSettings) -> int:
    seed = settings.random.seed if args.seed is None else args.seed
    if args.kind == 'blobs':
        written = dump_csvs(args.out, features=gen_blobs(args.clusters, args.n, args.sigma, args.sep, seed))
    else:
        cfg = DgpConfig(
            n=args.n, t=args.t, beta=args.beta, rho=args.rho, delta=args.delta,
            n_factors=args.factors, sigma=args.sigma, seed=seed,
        )
        if args.kind == 'twfe':
            panel, _ = gen_twfe(cfg)
            w = None
        elif args.kind == 'factor':
            panel, _ = gen_factor(cfg)
            w = None
        else:
            w = torus_weights(args.rows, args.n // args.rows) if args.rows else None
            panel, _, w = gen_spatial(cfg, w)
        written = dump_csvs(args.out, panel=panel, w=w)
    for kind, path in written.items():
        print(f"{kind}: {path}")
    return EXIT_OK


def cmd_summary(args: argparse.Namespace, settings: ToolkitSettings) -> int:
    store = WorkspaceService(args.workspace)
    workspace = store.load()
    manifest = RunManifest(command="summary", options={'subset': args.subset, 'variables': args.variables})
    h = manifest.hash
    out = _out_dir(args)
    outputs = {}
    samples = {'all': workspace.panel}
    coal = coal_predicate(workspace.panel)
    samples['coal'] = workspace.panel.select_entities([e for e in workspace.panel.entities if coal(e)])
    if args.subset:
        samples = {args.subset: samples[args.subset]}
    for label, panel in samples.items():
        table = summary_statistics(panel, args.variables)
        outputs[f"summary_{label}"] = write_table(table, _table_path(out, f"summary_{label}", args.format), args.format, h)
        if args.spec:
            service = EstimationService(workspace, settings)
            for cfg in load_spec_file(args.spec):
                design = service.design(cfg)
                names = [design.spec.dependent, *design.spec.regressors]
                derived = summary_statistics(design.panel.select_entities(panel.entities), names, design.spec.labels)
                stem = f"summary_{label}_{cfg.name}"
                outputs[stem] = write_table(derived, _table_path(out, stem, args.format), args.format, h)
        print(f"[{label}]")
        print(table.to_string(index=False))
    store.record_outputs(store.record_run(manifest), outputs)
    return EXIT_OK


def cmd_decompose(args: argparse.Namespace, settings: ToolkitSettings) -> int:
    store = WorkspaceService(args.workspace)
    workspace = store.load()
    configs = _load_configs(args)
    seed = settings.random.seed if args.seed is None else args.seed
    manifest = RunManifest(command="decompose", specs=[c.model_dump(mode='json') for c in configs], seeds={'seed': seed})
    manifest.add_input("spec", args.spec)
    service = EstimationService(workspace, settings, store)
    outcomes, failures = service.run_all(configs, seed=seed, n_sim=args.sims)
    if not outcomes:
        raise failures[0][1] if failures else PanelValidationError("No models to decompose")
    matrix = decomposition_matrix([o.fit for o in outcomes], flip_sign=not args.no_flip)
    out = _out_dir(args)
    path = write_table(matrix, _table_path(out, "decomposition", args.format), args.format, manifest.hash)
    store.record_outputs(store.record_run(manifest), {'decomposition': path})
    print(matrix.to_string(index=False))
    return EXIT_ESTIMATION if failures else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="paneltk",
        description="Spatio-temporal panel econometrics toolkit",
    )
    parser.add_argument('--config', type=str, default=None, help='Path to toolkit_config.yaml')
    sub = parser.add_subparsers(dest='command', required=True)

    def common(p: argparse.ArgumentParser, workspace_required: bool = True) -> None:
        p.add_argument('--workspace', type=str, required=workspace_required, help='Workspace directory')
        p.add_argument('--out', type=str, default=None, help='Output directory')
        p.add_argument('--format', choices=list(EXTENSIONS), default='csv', help='Table format')
        p.add_argument('--seed', type=int, default=None, help='Random seed')

    p = sub.add_parser('ingest', help='Validate input CSVs into a workspace')
    common(p)
    p.add_argument('--panel', type=str, required=True, help='Panel CSV (fips,year,<vars>)')
    p.add_argument('--adjacency', type=str, default=None, help='Adjacency CSV (fips_a,fips_b)')
    p.add_argument('--features', type=str, default=None, help='County features CSV')
    p.add_argument('--fips-remap', type=str, default=None, help='CSV with old,new FIPS columns')

    p = sub.add_parser('estimate', help='Fit the models of a spec file')
    common(p)
    p.add_argument('--spec', type=str, required=True, help='Model spec YAML')
    p.add_argument('--model', nargs='*', default=None, help='Only these model names')
    p.add_argument('--subset', choices=['all', 'coal'], default=None, help='Override the spec sample')
    p.add_argument('--sims', type=int, default=None, help='Impact simulation draws')
    p.add_argument('--flip-sign', action='store_true', help='Report responses to a decrease')

    p = sub.add_parser('diagnose', help='Cross-sectional dependence tests')
    common(p)
    p.add_argument('--fits', type=int, nargs='*', default=None, help='Fit ids from the registry')
    p.add_argument('--variables', nargs='*', default=None, help='Raw panel variables to test')
    p.add_argument('--subset', choices=['all', 'coal'], default=None, help='Entity subset for variables')
    p.add_argument('--permutation', action='store_true', help='Add the permutation CD test')

    p = sub.add_parser('cluster', help='County typology by Ward clustering')
    common(p, workspace_required=False)
    p.add_argument('--features', type=str, default=None, help='Features CSV instead of the workspace table')
    p.add_argument('--reference', type=str, default=None, help='Features CSV for the reference average column')
    p.add_argument('--subset', choices=['all', 'coal'], default=None, help='Entity subset')
    p.add_argument('--k-max', type=int, default=None, help='Largest k evaluated')
    p.add_argument('--refs', type=int, default=None, help='Gap statistic reference sets')
    p.add_argument('--k', type=int, default=None, help='Number of types to cut')
    p.add_argument('--columns', nargs='+', default=None, help='Indicator columns to cluster')
    p.add_argument('--passive', nargs='*', default=None, help='Descriptor columns carried unclustered')

    p = sub.add_parser('synth', help='Dump a synthetic dataset to CSVs')
    p.add_argument('--kind', choices=['twfe', 'spatial', 'factor', 'blobs'], required=True)
    p.add_argument('--out', type=str, required=True, help='Output directory')
    p.add_argument('--seed', type=int, default=None, help='Random seed')
    p.add_argument('--n', type=int, default=49, help='Entities (points for blobs)')
    p.add_argument('--t', type=int, default=10, help='Years')
    p.add_argument('--rows', type=int, default=None, help='Torus rows for spatial data')
    p.add_argument('--beta', type=float, nargs='+', default=[1.0])
    p.add_argument('--rho', type=float, default=0.0)
    p.add_argument('--delta', type=float, default=0.0)
    p.add_argument('--factors', type=int, default=0)
    p.add_argument('--sigma', type=float, default=1.0)
    p.add_argument('--clusters', type=int, default=3, help='Blobs')
    p.add_argument('--sep', type=float, default=10.0, help='Blob center distance')

    p = sub.add_parser('summary', help='Summary statistics tables')
    common(p)
    p.add_argument('--variables', nargs='*', default=None)
    p.add_argument('--subset', choices=['all', 'coal'], default=None)
    p.add_argument('--spec', type=str, default=None, help='Also summarize the transformed model variables')

    p = sub.add_parser('decompose', help='Direction/significance matrix across outcomes')
    common(p)
    p.add_argument('--spec', type=str, required=True, help='Spec file with one model per outcome')
    p.add_argument('--model', nargs='*', default=None)
    p.add_argument('--subset', choices=['all', 'coal'], default=None)
    p.add_argument('--sims', type=int, default=None)
    p.add_argument('--no-flip', action='store_true', help='Report responses to an increase')
    return parser


COMMANDS = {
    'ingest': cmd_ingest,
    'estimate': cmd_estimate,
    'diagnose': cmd_diagnose,
    'cluster': cmd_cluster,
    'synth': cmd_synth,
    'summary': cmd_summary,
    'decompose': cmd_decompose,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    settings = load_settings(args.config)
    configure_logging(settings)
    if args.command == 'cluster' and not (args.features or args.workspace):
        parser.error("cluster needs --workspace or --features")
    try:
        return COMMANDS[args.command](args, settings)
    except ToolkitError as exc:
        logger.error(str(exc))
        return exc.exit_code if exc.exit_code in (EXIT_VALIDATION, EXIT_ESTIMATION) else EXIT_ESTIMATION
    except (FileNotFoundError, PermissionError) as exc:
        logger.error(str(exc))
        return EXIT_VALIDATION
