"""
Estimation Service - run model specs and persist fits
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import yaml

from ..database.database import session_scope
from ..database.models import FitRecord
from ..errors import EstimationError, PanelValidationError
from ..estimation.design import Design, ModelSpecConfig, build_design, read_group_labels
from ..estimation.factors import fit_htt
from ..estimation.impacts import ImpactsResult, impacts
from ..estimation.spatial import fit_sarar, fit_sem, fit_slm
from ..estimation.spec import BaseFit, Estimator
from ..estimation.twfe import fit_twfe, lincom_table
from ..settings import ToolkitSettings
from .workspace_service import Workspace, WorkspaceService

logger = logging.getLogger(__name__)

SPILLOVER_ESTIMATORS = (Estimator.SLM, Estimator.SARAR)


@dataclass
class ModelOutcome:
    """Everything one spec produces."""

    config: ModelSpecConfig
    fit: BaseFit
    impacts: Optional[ImpactsResult] = None
    lincoms: Optional[pd.DataFrame] = None
    fit_id: Optional[int] = None


@dataclass
class StoredFit:
    """A fit reloaded from the registry."""

    fit_id: int
    model_name: str
    estimator: str
    dependent: str
    residuals: np.ndarray
    payload: Dict = field(default_factory=dict)


class EstimationService:
    """Service for resolving spec configs against a workspace and fitting them."""

    def __init__(self, workspace: Workspace, settings: ToolkitSettings, store: Optional[WorkspaceService] = None):
        self.workspace = workspace
        self.settings = settings
        self.store = store

    def design(self, cfg: ModelSpecConfig) -> Design:
        groups = None
        if cfg.groups:
            path = Path(cfg.groups.path)
            # relative label paths resolve against the workspace when not found as given
            if not path.is_absolute() and not path.exists():
                path = self.workspace.root / path
            groups = read_group_labels(path, cfg.groups.column)
        return build_design(cfg, self.workspace.panel, features=self.workspace.features, groups=groups)

    def fit(self, design: Design) -> BaseFit:
        """Dispatch a resolved design to its estimator."""
        est = self.settings.estimation
        spatial = self.settings.spatial
        spec, panel = design.spec, design.panel
        estimator = design.estimator
        if estimator == Estimator.TWFE:
            return fit_twfe(
                spec, panel,
                pvalue_dist=est.pvalue_dist,
                cluster_df=est.cluster_df,
                tol=est.demean_tol,
                max_sweeps=est.demean_max_sweeps,
            )
        if estimator == Estimator.SLM:
            return fit_slm(spec, panel, self.workspace.require_weights(), tol=spatial.optimizer_tol)
        if estimator == Estimator.SEM:
            return fit_sem(spec, panel, self.workspace.require_weights(), tol=spatial.optimizer_tol)
        if estimator == Estimator.SARAR:
            return fit_sarar(
                spec, panel, self.workspace.require_weights(),
                tol=spatial.optimizer_tol,
                restart_grid=spatial.restart_grid,
            )
        if estimator == Estimator.HTT:
            factors = self.settings.factors
            return fit_htt(
                spec, panel, d=design.config.factors,
                smoothing=design.config.smoothing,
                max_iter=factors.max_iter,
                tol=factors.tol,
            )
        raise PanelValidationError(f"Unknown estimator '{estimator}'")

    def run(self, cfg: ModelSpecConfig, seed: int, n_sim: Optional[int] = None) -> ModelOutcome:
        """Fit one spec, with impacts for spillover models and its linear combinations."""
        design = self.design(cfg)
        fit = self.fit(design)
        outcome = ModelOutcome(cfg, fit)
        if design.estimator in SPILLOVER_ESTIMATORS:
            outcome.impacts = impacts(fit, n_sim=n_sim or self.settings.spatial.impact_draws, seed=seed)
        if design.combinations:
            outcome.lincoms = lincom_table(fit, design.combinations)
        logger.info(f"Model '{cfg.name}' fitted: nobs={fit.nobs}, logL={fit.loglik:.4f}")
        return outcome

    def run_all(
        self,
        configs: Sequence[ModelSpecConfig],
        seed: int,
        n_sim: Optional[int] = None,
    ) -> Tuple[List[ModelOutcome], List[Tuple[str, Exception]]]:
        """Fit every spec; estimation failures are collected rather than aborting the rest."""
        outcomes: List[ModelOutcome] = []
        failures: List[Tuple[str, Exception]] = []
        for cfg in configs:
            try:
                outcomes.append(self.run(cfg, seed, n_sim))
            except EstimationError as exc:
                logger.error(f"Model '{cfg.name}' failed: {exc}")
                failures.append((cfg.name, exc))
        return outcomes, failures

    def persist(self, run_id: int, outcome: ModelOutcome) -> int:
        """Store a fit's summary in the registry and its residual matrix as .npy."""
        if self.store is None:
            raise EstimationError("No workspace store to persist fits into")
        fit = outcome.fit
        payload = {
            'coefficients': json.loads(fit.coef_table().to_json(orient='records')),
            'statistics': {k: (v if isinstance(v, (int, str)) else float(v)) for k, v in fit.fit_statistics().items()},
            'entities': list(fit.entities),
            'years': [int(y) for y in fit.years],
        }
        spec_yaml = yaml.safe_dump(outcome.config.model_dump(mode='json'), sort_keys=True)
        with session_scope(self.store.session_factory) as db:
            record = FitRecord(
                run_id=run_id,
                model_name=fit.model_name,
                estimator=fit.estimator.value,
                dependent=fit.dependent,
                spec_yaml=spec_yaml,
                nobs=fit.nobs,
                loglik=float(fit.loglik),
                aic=float(fit.aic),
                bic=float(fit.bic),
                payload=json.dumps(payload, sort_keys=True),
            )
            db.add(record)
            db.flush()
            fit_id = record.id
            self.store.fits_dir.mkdir(parents=True, exist_ok=True)
            path = self.store.fits_dir / f"fit_{fit_id}.npy"
            np.save(path, fit.residual_matrix())
            record.residual_path = str(path)
        outcome.fit_id = fit_id
        return fit_id


def load_fits(store: WorkspaceService, fit_ids: Optional[Sequence[int]] = None) -> List[StoredFit]:
    """
    Reload fits by id (all fits when none are given).

    Raises:
        PanelValidationError: an id not in the registry
    """
    with session_scope(store.session_factory) as db:
        query = db.query(FitRecord)
        if fit_ids:
            query = query.filter(FitRecord.id.in_(list(fit_ids)))
        records = query.order_by(FitRecord.id).all()
        found = {r.id for r in records}
        missing = [i for i in (fit_ids or []) if i not in found]
        if missing:
            raise PanelValidationError(f"Unknown fit id(s): {missing}")
        return [
            StoredFit(
                fit_id=r.id,
                model_name=r.model_name,
                estimator=r.estimator,
                dependent=r.dependent,
                residuals=np.load(r.residual_path),
                payload=json.loads(r.payload),
            )
            for r in records
        ]
