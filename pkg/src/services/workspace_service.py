"""
Workspace Service - ingest, persist and reload validated inputs
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd
from sqlalchemy.orm import sessionmaker

from ..database.database import make_session_factory, session_scope
from ..database.models import InputFile, OutputRecord, Run
from ..errors import PanelValidationError
from ..panel.dataset import PanelDataset, panel_from_frame
from ..report.manifest import RunManifest, sha256_arrays, sha256_file
from ..typology.features import read_features
from ..weights.adjacency import FIPS_WIDTH, read_adjacency
from ..weights.spatial_weights import SpatialWeights, row_normalize

logger = logging.getLogger(__name__)

PANEL_FILE = "panel.npz"
WEIGHTS_FILE = "weights.npz"
FEATURES_FILE = "features.csv"
FITS_DIR = "fits"


def save_panel(panel: PanelDataset, path: Union[str, Path]) -> None:
    """Persist a panel as entity ids, years and stacked value/mask arrays."""
    names = list(panel.variables)
    if not names:
        raise PanelValidationError("Panel has no variables to save")
    np.savez(
        path,
        entities=np.array(panel.entities),
        years=np.array(panel.years, dtype=np.int64),
        names=np.array(names),
        values=np.stack([panel.columns[n] for n in names]),
        masks=np.stack([panel.masks[n] for n in names]),
    )


def load_panel(path: Union[str, Path]) -> PanelDataset:
    with np.load(path, allow_pickle=False) as z:
        names = [str(n) for n in z['names']]
        return PanelDataset(
            tuple(str(e) for e in z['entities']),
            tuple(int(y) for y in z['years']),
            {n: z['values'][i] for i, n in enumerate(names)},
            {n: z['masks'][i] for i, n in enumerate(names)},
        )


def read_panel_csv(path: Union[str, Path], fips_remap: Optional[Dict[str, str]] = None) -> PanelDataset:
    """
    Read a `fips,year,<var>...` CSV into a panel.

    Raises:
        PanelValidationError: missing id columns, non-numeric values, or a year gap
    """
    try:
        frame = pd.read_csv(path, dtype={'fips': str})
    except (OSError, pd.errors.ParserError) as exc:
        raise PanelValidationError(f"Cannot read panel file {path}: {exc}") from exc
    for column in ('fips', 'year'):
        if column not in frame.columns:
            raise PanelValidationError(f"Panel file {path} is missing required column '{column}'")
    frame['fips'] = frame['fips'].str.strip().str.zfill(FIPS_WIDTH)
    for column in frame.columns.drop(['fips', 'year']):
        if not pd.api.types.is_numeric_dtype(frame[column]):
            raise PanelValidationError(f"Panel column '{column}' is not numeric")
    if fips_remap:
        frame['fips'] = frame['fips'].map(lambda f: fips_remap.get(f, f))
        logger.info(f"Applied FIPS remapping with {len(fips_remap)} entries")
    return panel_from_frame(frame)


def read_fips_remap(path: Union[str, Path]) -> Dict[str, str]:
    """Read an `old,new` FIPS remapping CSV."""
    frame = pd.read_csv(path, dtype=str)
    if not {'old', 'new'} <= set(frame.columns):
        raise PanelValidationError(f"FIPS remap file {path} needs 'old' and 'new' columns")
    return {o.zfill(FIPS_WIDTH): n.zfill(FIPS_WIDTH) for o, n in zip(frame['old'], frame['new'])}


def missingness_report(panel: PanelDataset) -> pd.DataFrame:
    """Per-variable cell counts and missing shares."""
    cells = panel.n_entities * panel.n_years
    records = []
    for name in panel.variables:
        missing = int(panel.masks[name].sum())
        records.append({
            'variable': name,
            'cells': cells,
            'observed': cells - missing,
            'missing': missing,
            'missing_share': missing / cells if cells else np.nan,
        })
    return pd.DataFrame.from_records(records)


@dataclass
class IngestReport:
    n_entities: int
    n_years: int
    n_variables: int
    missingness: pd.DataFrame
    absent_from_adjacency: List[str] = field(default_factory=list)
    run_id: Optional[int] = None
    manifest_hash: str = ""


@dataclass
class Workspace:
    """A loaded workspace."""

    root: Path
    panel: PanelDataset
    weights: Optional[SpatialWeights] = None
    features: Optional[pd.DataFrame] = None

    def require_weights(self) -> SpatialWeights:
        if self.weights is None:
            raise PanelValidationError(f"Workspace {self.root} has no spatial weights; ingest an adjacency file")
        return self.weights

    def require_features(self) -> pd.DataFrame:
        if self.features is None:
            raise PanelValidationError(f"Workspace {self.root} has no features table; ingest a features file")
        return self.features


class WorkspaceService:
    """Service for ingesting inputs into a workspace directory and reloading them."""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        self._session_factory: Optional[sessionmaker] = None

    @property
    def session_factory(self) -> sessionmaker:
        if self._session_factory is None:
            self.root.mkdir(parents=True, exist_ok=True)
            self._session_factory = make_session_factory(self.root)
        return self._session_factory

    @property
    def fits_dir(self) -> Path:
        return self.root / FITS_DIR

    def ingest(
        self,
        panel_csv: Union[str, Path],
        adjacency_csv: Optional[Union[str, Path]] = None,
        features_csv: Optional[Union[str, Path]] = None,
        fips_remap_csv: Optional[Union[str, Path]] = None,
    ) -> IngestReport:
        """Validate the input files and write the binary workspace."""
        remap = read_fips_remap(fips_remap_csv) if fips_remap_csv else None
        panel = read_panel_csv(panel_csv, remap)
        self.root.mkdir(parents=True, exist_ok=True)
        save_panel(panel, self.root / PANEL_FILE)

        manifest = RunManifest(command="ingest")
        manifest.add_input("panel", panel_csv)
        report = IngestReport(panel.n_entities, panel.n_years, len(panel.variables), missingness_report(panel))

        if adjacency_csv is not None:
            graph = read_adjacency(adjacency_csv, universe=panel.entities)
            absent = [e for e in panel.entities if graph.degree(e) == 0]
            if absent:
                logger.warning(f"{len(absent)} panel entities have no neighbors in the adjacency file (e.g. {absent[:5]})")
            report.absent_from_adjacency = absent
            row_normalize(graph, panel.entities).save(self.root / WEIGHTS_FILE)
            manifest.add_input("adjacency", adjacency_csv)

        if features_csv is not None:
            features = read_features(features_csv)
            features.to_csv(self.root / FEATURES_FILE, index=False)
            manifest.add_input("features", features_csv)
        if remap:
            manifest.add_input("fips_remap", fips_remap_csv)

        report.run_id = self.record_run(manifest)
        report.manifest_hash = manifest.hash
        logger.info(
            f"Ingested panel N={report.n_entities}, T={report.n_years}, "
            f"{report.n_variables} variables into {self.root}"
        )
        return report

    def load(self) -> Workspace:
        panel_path = self.root / PANEL_FILE
        if not panel_path.exists():
            raise PanelValidationError(f"{self.root} is not a workspace (no {PANEL_FILE}); run ingest first")
        weights_path = self.root / WEIGHTS_FILE
        features_path = self.root / FEATURES_FILE
        return Workspace(
            root=self.root,
            panel=load_panel(panel_path),
            weights=SpatialWeights.load(weights_path) if weights_path.exists() else None,
            features=read_features(features_path) if features_path.exists() else None,
        )

    def add_inputs(self, manifest: RunManifest) -> None:
        """Add the workspace files a command reads to its manifest."""
        manifest.add_input("panel", self.root / PANEL_FILE, sha256_arrays(self.root / PANEL_FILE))
        weights_path = self.root / WEIGHTS_FILE
        if weights_path.exists():
            manifest.add_input("weights", weights_path, sha256_arrays(weights_path))
        features_path = self.root / FEATURES_FILE
        if features_path.exists():
            manifest.add_input("features", features_path)

    def record_run(self, manifest: RunManifest) -> int:
        """Store a run and its inputs in the registry; returns the run id."""
        with session_scope(self.session_factory) as db:
            run = Run(
                manifest_hash=manifest.hash,
                command=manifest.command,
                seed=manifest.seeds.get('seed'),
                toolkit_version=manifest.toolkit_version,
                manifest=manifest.to_json(),
            )
            run.inputs = [InputFile(kind=i.kind, path=i.path, sha256=i.sha256) for i in manifest.inputs]
            db.add(run)
            db.flush()
            return run.id

    def record_outputs(self, run_id: int, outputs: Dict[str, Path]) -> None:
        with session_scope(self.session_factory) as db:
            for kind, path in outputs.items():
                db.add(OutputRecord(run_id=run_id, kind=kind, path=str(path), sha256=sha256_file(path)))
