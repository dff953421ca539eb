"""
Regression, Impact, Diagnostic and Summary Tables
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Literal, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..diagnostics.csd import CsdTestResult
from ..errors import PanelValidationError
from ..estimation.impacts import ImpactsResult
from ..estimation.spec import BaseFit, FitResult
from ..panel.dataset import PanelDataset

logger = logging.getLogger(__name__)

TableFormat = Literal['csv', 'json', 'text']
FORMATS = ('csv', 'json', 'text')
FLOAT_FORMAT = '%.8g'
SIGNIF_NOTE = "Signif. codes: 0 '***' 0.001 '**' 0.01 '*' 0.05 '.' 0.1 ' ' 1"
SUMMARY_COLUMNS = ('N', 'mean', 'sd', 'min', 'p25', 'p75', 'max')


def _fmt(value) -> str:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT % value
    return str(value)


def _plain(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return None if np.isnan(value) else float(FLOAT_FORMAT % value)
    if isinstance(value, float):
        return None if np.isnan(value) else float(FLOAT_FORMAT % value)
    return value


def coefficient_frame(fits: Sequence[BaseFit], level: float = 0.95) -> pd.DataFrame:
    """Long coefficient table over several fits."""
    frames = []
    for fit in fits:
        table = fit.coef_table(level)
        table.insert(0, 'model', fit.model_name)
        frames.append(table)
    return pd.concat(frames, ignore_index=True)


def statistics_frame(fits: Sequence[BaseFit]) -> pd.DataFrame:
    """Long (model, statistic, value) table of each fit's summary statistics."""
    records = []
    for fit in fits:
        stats = fit.fit_statistics()
        if isinstance(fit, FitResult):
            stats['clustering'] = " + ".join(sorted(d.value for d in fit.cluster_dims)) or "iid"
        for key, value in stats.items():
            records.append({'model': fit.model_name, 'statistic': key, 'value': value})
    return pd.DataFrame.from_records(records, columns=['model', 'statistic', 'value'])


STAT_LABELS = {
    'nobs': 'Observations',
    'r2': 'R2',
    'within_r2': 'Within R2',
    'loglik': 'Log-likelihood',
    'aic': 'AIC',
    'bic': 'BIC',
    'rho': 'rho',
    'delta': 'delta',
    'sigma2': 'sigma2',
    'factors': 'Factors',
    'smoothing': 'Smoothing',
    'clustering': 'Clustered SEs',
}


def regression_text(fits: Sequence[BaseFit], title: Optional[str] = None) -> str:
    """
    Aligned plain-text regression table: one column per model, estimate with
    significance code over the standard error in parentheses.
    """
    coefs = coefficient_frame(fits)
    stats = statistics_frame(fits)
    models = [f.model_name for f in fits]
    terms: List[str] = []
    labels: Dict[str, str] = {}
    for term, label in zip(coefs['term'], coefs['label']):
        if term not in labels:
            terms.append(term)
            labels[term] = label

    rows: List[List[str]] = []
    for term in terms:
        est_row, se_row = [labels[term]], [""]
        for model in models:
            hit = coefs[(coefs['model'] == model) & (coefs['term'] == term)]
            if hit.empty:
                est_row.append("")
                se_row.append("")
            else:
                r = hit.iloc[0]
                est_row.append(f"{_fmt(r['estimate'])}{r['signif']}")
                se_row.append(f"({_fmt(r['std_error'])})")
        rows.extend([est_row, se_row])
    divider_at = len(rows)
    stat_keys = list(dict.fromkeys(stats['statistic']))
    for key in stat_keys:
        row = [STAT_LABELS.get(key, key)]
        for model in models:
            hit = stats[(stats['model'] == model) & (stats['statistic'] == key)]
            row.append(_fmt(hit['value'].iloc[0]) if not hit.empty else "")
        rows.append(row)

    header = ["", *models]
    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]

    def line(cells: List[str]) -> str:
        first = cells[0].ljust(widths[0])
        rest = [c.rjust(w) for c, w in zip(cells[1:], widths[1:])]
        return "  ".join([first, *rest]).rstrip()

    rule = "-" * (sum(widths) + 2 * (len(widths) - 1))
    out = []
    if title:
        out.append(title)
    out.extend([rule, line(header), rule])
    out.extend(line(r) for r in rows[:divider_at])
    out.append(rule)
    out.extend(line(r) for r in rows[divider_at:])
    out.extend([rule, SIGNIF_NOTE])
    return "\n".join(out) + "\n"


def coefplot_frame(fits: Sequence[BaseFit], flip_sign: bool = False, level: float = 0.95) -> pd.DataFrame:
    """
    (model, term, label, horizon, estimate, ci_lo, ci_hi) rows for horizon terms.

    flip_sign presents the response to a decrease: estimates and bounds are
    negated and the bounds swapped.
    """
    records = []
    for fit in fits:
        table = fit.coef_table(level)
        for _, r in table.iterrows():
            if r['term'] not in fit.horizons:
                continue
            est, lo, hi = r['estimate'], r['ci_lo'], r['ci_hi']
            if flip_sign:
                est, lo, hi = -est, -hi, -lo
            records.append({
                'model': fit.model_name,
                'term': r['term'],
                'label': r['label'],
                'horizon': int(fit.horizons[r['term']]),
                'estimate': est,
                'ci_lo': lo,
                'ci_hi': hi,
                'p_value': r['p_value'],
                'signif': r['signif'],
            })
    columns = ['model', 'term', 'label', 'horizon', 'estimate', 'ci_lo', 'ci_hi', 'p_value', 'signif']
    return pd.DataFrame.from_records(records, columns=columns)


def impacts_frame(results: Sequence[ImpactsResult]) -> pd.DataFrame:
    frames = []
    for res in results:
        table = res.to_frame()
        table.insert(0, 'model', res.model_name)
        table['n_sim'] = res.n_sim
        frames.append(table)
    return pd.concat(frames, ignore_index=True)


def lincom_frame(rows: Mapping[str, pd.DataFrame]) -> pd.DataFrame:
    """Stack per-model linear-combination tables."""
    frames = []
    for model, table in rows.items():
        table = table.copy()
        table.insert(0, 'model', model)
        frames.append(table)
    if not frames:
        return pd.DataFrame(columns=['model'])
    return pd.concat(frames, ignore_index=True)


def csd_frame(results: Mapping[str, Sequence[CsdTestResult]]) -> pd.DataFrame:
    """One row per (series, test)."""
    records = []
    for series, tests in results.items():
        for test in tests:
            records.append({'series': series, **test.as_row()})
    return pd.DataFrame.from_records(records)


def summary_statistics(
    panel: PanelDataset,
    variables: Optional[Sequence[str]] = None,
    labels: Optional[Mapping[str, str]] = None,
) -> pd.DataFrame:
    """N, mean, sd, min, p25, p75 and max of each variable over unmasked cells."""
    variables = list(variables or panel.variables)
    labels = labels or {}
    records = []
    for name in variables:
        col = panel.get(name)
        values = col.values[~col.mask]
        if values.size == 0:
            stats = dict.fromkeys(SUMMARY_COLUMNS, np.nan)
            stats['N'] = 0
        else:
            stats = {
                'N': int(values.size),
                'mean': float(values.mean()),
                'sd': float(values.std(ddof=1)) if values.size > 1 else np.nan,
                'min': float(values.min()),
                'p25': float(np.percentile(values, 25)),
                'p75': float(np.percentile(values, 75)),
                'max': float(values.max()),
            }
        records.append({'variable': labels.get(name, name), **stats})
    return pd.DataFrame.from_records(records, columns=['variable', *SUMMARY_COLUMNS])


def decomposition_matrix(
    fits: Sequence[BaseFit],
    flip_sign: bool = True,
    alpha: float = 0.05,
) -> pd.DataFrame:
    """
    Direction and significance of the treatment response per outcome and horizon.

    Cells read "+***", "-*" and so on; responses not significant at `alpha`
    read "n.s.".
    """
    records = []
    for fit in fits:
        table = fit.coef_table()
        for _, r in table.iterrows():
            term = r['term']
            if term not in fit.horizons or "_x_" in term:
                continue
            est = -r['estimate'] if flip_sign else r['estimate']
            significant = bool(r['p_value'] < alpha)
            cell = f"{'+' if est > 0 else '-'}{r['signif']}" if significant else "n.s."
            records.append({
                'dependent': fit.dependent,
                'horizon': int(fit.horizons[term]),
                'cell': cell,
            })
    if not records:
        raise PanelValidationError("No treatment horizons to decompose")
    long = pd.DataFrame.from_records(records)
    matrix = long.pivot_table(index='dependent', columns='horizon', values='cell', aggfunc='first')
    matrix = matrix.reindex(columns=sorted(matrix.columns, key=lambda h: (h < 0, abs(h))))
    matrix.columns = [f"t-{h}" if h > 0 else ("t" if h == 0 else f"t+{-h}") for h in matrix.columns]
    return matrix.reset_index()


def write_table(
    frame: pd.DataFrame,
    path: Union[str, Path],
    fmt: TableFormat = 'csv',
    manifest_hash: str = "",
    title: Optional[str] = None,
) -> Path:
    """
    Write a table with the manifest hash embedded.

    csv: a leading `# manifest: <hash>` comment line; json: an object with
    `manifest` and `rows`; text: aligned columns under a header line.
    """
    if fmt not in FORMATS:
        raise PanelValidationError(f"Unknown table format '{fmt}'; choose from {FORMATS}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == 'csv':
        with open(path, 'w', newline='') as f:
            f.write(f"# manifest: {manifest_hash}\n")
            frame.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    elif fmt == 'json':
        rows = [{k: _plain(v) for k, v in rec.items()} for rec in frame.to_dict(orient='records')]
        payload = {'manifest': manifest_hash, 'title': title, 'rows': rows}
        path.write_text(json.dumps(payload, indent=2, default=str) + "\n")
    else:
        body = frame.to_string(index=False, float_format=lambda v: FLOAT_FORMAT % v, na_rep="")
        header = f"# manifest: {manifest_hash}"
        path.write_text("\n".join(filter(None, [header, title, body])) + "\n")
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def write_text(text: str, path: Union[str, Path], manifest_hash: str = "") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(f"# manifest: {manifest_hash}\n{text}")
    return path


def read_table(path: Union[str, Path]) -> pd.DataFrame:
    """Read back a CSV table written by write_table."""
    return pd.read_csv(path, comment='#', dtype={'fips': str})


