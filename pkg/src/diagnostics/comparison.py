"""
Model Comparison by Information Criteria
"""

import logging
from typing import Sequence

import pandas as pd

from ..errors import PanelValidationError

logger = logging.getLogger(__name__)


def compare_models(fits: Sequence) -> pd.DataFrame:
    """
    logL/AIC/BIC table ranked by ascending AIC (stable for ties).

    Raises:
        PanelValidationError: fits with different dependent variables or samples
    """
    if not fits:
        raise PanelValidationError("No fits to compare")
    first = fits[0]
    for fit in fits[1:]:
        if fit.dependent != first.dependent:
            raise PanelValidationError(
                f"Cannot compare '{fit.model_name}' with '{first.model_name}': dependent variables differ"
            )
        if fit.nobs != first.nobs:
            raise PanelValidationError(
                f"Cannot compare '{fit.model_name}' ({fit.nobs} obs) with "
                f"'{first.model_name}' ({first.nobs} obs): samples differ"
            )
    table = pd.DataFrame({
        'model': [f.model_name for f in fits],
        'estimator': [f.estimator.value for f in fits],
        'nobs': [f.nobs for f in fits],
        'loglik': [f.loglik for f in fits],
        'aic': [f.aic for f in fits],
        'bic': [f.bic for f in fits],
    })
    table = table.sort_values('aic', kind='mergesort').reset_index(drop=True)
    table.insert(0, 'rank', range(1, len(table) + 1))
    logger.info(f"Compared {len(fits)} models; best by AIC: {table.loc[0, 'model']}")
    return table
