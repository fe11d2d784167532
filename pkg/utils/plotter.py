"""
SymSep
Best S-separable approximation of completely symmetric matrices
Licensed under GNU General Public License v3.0

Plot-ready output: trace CSVs and result JSON. Rendering is left to external tools.
"""
import json
import logging
import os

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

INNER_COLUMNS = ["iter", "f", "kkt_residual", "step_source"]
OUTER_COLUMNS = ["iter", "distance", "gap", "alpha", "atom_count", "inner_iterations"]
FLOAT_FORMAT = "%.17g"


def _ensure_directory(path: str):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)


def trace_frame(trace, columns) -> pd.DataFrame:
    """Trace rows as a DataFrame with the declared header"""
    return pd.DataFrame(list(trace), columns=columns)


def write_inner_trace(path: str, trace) -> pd.DataFrame:
    """
    Writes one row per inner iteration
    :param trace: rows (iter, f, kkt_residual, step_source)
    """
    df = trace_frame(trace, INNER_COLUMNS)
    _ensure_directory(path)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info("Inner trace with %d rows saved to %s", len(df), path)
    return df


def write_outer_trace(path: str, trace) -> pd.DataFrame:
    """
    Writes one row per outer iteration
    :param trace: rows (iter, distance, gap, alpha, atom_count, inner_iterations)
    """
    df = trace_frame(trace, OUTER_COLUMNS)
    _ensure_directory(path)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info("Outer trace with %d rows saved to %s", len(df), path)
    return df


def _default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def result_json(result: dict) -> str:
    """JSON text of a result dictionary, numpy values included"""
    return json.dumps(result, default=_default, indent=2)


def write_result(path: str, result: dict) -> str:
    _ensure_directory(path)
    with open(path, "w", encoding="utf-8") as file:
        file.write(result_json(result))
    logger.info("Result saved to %s", path)
    return path
