"""
CSV readers and writers for every table the toolkit produces.

Floats are written with 17 significant digits so a written file reads back to
the same doubles.
"""

import sys
from pathlib import Path
from typing import Dict, List, Optional, TextIO, Union

import pandas as pd

from utils.errors import InvalidArgumentError

FLOAT_FORMAT = '%.17g'

SCHEMAS: Dict[str, List[str]] = {
    'curve': ['alpha', 'beta'],
    'bounds': ['M', 'kappa_shuf', 'eps_min_shuf', 'kappa_pois', 'eps_min_pois', 'sigma_threshold'],
    'tradeoff': ['threshold', 'alpha_hat', 'beta_hat', 'alpha_se', 'beta_se'],
    'run_log': ['round', 'batch_size', 'membership', 'update_norm', 'z_norm'],
    'metrics': ['accuracy_clean', 'accuracy_dp', 'sigma', 'M', 'C'],
    'batch_plan': ['round', 'index'],
    'sweep': ['s', 'M', 'sigma', 'mu', 'kappa_mugdp', 'tail_lower', 'explicit_bound'],
    'sigma_table': ['batch_size', 'M', 'sigma_threshold'],
}


def _columns(schema: str) -> List[str]:
    if schema not in SCHEMAS:
        raise InvalidArgumentError(f"Unknown CSV schema '{schema}'")
    return SCHEMAS[schema]


def write_csv(
    frame: pd.DataFrame,
    schema: str,
    path: Optional[Union[str, Path]] = None,
    stream: Optional[TextIO] = None
) -> None:
    """
    Write a table with the schema's header.

    Args:
        frame: Table holding at least the schema columns
        schema: Key of SCHEMAS
        path: Output file; when None the table goes to `stream` (stdout)
        stream: Text stream used when path is None
    """
    columns = _columns(schema)
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise InvalidArgumentError(f"Table for '{schema}' is missing columns {missing}")

    table = frame[columns]
    if path is None:
        table.to_csv(stream or sys.stdout, index=False, float_format=FLOAT_FORMAT)
        return

    output_path = Path(path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(output_path, index=False, float_format=FLOAT_FORMAT)


def read_csv(path: Union[str, Path], schema: str) -> pd.DataFrame:
    """Read a table written by write_csv and check its header."""
    columns = _columns(schema)
    frame = pd.read_csv(path, float_precision='round_trip')
    if list(frame.columns) != columns:
        raise InvalidArgumentError(
            f"{path} does not match schema '{schema}': expected {columns}, got {list(frame.columns)}"
        )
    return frame
