"""Run one experiment per parameter value and combine the CSV series."""
import csv
from typing import Iterable, List, TextIO, Tuple

from .config import ExperimentConfig
from .metrics import csv_header
from .runner import RunResult, run


def sweep(base: ExperimentConfig, param: str, values: Iterable) -> List[Tuple[object, RunResult]]:
    """Every run keeps ``base.seed`` so only ``param`` changes between runs."""
    out = []
    for v in values:
        cfg = base.apply({param: v}) if isinstance(v, str) else base.replace(**{param: v})
        out.append((v, run(cfg)))
    return out


def write_sweep(fp: TextIO, param: str, results: List[Tuple[object, RunResult]], nodes: int):
    w = csv.writer(fp, lineterminator="\n")
    w.writerow([param] + csv_header(nodes))
    for value, res in results:
        for row in res.rows:
            w.writerow([value] + row.as_list())
