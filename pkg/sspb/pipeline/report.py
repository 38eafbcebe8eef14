"""
Run reports: the classifier accuracy grid, the rotation metrics and the
image-reconstruction metrics, plus provenance.

A report is written as schema-versioned JSON, a plain-text rendering and
one CSV per table. Only the provenance timestamps differ between two runs
of the same configuration.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from ..utils.helpers import PathLike, atomic_write_text

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
ROTATION_FIELDS = ('mse', 'aad_scaled', 'aad_degrees', 'std_degrees')
IMAGE_FIELDS = ('mse_mean', 'mse_std', 'ssim_mean', 'ssim_std')
REPORT_FILES = ('report.json', 'report.txt', 'table1.csv', 'table2.csv', 'table3.csv')


class CellStatus(str, Enum):
    OK = 'ok'
    FAILED = 'failed'
    SKIPPED = 'skipped'


class ReportEncoder(json.JSONEncoder):
    """JSON encoder for enums, numpy values, paths and datetimes."""

    def default(self, o: Any) -> Any:
        if isinstance(o, Enum):
            return o.value
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, datetime):
            return o.isoformat()
        if isinstance(o, Path):
            return str(o)
        return super().default(o)


@dataclass
class Table1Cell:
    """Test accuracy of one (initialization, regime) classifier."""
    init: str
    regime: str
    status: CellStatus
    accuracy_pct: Optional[float] = None
    per_seed: List[float] = field(default_factory=list)
    stopped_epochs: Optional[List[int]] = None
    error: Optional[str] = None


@dataclass
class MetricsEntry:
    """Pretext-model metrics for one task, or why they are missing."""
    status: CellStatus
    metrics: Optional[Dict[str, float]] = None
    error: Optional[str] = None


@dataclass
class RunReport:
    """Structured result of one matrix run."""
    table1: List[Table1Cell]
    table2: MetricsEntry
    table3: Dict[str, MetricsEntry]
    regime_labels: Dict[str, str]
    provenance: Dict[str, Any]
    schema_version: int = SCHEMA_VERSION

    @property
    def failed_cells(self) -> List[Table1Cell]:
        return [cell for cell in self.table1 if cell.status is CellStatus.FAILED]

    def cell(self, init: str, regime: str) -> Table1Cell:
        for candidate in self.table1:
            if candidate.init == init and candidate.regime == regime:
                return candidate
        raise KeyError(f"no cell for init {init!r}, regime {regime!r}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), cls=ReportEncoder, indent=2, sort_keys=True) + '\n'

    def _inits(self) -> List[str]:
        return list(dict.fromkeys(cell.init for cell in self.table1))

    def table1_csv(self) -> str:
        regimes = list(self.regime_labels)
        lines = [','.join(['model'] + [f'"{self.regime_labels[r]}"' for r in regimes])]
        for init in self._inits():
            row = [init]
            for regime in regimes:
                cell = self.cell(init, regime)
                row.append(
                    repr(cell.accuracy_pct) if cell.status is CellStatus.OK else cell.status.value
                )
            lines.append(','.join(row))
        return '\n'.join(lines) + '\n'

    @staticmethod
    def _metrics_row(name: str, entry: MetricsEntry, fields: tuple) -> str:
        if entry.status is CellStatus.OK and entry.metrics is not None:
            return ','.join([name] + [repr(entry.metrics[f]) for f in fields])
        return ','.join([name] + [entry.status.value] * len(fields))

    def table2_csv(self) -> str:
        header = ','.join(('model',) + ROTATION_FIELDS)
        return f"{header}\n{self._metrics_row('rotation', self.table2, ROTATION_FIELDS)}\n"

    def table3_csv(self) -> str:
        lines = [','.join(('model',) + IMAGE_FIELDS)]
        lines.extend(
            self._metrics_row(task, entry, IMAGE_FIELDS) for task, entry in self.table3.items()
        )
        return '\n'.join(lines) + '\n'

    def to_text(self) -> str:
        """Human-readable rendering of all three tables."""
        lines = [f"Run report (schema {self.schema_version})", '']
        lines.append('Classifier accuracy (%)')
        for cell in self.table1:
            label = self.regime_labels.get(cell.regime, cell.regime)
            if cell.status is CellStatus.OK:
                value = f"{cell.accuracy_pct:.2f}"
                if len(cell.per_seed) > 1:
                    value += f"  (seeds: {', '.join(f'{v:.2f}' for v in cell.per_seed)})"
            else:
                value = f"{cell.status.value}: {cell.error or ''}".rstrip(': ')
            lines.append(f"  {cell.init:<14} {label:<50} {value}")

        lines += ['', 'Rotation prediction']
        lines.extend(self._entry_lines(self.table2, ROTATION_FIELDS))

        lines += ['', 'Image reconstruction']
        for task, entry in self.table3.items():
            lines.append(f"  {task}")
            lines.extend('  ' + line for line in self._entry_lines(entry, IMAGE_FIELDS))

        lines += ['', 'Provenance']
        for key in sorted(self.provenance):
            lines.append(f"  {key}: {self.provenance[key]}")
        return '\n'.join(lines) + '\n'

    @staticmethod
    def _entry_lines(entry: MetricsEntry, fields: tuple) -> List[str]:
        if entry.status is not CellStatus.OK or entry.metrics is None:
            return [f"  {entry.status.value}" + (f": {entry.error}" if entry.error else '')]
        return [f"  {name:<12} {entry.metrics[name]:.6g}" for name in fields]

    def write(self, out_dir: PathLike) -> Dict[str, Path]:
        """Write every report file atomically; returns name -> path."""
        out_dir = Path(out_dir)
        contents = {
            'report.json': self.to_json(),
            'report.txt': self.to_text(),
            'table1.csv': self.table1_csv(),
            'table2.csv': self.table2_csv(),
            'table3.csv': self.table3_csv(),
        }
        paths = {}
        for name, text in contents.items():
            paths[name] = out_dir / name
            atomic_write_text(paths[name], text)
        logger.info(f"Wrote report to {out_dir}")
        return paths
