"""
Report emission: JSON envelopes and plot-ready CSV tables
"""
import json
import logging
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel

from app.exceptions import ConfigurationError
from app.models import Report

logger = logging.getLogger(__name__)


def plain(value: Any) -> Any:
    """JSON-ready copy: models dumped, numpy converted, non-finite floats as null"""
    if isinstance(value, BaseModel):
        return plain(value.model_dump(mode="json"))
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return plain(value.tolist())
    if isinstance(value, np.generic):
        return plain(value.item())
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def timestamp() -> str:
    return datetime.now(timezone.utc).isoformat()


class ReportWriter:
    """Writes one JSON report per command plus optional CSV tables"""

    def render(self, report: Report) -> str:
        """Canonical JSON text: sorted keys, fixed indentation"""
        return json.dumps(plain(report), sort_keys=True, indent=2, allow_nan=False) + "\n"

    def emit(
        self,
        report: Report,
        output_dir: str,
        fmt: str = "json",
        tables: Optional[Dict[str, pd.DataFrame]] = None,
    ) -> List[Path]:
        """
        Write the report and, for the csv format, its tables

        Args:
            report: envelope with field, domain, command, params, results, violations
            output_dir: target directory (created if missing)
            fmt: "json" writes the report only; "csv" also writes every table
            tables: name -> DataFrame

        Returns:
            Paths written, report first
        """
        directory = Path(output_dir)
        written = []
        try:
            directory.mkdir(parents=True, exist_ok=True)
            report_path = directory / f"{report.command}_report.json"
            report_path.write_text(self.render(report), encoding="utf-8")
            written.append(report_path)
            if fmt == "csv":
                for name, frame in sorted((tables or {}).items()):
                    path = directory / f"{report.command}_{name}.csv"
                    frame.to_csv(path, index=False, float_format="%.17g")
                    written.append(path)
        except OSError as exc:
            raise ConfigurationError(f"cannot write to {output_dir!r}: {exc.strerror}", "cli.emit_report")
        logger.info(f"Wrote {len(written)} file(s) to {directory}")
        return written

    @staticmethod
    def load(path) -> Report:
        return Report.model_validate_json(Path(path).read_text(encoding="utf-8"))


# Global report writer instance
report_writer = ReportWriter()


def emit_report(report: Report, output_dir: str, fmt: str = "json",
                tables: Optional[Dict[str, pd.DataFrame]] = None) -> List[Path]:
    return report_writer.emit(report, output_dir, fmt, tables)
