import logging
import re
from pathlib import Path
from typing import Optional, Union

import pandas as pd
from pydantic import BaseModel

from mtfcost.config import OUTPUT

logger = logging.getLogger(__name__)

_UNSAFE = re.compile(r"[^A-Za-z0-9._-]+")


def file_stem(*parts: object) -> str:
    """Join parts into a filesystem-safe stem, e.g. ('analytic', 'exp(1)') -> 'analytic_exp_1'"""
    text = "_".join(str(p) for p in parts if p is not None and str(p) != "")
    return re.sub("_{2,}", "_", _UNSAFE.sub("_", text)).strip("_")


class ExportService:
    """Single writer of CSV tables and JSON sidecars under one output directory"""

    def __init__(self, out_dir: Optional[Union[str, Path]] = None):
        self.out_dir = Path(out_dir or OUTPUT["dir"])

    def _path(self, name: str, suffix: str) -> Path:
        # Created on first write only
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self.out_dir / f"{name}{suffix}"

    def write_frame(self, name: str, frame: pd.DataFrame) -> Path:
        """UTF-8 CSV with a header row and no index"""
        path = self._path(name, ".csv")
        frame.to_csv(path, index=False, encoding="utf-8", lineterminator="\n")
        logger.info(f"Wrote {len(frame)} rows to {path}")
        return path

    def write_json(self, name: str, model: BaseModel) -> Path:
        path = self._path(name, ".json")
        path.write_text(model.model_dump_json(indent=2, by_alias=True) + "\n", encoding="utf-8")
        logger.info(f"Wrote {path}")
        return path
