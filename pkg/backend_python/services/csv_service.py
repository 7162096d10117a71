import io
import logging
from pathlib import Path
from typing import Dict, Iterable, Optional, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "v1"


def schema_line(kind: str) -> str:
    return f"# schema: turbo-eq/{kind}/{SCHEMA_VERSION}"


class CSVService:
    """Result tables on disk: a commented header block followed by plain CSV"""

    def to_csv_text(self, df: pd.DataFrame, kind: str, notes: Optional[Iterable[str]] = None) -> str:
        lines = [schema_line(kind)]
        lines.extend(f"# {note}" for note in (notes or []))
        body = df.to_csv(index=False, float_format="%.10g", lineterminator="\n")
        return "\n".join(lines) + "\n" + body

    def write_csv(self, df: pd.DataFrame, path: Union[str, Path], kind: str,
                  notes: Optional[Iterable[str]] = None) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv_text(df, kind, notes), encoding="utf-8")
        logger.info(f"✅ Wrote {len(df)} {kind} rows to {path}")
        return path

    def read_csv(self, source: Union[str, Path, io.StringIO]) -> pd.DataFrame:
        return pd.read_csv(source, comment="#")

    def read_schema(self, path: Union[str, Path]) -> Optional[str]:
        with open(path, encoding="utf-8") as f:
            first = f.readline().strip()
        if first.startswith("# schema:"):
            return first.split(":", 1)[1].strip()
        return None

    async def get_paginated_data(self, source: Union[str, Path, pd.DataFrame], page: int = 1,
                                 limit: int = 20) -> Dict:
        """Slice a result table for the API; page numbers start at 1"""
        if page < 1 or limit < 1:
            raise ValueError("page and limit must be positive")
        try:
            df = source if isinstance(source, pd.DataFrame) else self.read_csv(source)
        except Exception as error:
            logger.error(f"❌ CSV pagination failed: {error}")
            raise
        offset = (page - 1) * limit
        if offset and offset >= len(df):
            raise ValueError(f"Page {page} exceeds available data")
        chunk = df.iloc[offset:offset + limit].replace({np.nan: None})
        return {
            "headers": df.columns.tolist(),
            "rows": chunk.to_dict("records"),
            "totalRows": len(df),
        }
