import io
import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from utils.helpers import to_jsonable

SCHEMA_DIR = Path(__file__).parent / 'schemas'

# Report key -> schema file
REPORT_SCHEMAS = {
    'minimizer_set': 'minimize.schema.json',
    'nd_report': 'check_nd.schema.json',
    'expansion': 'expansion.schema.json',
    'mc_report': 'mc.schema.json',
    'error': 'error.schema.json',
}

CsvTable = Tuple[List[str], List[List[Any]]]


def schema_for(report: Dict[str, Any]) -> Dict[str, Any]:
    """Load the JSON schema matching a report by its top-level key"""
    for key, filename in REPORT_SCHEMAS.items():
        if key in report:
            with open(SCHEMA_DIR / filename) as handle:
                return json.load(handle)
    raise KeyError(f"no schema for report with keys {sorted(report)}")


def render(report: Dict[str, Any], table: Optional[CsvTable], fmt: str) -> str:
    """JSON document, or CSV with the manifest on a leading comment line"""
    if fmt == 'json' or table is None:
        return json.dumps(to_jsonable(report), indent=2, sort_keys=True) + '\n'
    buffer = io.StringIO()
    buffer.write('# manifest: ' + json.dumps(to_jsonable(report['manifest']), sort_keys=True) + '\n')
    header, rows = table
    buffer.write(','.join(header) + '\n')
    for row in rows:
        buffer.write(','.join(_cell(v) for v in to_jsonable(row)) + '\n')
    return buffer.getvalue()


def _cell(value) -> str:
    if value is None:
        return ''
    if isinstance(value, float):
        return repr(value)
    return str(value)
