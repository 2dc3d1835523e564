from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

from config.settings import TOOL_VERSION


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to re-run a report: the command, its model and materialized options"""
    command: str
    config: str
    options: Dict[str, Any]
    seed: int
    argv: List[str]
    tool_version: str = TOOL_VERSION
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec='seconds'))

    @staticmethod
    def create(command: str, config: str, options: Dict[str, Any], seed: int,
               argv: Optional[List[str]] = None) -> 'RunManifest':
        return RunManifest(command=command, config=config, options=dict(options), seed=int(seed),
                           argv=list(argv or []))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'command': self.command,
            'config': self.config,
            'options': self.options,
            'seed': self.seed,
            'argv': self.argv,
            'tool_version': self.tool_version,
            'timestamp': self.timestamp,
        }
