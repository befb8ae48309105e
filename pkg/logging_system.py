"""
Gurarii Toolkit - Logging System

Certificate ledger (CSV or JSON lines) with real-time console output.
Console output goes to stderr so that JSON payloads on stdout stay
machine-readable.
"""

import csv
import io
import os
import json
import logging
from datetime import datetime
from typing import Optional, Dict, Any
from dataclasses import dataclass, asdict, fields
from enum import Enum
from rich.console import Console
from rich.table import Table
from rich.panel import Panel
from rich.text import Text

from config import DEFAULT_CONFIG, TOOL_VERSION, get_backend_name


class LogAction(Enum):
    """Log action types"""
    CERTIFIED = "CERTIFIED"
    REFUTED = "REFUTED"
    ERROR = "ERROR"
    INFO = "INFO"


# action -> (color, icon)
ACTION_STYLES = {
    "CERTIFIED": ("green", "✓"),
    "REFUTED": ("red", "✗"),
    "ERROR": ("yellow", "⚠"),
    "INFO": ("blue", "ℹ"),
}

# logging level -> (color, icon, prefix)
MESSAGE_STYLES = {
    logging.INFO: ("blue", "ℹ", ""),
    logging.WARNING: ("yellow", "⚠", "WARNING: "),
    logging.ERROR: ("red", "✗", "ERROR: "),
}


@dataclass
class LedgerEntry:
    """A single ledger line"""
    timestamp: str
    operation: str
    backend: str
    prime: int
    action: str
    detail: str

    @classmethod
    def columns(cls):
        return [f.name for f in fields(cls)]

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_csv(self) -> str:
        buffer = io.StringIO()
        csv.writer(buffer, lineterminator="").writerow(self.to_dict().values())
        return buffer.getvalue()


class GurariiLogger:
    """Handles console output and the certificate ledger"""

    CSV_HEADER = ",".join(LedgerEntry.columns())

    def __init__(self, config=None):
        self.config = config or DEFAULT_CONFIG.logging
        self.console = Console(stderr=True)

        if self.config.ledger_file:
            ledger_dir = os.path.dirname(self.config.ledger_file)
            if ledger_dir and not os.path.exists(ledger_dir):
                os.makedirs(ledger_dir)
            if self.ledger_format == "csv" and not os.path.exists(self.config.ledger_file):
                with open(self.config.ledger_file, 'w') as f:
                    f.write(self.CSV_HEADER + "\n")

        logging.basicConfig(
            level=getattr(logging, self.config.log_level),
            format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
        )
        self.logger = logging.getLogger("gurarii")

    @property
    def ledger_format(self) -> str:
        """`jsonl` when configured or implied by the ledger file suffix"""
        if self.config.ledger_format:
            return self.config.ledger_format
        if self.config.ledger_file and self.config.ledger_file.endswith(".jsonl"):
            return "jsonl"
        return "csv"

    def _should_record(self, action: LogAction) -> bool:
        if action == LogAction.CERTIFIED:
            return self.config.log_certified
        if action == LogAction.REFUTED:
            return self.config.log_refuted
        return True

    def log_certificate(
        self,
        operation: str,
        field,
        action: LogAction,
        detail: str = ""
    ) -> LedgerEntry:
        """Record the outcome of one certified operation"""
        entry = LedgerEntry(
            timestamp=datetime.now().isoformat(),
            operation=operation,
            backend=get_backend_name(field.backend) if field is not None else "-",
            prime=field.prime if field is not None else 0,
            action=action.value,
            detail=detail,
        )

        if self.config.ledger_file and self._should_record(action):
            line = entry.to_json() if self.ledger_format == "jsonl" else entry.to_csv()
            with open(self.config.ledger_file, 'a') as f:
                f.write(line + "\n")

        if self.config.console_output:
            self._print_entry(entry)

        return entry

    def _print_entry(self, entry: LedgerEntry):
        color, icon = ACTION_STYLES.get(entry.action, ACTION_STYLES["INFO"])

        text = Text()
        text.append(f"{icon} ", style=color)
        text.append(f"{entry.action:9} ", style=f"bold {color}")
        text.append(f"{entry.operation} ", style="cyan")
        text.append(f"[{entry.backend} p={entry.prime}] ", style="dim")
        if entry.detail:
            text.append(f"| {entry.detail}", style="italic")

        self.console.print(text)

    def _message(self, level: int, message: str):
        self.logger.log(level, message)
        if self.config.console_output:
            color, icon, prefix = MESSAGE_STYLES[level]
            text = Text()
            text.append(f"{icon} ", style=color)
            text.append(f"{prefix}{message}")
            self.console.print(text)

    def log_info(self, message: str):
        self._message(logging.INFO, message)

    def log_warning(self, message: str):
        self._message(logging.WARNING, message)

    def log_error(self, message: str):
        self._message(logging.ERROR, message)

    def print_banner(self):
        """Print startup banner"""
        banner = Panel(
            Text.from_markup(
                "[bold cyan]Gurarii Toolkit[/bold cyan] "
                f"[dim]v{TOOL_VERSION}[/dim]\n"
                "[dim]Exact ultrametric linear algebra and certified constructions[/dim]"
            ),
            border_style="cyan"
        )
        self.console.print(banner)

    def print_stats(self, certified: int, refuted: int, errors: int):
        """Print statistics table"""
        table = Table(title="Certificate Statistics")
        table.add_column("Metric", style="cyan")
        table.add_column("Count", justify="right")

        table.add_row("Certified", f"[green]{certified}[/green]")
        table.add_row("Refuted", f"[red]{refuted}[/red]")
        table.add_row("Errors", f"[yellow]{errors}[/yellow]")
        table.add_row("Total", str(certified + refuted + errors))

        self.console.print(table)

    def print_codec_stats(self, stats: Dict[str, int]):
        summary = ", ".join(f"{key}={value}" for key, value in stats.items())
        self.console.print(f"[dim]Codec stats: {summary}[/dim]")


# Global logger instance
_logger: Optional[GurariiLogger] = None


def get_logger(config=None) -> GurariiLogger:
    """Get or create the global logger instance"""
    global _logger
    if _logger is None:
        _logger = GurariiLogger(config)
    return _logger


def reset_logger():
    """Drop the global instance (tests and the CLI reconfigure it)"""
    global _logger
    _logger = None
