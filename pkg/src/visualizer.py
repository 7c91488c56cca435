"""
Visualization Engine

Terminal output through rich: check tables, moment tables, spectrum
summaries and progress bars. Machine-readable files are written elsewhere.
"""

import sys
from typing import Any, Dict, Iterable, List, Optional

from rich.console import Console
from rich.panel import Panel
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn, TimeElapsedColumn
from rich.table import Table


class Visualizer:
    """Creates visual elements using the rich library."""

    def __init__(self, console: Optional[Console] = None):
        self.console = console or Console(legacy_windows=False)
        self.err_console = Console(stderr=True, legacy_windows=False)

        self.colors = {
            "pass": "green",
            "fail": "red",
            "header": "bold cyan",
            "value": "cyan",
            "note": "yellow",
            "dim": "dim",
        }

    def show_panel(self, content: str, title: str = "", border_style: str = "white"):
        self.console.print(Panel(content, title=title, border_style=border_style))

    def show_error(self, message: str):
        """Structured diagnostic on stderr."""
        self.err_console.print(Panel(message, title="error", border_style=self.colors["fail"]))

    def show_value(self, value: Any):
        """Bare value on stdout, for scripting (e.g. an exact rational)."""
        self.console.print(str(value), highlight=False, markup=False)

    def show_checks(self, checks: Iterable[Any], title: str = "Checks"):
        """
        Table of check results; each item has name, passed and detail.
        """
        table = Table(title=title, show_header=True, header_style=self.colors["header"])
        table.add_column("check")
        table.add_column("status")
        table.add_column("detail", overflow="fold")
        for check in checks:
            status = "[green]PASS[/green]" if check.passed else "[red]FAIL[/red]"
            table.add_row(check.name, status, check.detail)
        self.console.print(table)

    def show_table(self, title: str, rows: List[Dict[str, Any]]):
        """Generic table with columns taken from the first row."""
        table = Table(title=title, show_header=True, header_style=self.colors["header"])
        if rows:
            for col_name in rows[0].keys():
                table.add_column(str(col_name))
            for row in rows:
                table.add_row(*(_cell(v) for v in row.values()))
        self.console.print(table)

    def show_report(self, report):
        rows = [{"k": e.get("k"), "L": e.get("L", ""), "T": e.get("T", ""),
                 "value": e.get("value"), "se": e.get("se")} for e in report.estimates]
        self.show_table(f"{report.kind} estimates", rows)
        if report.flags:
            flag_text = "\n".join(
                f"[{'green' if ok else 'red'}]{'PASS' if ok else 'FAIL'}[/] {name}"
                for name, ok in report.flags.items())
            self.show_panel(flag_text, title="flags", border_style="cyan")
        for note in report.notes:
            self.console.print(f"[{self.colors['note']}]note:[/] {note}")

    def show_spectrum_summary(self, spectrum, counts: Dict[str, Any]):
        lines = [
            f"[cyan]model:[/cyan] {spectrum.model} (genus {spectrum.genus})",
            f"[cyan]cutoff:[/cyan] {spectrum.cutoff:g}",
            f"[cyan]primitive classes:[/cyan] {len(spectrum.classes)}",
            f"[cyan]systole:[/cyan] {spectrum.systole:.12g}",
            f"[cyan]word horizon:[/cyan] {spectrum.horizon_word_length}",
        ]
        lines += [f"[cyan]{name}:[/cyan] {_cell(value)}" for name, value in counts.items()]
        self.show_panel("\n".join(lines), title="length spectrum", border_style="cyan")

    def show_progress_bar(self, description: str = "Progress") -> Progress:
        """Progress context manager on stderr; callers add their own tasks."""
        return Progress(
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            MofNCompleteColumn(),
            TimeElapsedColumn(),
            console=self.err_console,
            transient=True,
            disable=not sys.stderr.isatty(),
        )


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)
