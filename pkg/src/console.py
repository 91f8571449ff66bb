#!/usr/bin/env python3

import math
import sys
from typing import Any

try:
    from colorama import init, Fore, Style
    init()  # Initialize colorama
    COLOR_SUPPORT = True
except ImportError:
    COLOR_SUPPORT = False

try:
    from rich.console import Console
    from rich.table import Table
    RICH_SUPPORT = True
except ImportError:
    RICH_SUPPORT = False


_state = {"quiet": False, "color": True}


def set_quiet(quiet: bool) -> None:
    """Silence status messages (errors are always printed)."""
    _state["quiet"] = bool(quiet)


def set_color(enabled: bool) -> None:
    _state["color"] = bool(enabled)


def colorize(text: str, color: str) -> str:
    """Add color to text if color support is available."""
    if not COLOR_SUPPORT or not _state["color"]:
        return text

    colors = {
        "red": Fore.RED,
        "green": Fore.GREEN,
        "yellow": Fore.YELLOW,
        "blue": Fore.BLUE,
        "magenta": Fore.MAGENTA,
        "cyan": Fore.CYAN,
        "white": Fore.WHITE,
        "reset": Style.RESET_ALL,
    }

    return f"{colors.get(color, '')}{text}{colors.get('reset', '')}"


def status(tag: str, message: str, color: str = "cyan") -> None:
    """Print a `[tag] message` progress line to stderr."""
    if _state["quiet"]:
        return
    print(f"{colorize(f'[{tag}]', color)} {message}", file=sys.stderr)


def warning(message: str) -> None:
    status("Warning", message, color="yellow")


def error(message: str) -> None:
    # The bare prefix stays uncoloured so scripts can grep for it.
    print(f"error: {message}", file=sys.stderr)


def _cell(value: Any) -> str:
    if value is None:
        return "-"
    if hasattr(value, "p_hat"):
        return f"{value.p_hat:.6f} ± {value.stderr:.1e}"
    if isinstance(value, float):
        return "inf" if math.isinf(value) else f"{value:.6g}"
    return str(value)


def render_summary(report) -> None:
    """Print the rows and check flags of a report as a rich table on stderr."""
    if _state["quiet"]:
        return
    if not RICH_SUPPORT:
        for row in report.rows:
            status(report.scenario, f"R={_cell(row.R)} omega_hat={_cell(row.omega_hat)} "
                                    f"omega={_cell(row.omega)} ratio={_cell(row.ratio)}")
        for name, ok in report.checks.items():
            status("Check", f"{name}: {'pass' if ok else 'FAIL'}", "green" if ok else "red")
        return

    console = Console(stderr=True, no_color=not _state["color"])
    table = Table(title=report.scenario)
    for column in ("label", "R", "omega_hat", "omega", "ratio", "ratio CI"):
        table.add_column(column)
    for row in report.rows:
        table.add_row(
            row.label or "",
            _cell(row.R),
            _cell(row.omega_hat),
            _cell(row.omega),
            _cell(row.ratio),
            f"[{_cell(row.ratio_lo)}, {_cell(row.ratio_hi)}]",
        )
    console.print(table)
    for name, ok in report.checks.items():
        mark = "[green]pass[/green]" if ok else "[red]FAIL[/red]"
        console.print(f"  {name}: {mark}")
