"""CSV output with ``#`` comment headers."""

from __future__ import annotations

import io
import sys
from pathlib import Path
from typing import Iterable, List, Sequence, TextIO

import pandas as pd

from gaugelab import __version__

FLOAT_FORMAT = "%.12g"


def header_lines(command: str, seed: int, items: Iterable[tuple[str, str]] = ()) -> List[str]:
    lines = [f"# gaugelab {__version__}", f"# command={command}", f"# seed={seed}"]
    lines.extend(f"# {key}={value}" for key, value in items)
    return lines


def render_table(frame: pd.DataFrame, header: Sequence[str] = (), footer: Sequence[str] = ()) -> str:
    """Comment header, the frame as CSV (LF endings, 12 significant digits), then comment footer."""

    body = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    parts = [f"{line}\n" for line in header]
    parts.append(body)
    parts.extend(f"{line}\n" for line in footer)
    return "".join(parts)


def write_text(text: str, output: str | Path | None = None, stream: TextIO | None = None) -> None:
    if output:
        with open(output, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        return
    (stream or sys.stdout).write(text)


def read_table(source: str | Path | io.StringIO) -> pd.DataFrame:
    return pd.read_csv(source, comment="#")


__all__ = ["FLOAT_FORMAT", "header_lines", "read_table", "render_table", "write_text"]
