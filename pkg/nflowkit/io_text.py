"""
Text artifacts: plain text, CSV states and tables, grid datasets, manifests
"""

import math
import platform
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .common import read_content, write_content
from .errors import FormatError


def read_text(filename: Union[str, Path], compression: Optional[str] = "infer") -> str:
    """
    Read a text artifact and return its content as a single string.

    Args:
        filename (Union[str, Path]): File to read.
        compression (Optional[str], optional): File compression method. Options: 'bz2',
            'gzip', 'xz', 'zstd', None (no compression), or 'infer'. Defaults to
            'infer'.

    Returns:
        str: Content of file.
    """
    return read_content(filename, compression)


def write_text(
    filename: Union[str, Path],
    text: str,
    mode: str = "w",
    compression: Optional[str] = "infer",
    level: Optional[int] = None,
) -> None:
    """
    Write text to a file.

    Args:
        filename (Union[str, Path]): File to write to.
        text (str): String to write.
        mode (str, optional): One of 'w', 'x', 'a'. Defaults to 'w'.
        compression (Optional[str], optional): See `read_text`. Defaults to 'infer'.
        level (Optional[int], optional): Compression level. If None, the default level
            of each compression method is used. Defaults to None.

    Raises:
        TypeError: If `text` is not a string.
    """
    if not isinstance(text, str):
        raise TypeError("text must be a string. Use write_lines() for list of strings.")

    write_content(filename, text, mode, compression, level)


def read_lines(
    filename: Union[str, Path], compression: Optional[str] = "infer"
) -> List[str]:
    """Read a text artifact and return its lines without trailing newlines."""
    content = read_text(filename, compression)
    if not content:
        return []
    return content.rstrip("\n").split("\n")


def write_lines(
    filename: Union[str, Path],
    lines: Union[str, List[str]],
    mode: str = "w",
    compression: Optional[str] = "infer",
    level: Optional[int] = None,
) -> None:
    """
    Write string or list of strings to a file with trailing newlines.

    Raises:
        TypeError: If `lines` is not a string or list of strings.
    """
    if isinstance(lines, str):
        lines = [lines]
    elif isinstance(lines, list):
        non_string_elements = set(
            [type(t).__name__ for t in lines if not isinstance(t, str)]
        )
        if non_string_elements:
            raise TypeError(
                "lines must be a string or list of strings, got list with %s"
                % ", ".join(non_string_elements)
            )
    else:
        raise TypeError(
            "lines must be a string or list of strings, got %s" % type(lines).__name__
        )

    write_text(filename, "\n".join(lines) + "\n", mode, compression, level)


def format_float(value: float) -> str:
    """Shortest representation that parses back to the same double."""
    return repr(float(value))


def _parse_row(line: str, width: int, line_number: int) -> List[float]:
    fields = line.split(",")
    if len(fields) != width:
        raise FormatError(
            "line %d has %d fields, expected %d" % (line_number, len(fields), width)
        )
    try:
        values = [float(field) for field in fields]
    except ValueError as error:
        raise FormatError("line %d: %s" % (line_number, error)) from error
    if not all(math.isfinite(value) for value in values):
        raise FormatError("line %d has non-finite entries" % line_number)
    return values


def write_states(
    filename: Union[str, Path],
    states: np.ndarray,
    compression: Optional[str] = "infer",
) -> None:
    """
    Write probes as CSV: header z0,z1,..., then one probe per line.

    Args:
        filename (Union[str, Path]): File to write to.
        states (np.ndarray): Shape (D,) for one probe or (D, B) for B probes.
        compression (Optional[str], optional): See `read_text`. Defaults to 'infer'.
    """
    states = np.asarray(states, dtype=float)
    if states.ndim == 1:
        states = states[:, None]
    header = ",".join("z%d" % i for i in range(states.shape[0]))
    rows = [",".join(format_float(value) for value in probe) for probe in states.T]
    write_lines(filename, [header] + rows, compression=compression)


def read_states(
    filename: Union[str, Path], compression: Optional[str] = "infer"
) -> np.ndarray:
    """
    Read a state CSV written by `write_states`.

    Raises:
        FormatError: On a missing or malformed header, ragged rows, unparsable or
            non-finite numbers, or a file without probes.

    Returns:
        np.ndarray: Shape (D, B).
    """
    lines = [line for line in read_lines(filename, compression) if line.strip()]
    if not lines:
        raise FormatError("%s is empty" % filename)
    header = lines[0].split(",")
    if header != ["z%d" % i for i in range(len(header))]:
        raise FormatError("expected header z0,z1,..., got %r" % lines[0])
    if len(lines) == 1:
        raise FormatError("%s holds no probes" % filename)
    rows = [
        _parse_row(line, len(header), number + 2)
        for number, line in enumerate(lines[1:])
    ]
    return np.array(rows).T


def write_grid_dataset(
    filename: Union[str, Path],
    samples: np.ndarray,
    compression: Optional[str] = "infer",
) -> None:
    """
    Write grid functions as CSV: header n=<n>,h=<1/n>, then one function per row.

    Args:
        filename (Union[str, Path]): File to write to.
        samples (np.ndarray): Shape (B, n), 1-d periodic grid functions.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2:
        raise FormatError(
            "grid datasets hold (B, n) samples, got %s" % (samples.shape,)
        )
    n = samples.shape[1]
    header = "n=%d,h=%s" % (n, format_float(1.0 / n))
    rows = [",".join(format_float(value) for value in row) for row in samples]
    write_lines(filename, [header] + rows, compression=compression)


def read_grid_dataset(
    filename: Union[str, Path], compression: Optional[str] = "infer"
) -> np.ndarray:
    """
    Read a grid dataset written by `write_grid_dataset`.

    Raises:
        FormatError: If the header is malformed, h disagrees with 1/n, or a row does
            not hold n finite numbers.

    Returns:
        np.ndarray: Shape (B, n).
    """
    lines = [line for line in read_lines(filename, compression) if line.strip()]
    if not lines:
        raise FormatError("%s is empty" % filename)
    try:
        header = dict(item.split("=", 1) for item in lines[0].split(","))
        n = int(header["n"])
        h = float(header["h"])
    except (KeyError, ValueError) as error:
        raise FormatError("expected header n=<n>,h=<1/n>, got %r" % lines[0]) from error
    if n < 1 or not math.isclose(h, 1.0 / n, rel_tol=1e-12):
        raise FormatError("grid spacing h=%r does not match n=%d" % (h, n))
    rows = [_parse_row(line, n, number + 2) for number, line in enumerate(lines[1:])]
    return np.array(rows).reshape(len(rows), n)


def write_table(
    filename: Union[str, Path],
    columns: Sequence[str],
    rows: Sequence[Sequence[Any]],
    compression: Optional[str] = "infer",
) -> None:
    """
    Write a CSV table such as an error table or a loss curve. Floats use the shortest
    round-trip form, None becomes an empty field.
    """

    def render(value: Any) -> str:
        if value is None:
            return ""
        if isinstance(value, (float, np.floating)):
            return format_float(value)
        return str(value)

    lines = [",".join(columns)]
    for row in rows:
        if len(row) != len(columns):
            raise FormatError("row %r does not match columns %s" % (row, list(columns)))
        lines.append(",".join(render(value) for value in row))
    write_lines(filename, lines, compression=compression)


def read_table(
    filename: Union[str, Path], compression: Optional[str] = "infer"
) -> Tuple[List[str], List[List[str]]]:
    """Read a CSV table as (columns, rows of strings)."""
    lines = read_lines(filename, compression)
    if not lines:
        raise FormatError("%s is empty" % filename)
    columns = lines[0].split(",")
    return columns, [line.split(",") for line in lines[1:]]


def manifest_entries(
    config: Mapping[str, Any], timestamp: Optional[str] = None
) -> Dict[str, str]:
    """Config echo plus versions and a timestamp, flattened to strings."""
    from . import __version__

    entries = {
        str(key): "" if value is None else str(value) for key, value in config.items()
    }
    entries.update(
        {
            "nflowkit_version": __version__,
            "numpy_version": np.__version__,
            "python_version": platform.python_version(),
            "timestamp": timestamp or datetime.now(timezone.utc).isoformat(),
        }
    )
    return entries


def write_manifest(
    directory: Union[str, Path],
    config: Mapping[str, Any],
    timestamp: Optional[str] = None,
) -> Path:
    """
    Write `manifest.txt` into `directory` as sorted key=value lines.

    Returns:
        Path: The manifest path.
    """
    entries = manifest_entries(config, timestamp)
    for key, value in entries.items():
        if "=" in key or "\n" in key or "\n" in value:
            raise FormatError("manifest entry %r cannot be written as key=value" % key)
    path = Path(directory) / "manifest.txt"
    write_lines(path, ["%s=%s" % (key, entries[key]) for key in sorted(entries)])
    return path


def read_manifest(filename: Union[str, Path]) -> Dict[str, str]:
    """Parse a key=value manifest."""
    entries = {}
    for number, line in enumerate(read_lines(filename, compression=None)):
        if not line:
            continue
        if "=" not in line:
            raise FormatError(
                "manifest line %d is not key=value: %r" % (number + 1, line)
            )
        key, value = line.split("=", 1)
        entries[key] = value
    return entries
