"""
Common functions
"""

import bz2
import gzip
import lzma
from contextlib import contextmanager
from pathlib import Path
from typing import IO, Any, Dict, Iterator, Optional, Tuple, Union

try:
    import zstandard

    _HAVE_ZSTD = True
except ImportError:
    _HAVE_ZSTD = False

SUPPORTED_COMPRESSION_TYPES = (
    "bz2",
    "gzip",
    "xz",
    "zstd",
)

_SUFFIX_TO_COMPRESSION = (
    (".bz2", "bz2"),
    (".gz", "gzip"),
    (".xz", "xz"),
    (".zst", "zstd"),
)


def infer_compression(filename: Union[str, Path]) -> Optional[str]:
    """
    Infer the compression method from the filename extension.

    Args:
        filename (Union[str, Path]): Artifact path.

    Returns:
        Optional[str]: One of `SUPPORTED_COMPRESSION_TYPES`, or None for plain files.
    """
    name = Path(filename).name.lower()
    for suffix, compression in _SUFFIX_TO_COMPRESSION:
        if name.endswith(suffix):
            return compression

    return None


@contextmanager
def open_file(
    filename: Union[str, Path],
    mode: str,
    compression: Optional[str] = "infer",
    level: Optional[int] = None,
) -> Iterator[Tuple[IO, bool]]:
    """
    Open an artifact (model document, CSV table, config, manifest) with optional
    compression as a context manager.

    Args:
        filename (Union[str, Path]): File to open for reading or writing.
        mode (str): File access mode, one of 'r', 'w', 'x' or 'a'.
        compression (Optional[str], optional): File compression method. Options: 'bz2',
            'gzip', 'xz', 'zstd', None (no compression), or 'infer'. Use 'infer' for
            automatic detection based on file extension ('.bz2', '.gz', '.xz',
            '.zst'). Defaults to 'infer'.
        level (Optional[int], optional): Compression level. Only used when writing
            compressed files. If None, the default level of each method is used.
            Defaults to None.

    Yields:
        Iterator[Tuple[IO, bool]]: A tuple containing:
            - IO: The file handle for reading or writing.
            - bool: Whether the handle expects bytes (True) or text (False).

    Raises:
        IsADirectoryError: If `filename` is a directory.
        FileNotFoundError: If `mode` is 'r' and the file does not exist.
        ValueError: If `mode` or `compression` is not supported.
        ModuleNotFoundError: If `compression` is 'zstd' and the zstandard module is not
            installed.
    """
    filepath = Path(filename)
    if filepath.is_dir():
        raise IsADirectoryError("Must be a file, not a directory: '%s'" % filename)

    if mode not in ("r", "w", "x", "a"):
        raise ValueError("Unrecognized mode: %s\nValid modes: r, w, x, a" % mode)

    if mode == "r" and not filepath.is_file():
        raise FileNotFoundError("No such file: '%s'" % filename)

    valid_compression_types = (None, "infer") + SUPPORTED_COMPRESSION_TYPES
    if compression not in valid_compression_types:
        raise ValueError(
            "Unsupported compression: %s\nValid compression types are %s"
            % (compression, valid_compression_types)
        )

    if compression == "infer":
        compression = infer_compression(filepath)

    if mode == "r":
        # Reading mode does not require a compression level
        level = None

    kwargs: Dict[str, Any] = {"mode": mode}
    if compression is None:
        with open(filepath, **kwargs) as file_handle:
            yield file_handle, False
    elif compression == "bz2":
        if level:
            kwargs["compresslevel"] = level

        with bz2.BZ2File(filepath, **kwargs) as file_handle:
            yield file_handle, True
    elif compression == "gzip":
        if level:
            kwargs["compresslevel"] = level

        # Fixed mtime keeps compressed artifacts byte-comparable across runs
        with gzip.GzipFile(filepath, mtime=0, **kwargs) as file_handle:
            yield file_handle, True
    elif compression == "xz":
        kwargs["format"] = lzma.FORMAT_XZ
        if level:
            kwargs["preset"] = level

        with lzma.LZMAFile(filepath, **kwargs) as file_handle:
            yield file_handle, True
    elif compression == "zstd":
        if not _HAVE_ZSTD:
            raise ModuleNotFoundError(
                "No module named 'zstandard'. Install with $ pip install zstandard"
            )
        if level:
            kwargs["cctx"] = zstandard.ZstdCompressor(level=level)

        with zstandard.open(filepath, **kwargs) as file_handle:
            yield file_handle, False
    else:
        raise NotImplementedError(compression)


def read_content(
    filename: Union[str, Path],
    compression: Optional[str] = "infer",
) -> str:
    """
    Read an artifact and return its decoded content.

    Args:
        filename (Union[str, Path]): File to read.
        compression (Optional[str], optional): See `open_file`. Defaults to 'infer'.

    Returns:
        str: Content of file.
    """
    with open_file(filename, "r", compression) as (file_handle, is_binary):
        content = file_handle.read()

        if is_binary:
            return content.decode()

        return content


def write_content(
    filename: Union[str, Path],
    content: str,
    mode: str = "w",
    compression: Optional[str] = "infer",
    level: Optional[int] = None,
) -> None:
    """
    Write a string to an artifact.

    Args:
        filename (Union[str, Path]): File to write to.
        content (str): Text to write.
        mode (str, optional): One of 'w', 'x', 'a'. Defaults to 'w'.
        compression (Optional[str], optional): See `open_file`. Defaults to 'infer'.
        level (Optional[int], optional): Compression level. Defaults to None.

    Raises:
        TypeError: If `content` is not a string.
        ValueError: If `mode` is not a writing mode.
    """
    if not isinstance(content, str):
        raise TypeError("content must be a string, got %s" % type(content).__name__)

    valid_modes = ("w", "x", "a")
    if mode not in valid_modes:
        raise ValueError(
            "Unrecognized mode: %s\nValid modes are: %s" % (mode, valid_modes)
        )

    with open_file(filename, mode, compression, level) as (file_handle, is_binary):
        if is_binary:
            file_handle.write(content.encode())
        else:
            file_handle.write(content)
