"""
YAML file I/O: run configs and parameter-path documents
"""

from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
import yaml

from .common import read_content, write_content
from .core import ActivationFamily, ChannelKind
from .errors import FormatError, StructureError
from .io_model import (
    channel_kind_from_document,
    channel_kind_to_document,
    coupling_from_document,
    coupling_to_document,
)
from .params import ParamPath, ParamSegment, Structure


def read_yaml(filename: Union[str, Path], compression: Optional[str] = "infer") -> Any:
    """
    Read a YAML file. JSON files parse as well, YAML being a superset.

    Args:
        filename (Union[str, Path]): File to read.
        compression (Optional[str], optional): File compression method. Options: 'bz2',
            'gzip', 'xz', 'zstd', None (no compression), or 'infer'. Defaults to
            'infer'.

    Raises:
        FormatError: If the content is not valid YAML.

    Returns:
        Any: The parsed YAML content as a Python object.
    """
    content = read_content(filename, compression)
    try:
        return yaml.safe_load(content)
    except yaml.YAMLError as error:
        raise FormatError("cannot parse %s: %s" % (filename, error)) from error


def write_yaml(
    filename: Union[str, Path],
    data: Any,
    mode: str = "w",
    compression: Optional[str] = "infer",
    level: Optional[int] = None,
) -> None:
    """
    Write a YAML-serializable object to a YAML file.

    Note:
        The YAML content is dumped with `sort_keys=False`, preserving the original order
        of keys in dictionaries.
    """
    write_content(filename, yaml.dump(data, sort_keys=False), mode, compression, level)


def path_to_document(
    path: ParamPath,
    activation: ActivationFamily,
    channel_kind: Optional[ChannelKind] = None,
) -> Dict[str, Any]:
    """structure, activation {a}, optional grid, segments [{duration, W, b, alpha}]."""
    document: Dict[str, Any] = {
        "structure": path.structure.value,
        "activation": {"a": activation.slope},
    }
    if channel_kind is not None and channel_kind.is_grid:
        document["grid"] = channel_kind_to_document(channel_kind)
    document["segments"] = [
        {
            "duration": segment.duration,
            "W": coupling_to_document(segment.weight),
            "b": np.asarray(segment.bias).tolist(),
            "alpha": segment.alpha,
        }
        for segment in path.segments
    ]
    return document


def path_from_document(
    document: Any,
) -> Tuple[ParamPath, ActivationFamily, ChannelKind]:
    """
    Parse a parameter-path document.

    Raises:
        FormatError: On missing fields or malformed entries.
    """
    if not isinstance(document, dict):
        raise FormatError("a path document must be a mapping")
    try:
        structure = Structure(document["structure"])
        activation = ActivationFamily(float(document["activation"]["a"]))
        kind = (
            channel_kind_from_document(document["grid"])
            if "grid" in document
            else ChannelKind.scalar()
        )
        segments = []
        for index, raw in enumerate(document["segments"]):
            segments.append(
                ParamSegment(
                    raw["duration"],
                    coupling_from_document(raw["W"], kind, "segments[%d].W" % index),
                    raw["b"],
                    raw.get("alpha", 0.0),
                )
            )
        return ParamPath(structure, tuple(segments)), activation, kind
    except (KeyError, TypeError) as error:
        raise FormatError("path document is missing or mistypes %s" % error) from error
    except FormatError:
        raise
    except (StructureError, ValueError) as error:
        raise FormatError("invalid path document: %s" % error) from error


def read_path(
    filename: Union[str, Path], compression: Optional[str] = "infer"
) -> Tuple[ParamPath, ActivationFamily, ChannelKind]:
    """Read a parameter-path document (YAML or JSON)."""
    return path_from_document(read_yaml(filename, compression))


def write_path(
    filename: Union[str, Path],
    path: ParamPath,
    activation: ActivationFamily,
    channel_kind: Optional[ChannelKind] = None,
    compression: Optional[str] = "infer",
) -> None:
    document = path_to_document(path, activation, channel_kind)
    write_yaml(filename, document, compression=compression)
