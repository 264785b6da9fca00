"""
Model documents: networks and operator models as versioned JSON
"""

import json
import math
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from .common import read_content, write_content
from .convops import ConvKernel
from .core import ChannelKind
from .errors import FormatError, StructureError, VersionError
from .network import Layer, LayerKind, Network
from .operator import BasisFrame, OperatorModel

FORMAT_VERSION = "1"
SUPPORTED_VERSIONS = (FORMAT_VERSION,)


def _reject_constant(name: str) -> float:
    raise FormatError("non-finite number in model document: %s" % name)


def _finite_array(value: Any, name: str, ndim: Optional[int] = None) -> np.ndarray:
    try:
        array = np.array(value, dtype=float)
    except (TypeError, ValueError) as error:
        raise FormatError("%s is not a numeric array" % name) from error
    if ndim is not None and array.ndim != ndim:
        raise FormatError(
            "%s must have %d dimensions, got %d" % (name, ndim, array.ndim)
        )
    if not np.all(np.isfinite(array)):
        raise FormatError("%s has non-finite entries" % name)
    return array


def _finite_number(value: Any, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise FormatError("%s must be a number, got %r" % (name, value))
    if not math.isfinite(value):
        raise FormatError("%s is not finite" % name)
    return float(value)


def channel_kind_to_document(kind: ChannelKind) -> Dict[str, int]:
    return {"grid_size": kind.grid_size, "grid_dim": kind.grid_dim}


def channel_kind_from_document(document: Any) -> ChannelKind:
    try:
        return ChannelKind(int(document["grid_size"]), int(document["grid_dim"]))
    except (KeyError, TypeError, ValueError, StructureError) as error:
        raise FormatError("malformed channel_kind: %r" % (document,)) from error


def coupling_to_document(weight: Any) -> Any:
    """Dense W as row-major nested lists, kernels as {kind, values}."""
    if isinstance(weight, ConvKernel):
        return {"kind": weight.kind, "values": weight.values.tolist()}
    return np.asarray(weight, dtype=float).tolist()


def coupling_from_document(document: Any, kind: ChannelKind, name: str) -> Any:
    if isinstance(document, dict):
        try:
            return ConvKernel(
                document["kind"],
                _finite_array(document["values"], name + ".values"),
                kind,
            )
        except KeyError as error:
            raise FormatError("%s is missing %s" % (name, error)) from error
        except StructureError as error:
            raise FormatError("%s: %s" % (name, error)) from error
    return _finite_array(document, name, ndim=2)


def _layer_to_document(layer: Layer) -> Dict[str, Any]:
    document: Dict[str, Any] = {
        "kind": layer.kind.value,
        "W": coupling_to_document(layer.weight),
        "b": layer.bias.tolist(),
    }
    if layer.kind is LayerKind.RESIDUAL:
        document["dt"] = layer.step
        document["slope"] = layer.slope
    elif layer.kind is LayerKind.PLAIN:
        document["gamma"] = layer.gamma
        document["scale"] = layer.scale
    if layer.skip != 0.0:
        document["skip"] = layer.skip
    return document


def _layer_from_document(document: Any, kind: ChannelKind, index: int) -> Layer:
    name = "layers[%d]" % index
    if not isinstance(document, dict):
        raise FormatError("%s must be an object" % name)
    try:
        layer_kind = LayerKind(document["kind"])
        weight = coupling_from_document(document["W"], kind, name + ".W")
        bias = _finite_array(document["b"], name + ".b")
        numbers = {}
        if layer_kind is LayerKind.RESIDUAL:
            numbers["step"] = _finite_number(document["dt"], name + ".dt")
            numbers["slope"] = _finite_number(document["slope"], name + ".slope")
        elif layer_kind is LayerKind.PLAIN:
            numbers["gamma"] = _finite_number(document["gamma"], name + ".gamma")
            numbers["scale"] = _finite_number(document["scale"], name + ".scale")
        numbers["skip"] = _finite_number(document.get("skip", 0.0), name + ".skip")
        return Layer(weight, bias, layer_kind, **numbers)
    except KeyError as error:
        raise FormatError("%s is missing %s" % (name, error)) from error
    except StructureError as error:
        raise FormatError("%s: %s" % (name, error)) from error
    except ValueError as error:
        if isinstance(error, FormatError):
            raise
        raise FormatError("%s: %s" % (name, error)) from error


def network_to_document(net: Network) -> Dict[str, Any]:
    """The model document of a network, keys in a fixed order."""
    return {
        "format_version": FORMAT_VERSION,
        "structure_kind": net.structure_kind,
        "channel_kind": channel_kind_to_document(net.channel_kind),
        "D": net.width,
        "activation": {"a": net.slope},
        "lift": net.lift.tolist(),
        "layers": [_layer_to_document(layer) for layer in net.layers],
        "readout": net.readout.tolist(),
    }


def _check_version(document: Any) -> None:
    if not isinstance(document, dict):
        raise FormatError("a model document must be a JSON object")
    version = document.get("format_version")
    if version is None:
        raise FormatError("model document has no format_version")
    if str(version) not in SUPPORTED_VERSIONS:
        raise VersionError(
            "unsupported format_version %r, supported: %s"
            % (version, SUPPORTED_VERSIONS)
        )


def network_from_document(document: Any) -> Network:
    """
    Rebuild a network from its document.

    Raises:
        VersionError: If format_version is not supported.
        FormatError: On missing fields, wrong shapes or non-finite numbers.
    """
    _check_version(document)
    try:
        kind = channel_kind_from_document(document["channel_kind"])
        width = document["D"]
        lift = _finite_array(document["lift"], "lift", ndim=2)
        readout = _finite_array(document["readout"], "readout", ndim=2)
        slope = _finite_number(document["activation"]["a"], "activation.a")
        raw_layers = document["layers"]
        structure_kind = document["structure_kind"]
    except (KeyError, TypeError) as error:
        raise FormatError("model document is missing %s" % error) from error
    if not isinstance(raw_layers, list):
        raise FormatError("layers must be a list")
    if lift.shape[0] != width:
        raise FormatError("lift targets %d channels, D is %r" % (lift.shape[0], width))

    layers = tuple(
        _layer_from_document(layer, kind, i) for i, layer in enumerate(raw_layers)
    )
    try:
        return Network(lift, layers, readout, kind, structure_kind, slope)
    except StructureError as error:
        raise FormatError(str(error)) from error


def _dumps(document: Dict[str, Any]) -> bytes:
    text = json.dumps(document, allow_nan=False, separators=(",", ":"))
    return (text + "\n").encode()


def _loads(data: Union[bytes, str]) -> Any:
    if isinstance(data, bytes):
        try:
            data = data.decode()
        except UnicodeDecodeError as error:
            raise FormatError("model document is not UTF-8") from error
    try:
        return json.loads(data, parse_constant=_reject_constant)
    except json.JSONDecodeError as error:
        raise FormatError("cannot parse model document: %s" % error) from error


def save(net: Network) -> bytes:
    """
    Serialize a network. The output is canonical: the same network always yields the
    same bytes, and floats use their shortest round-trip form.
    """
    return _dumps(network_to_document(net))


def load(data: Union[bytes, str]) -> Network:
    """
    Parse a network saved by `save`.

    Raises:
        FormatError: If the document is truncated or malformed.
        VersionError: If the format version is unknown.
    """
    return network_from_document(_loads(data))


def operator_to_document(model: OperatorModel) -> Dict[str, Any]:
    document = network_to_document(model.core)
    document["basis"] = {
        "grid": channel_kind_to_document(model.frame.grid),
        "input": model.frame.input_basis.tolist(),
        "output": model.frame.output_basis.tolist(),
    }
    document["metadata"] = {
        key: value.item() if isinstance(value, np.generic) else value
        for key, value in model.metadata.items()
    }
    return document


def operator_from_document(document: Any) -> OperatorModel:
    core = network_from_document(document)
    try:
        basis = document["basis"]
        grid = channel_kind_from_document(basis["grid"])
        frame = BasisFrame(
            _finite_array(basis["input"], "basis.input"),
            _finite_array(basis["output"], "basis.output"),
            grid,
        )
        metadata = dict(document.get("metadata", {}))
        return OperatorModel(frame, core, metadata)
    except (KeyError, TypeError) as error:
        raise FormatError("operator document is missing %s" % error) from error
    except StructureError as error:
        raise FormatError(str(error)) from error


def save_operator(model: OperatorModel) -> bytes:
    return _dumps(operator_to_document(model))


def load_operator(data: Union[bytes, str]) -> OperatorModel:
    return operator_from_document(_loads(data))


def write_model(
    filename: Union[str, Path],
    model: Union[Network, OperatorModel],
    compression: Optional[str] = "infer",
    level: Optional[int] = None,
) -> None:
    """
    Write a network or operator model document.

    Args:
        filename (Union[str, Path]): File to write to.
        model (Union[Network, OperatorModel]): What to save.
        compression (Optional[str], optional): File compression method. Options: 'bz2',
            'gzip', 'xz', 'zstd', None (no compression), or 'infer'. Defaults to
            'infer'.
        level (Optional[int], optional): Compression level. Defaults to None.
    """
    data = save_operator(model) if isinstance(model, OperatorModel) else save(model)
    write_content(filename, data.decode(), "w", compression, level)


def read_model(
    filename: Union[str, Path], compression: Optional[str] = "infer"
) -> Union[Network, OperatorModel]:
    """Read a document written by `write_model`; documents with a basis block load as
    operator models."""
    document = _loads(read_content(filename, compression))
    if isinstance(document, dict) and "basis" in document:
        return operator_from_document(document)
    return network_from_document(document)
