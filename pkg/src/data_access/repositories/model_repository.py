"""
Binary model store.

    b"DDNN" | u16 LE format version | u32 LE header length | UTF-8 JSON header
    then one block per entry of header["blocks"]:
        u64 LE rows | u64 LE cols | rows*cols f64 LE, row-major

The JSON header uses sorted keys and compact separators, so saving the same
network always produces the same bytes.
"""
import json
import math
import struct
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import ValidationError

from src.data_access.models.dataset_model import NormalizationParams
from src.data_access.models.model_file import FORMAT_VERSION, MAGIC, FinalHeader, LayerHeader, ModelHeader
from src.data_access.models.network_model import (
    AtomAllocation,
    FinalLayerModel,
    LayerKind,
    TrainedLayer,
    TrainedNetwork,
)
from src.data_access.models.spec_model import NetworkSpec
from src.data_access.repositories.interfaces import IModelRepository
from src.shared.exceptions import (
    BadMagicError,
    DimensionChainError,
    ModelDimensionError,
    ModelStoreIOError,
    UnsupportedVersionError,
)
from src.shared.logging import get_logger
from src.shared.numerics import RNG_ALGORITHM, Matrix

logger = get_logger(__name__)

_PREFIX = struct.Struct("<4sHI")
_BLOCK = struct.Struct("<QQ")


_NON_FINITE = {"inf": math.inf, "-inf": -math.inf, "nan": math.nan}


def _encode_non_finite(value: Any) -> Any:
    """JSON has no inf or nan: such floats are written as "inf", "-inf" or "nan"."""
    if isinstance(value, float) and not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {key: _encode_non_finite(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_encode_non_finite(item) for item in value]
    return value


def _decode_non_finite(value: Any) -> Any:
    if isinstance(value, str) and value in _NON_FINITE:
        return _NON_FINITE[value]
    if isinstance(value, dict):
        return {key: _decode_non_finite(item) for key, item in value.items()}
    if isinstance(value, list):
        return [_decode_non_finite(item) for item in value]
    return value


def _row(values) -> Matrix:
    return np.asarray(values, dtype=np.float64).reshape(1, -1)


def _layer_blocks(k: int, layer: TrainedLayer) -> List[Tuple[str, Matrix]]:
    blocks = [
        (f"layer{k}.D", layer.D),
        (f"layer{k}.Z", layer.Z),
        (f"layer{k}.loss_trace", _row(layer.loss_trace)),
    ]
    if layer.theta is not None:
        blocks.append((f"layer{k}.theta", _row(layer.theta)))
    return blocks


def _final_blocks(final: FinalLayerModel, codes: Matrix) -> List[Tuple[str, Matrix]]:
    blocks = [("final.D", final.D), ("final.M", final.M)]
    if final.W is not None:
        blocks.append(("final.W", final.W))
    blocks.extend([("final.Z", codes), ("final.loss_trace", _row(final.loss_trace))])
    return blocks


def _build_header(net: TrainedNetwork, normalization: Optional[NormalizationParams],
                  blocks: List[str]) -> ModelHeader:
    return ModelHeader(
        variant=net.spec.variant,
        activation=net.activation,
        guard=net.guard,
        input_dim=net.input_dim,
        layers=[
            LayerHeader(
                kind=layer.kind,
                input_dim=layer.input_dim,
                atoms=layer.atoms,
                samples=layer.Z.shape[1],
                iterations=layer.iterations,
                stop_reason=layer.stop_reason,
                bias=float(layer.bias),
                class_of_atom=layer.class_of_atom,
            )
            for layer in net.layers
        ],
        final=FinalHeader(
            input_dim=net.final.D.shape[0],
            atoms=net.final.atoms,
            classes=net.final.class_count,
            samples=net.final_codes.shape[1],
            mu=net.final.mu,
            has_w=net.final.W is not None,
            iterations=net.final.iterations,
            stop_reason=net.final.stop_reason,
            class_of_atom=list(net.final.allocation.class_of_atom),
        ),
        class_labels=list(net.class_labels),
        rng=RNG_ALGORITHM,
        network_spec=_encode_non_finite(net.spec.model_dump()),
        normalization=normalization.to_dict() if normalization is not None else None,
        blocks=blocks,
    )


def serialize_model(net: TrainedNetwork, normalization: Optional[NormalizationParams] = None) -> bytes:
    blocks: List[Tuple[str, Matrix]] = []
    for k, layer in enumerate(net.layers, start=1):
        blocks.extend(_layer_blocks(k, layer))
    blocks.extend(_final_blocks(net.final, net.final_codes))

    header = _build_header(net, normalization, [name for name, _ in blocks])
    header_bytes = json.dumps(
        header.model_dump(mode="json"), sort_keys=True, separators=(",", ":")
    ).encode("utf-8")

    parts = [_PREFIX.pack(MAGIC, FORMAT_VERSION, len(header_bytes)), header_bytes]
    for _, matrix in blocks:
        rows, cols = matrix.shape
        parts.append(_BLOCK.pack(rows, cols))
        parts.append(np.ascontiguousarray(matrix, dtype="<f8").tobytes())
    return b"".join(parts)


def parse_header(raw: bytes, path: str) -> Tuple[ModelHeader, int]:
    """
    Validate magic and version, then decode the JSON header.

    Returns:
        (header, offset of the first matrix block)
    """
    if len(raw) < 4 or raw[:4] != MAGIC:
        raise BadMagicError(path)
    if len(raw) < _PREFIX.size:
        raise ModelDimensionError(path, "header", "file ends inside the fixed prefix")
    _, version, header_len = _PREFIX.unpack_from(raw, 0)
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(path, version)

    end = _PREFIX.size + header_len
    if len(raw) < end:
        raise ModelDimensionError(path, "header", f"declares {header_len} bytes, {len(raw) - _PREFIX.size} present")
    try:
        header = ModelHeader.model_validate(json.loads(raw[_PREFIX.size:end].decode("utf-8")))
    except (UnicodeDecodeError, json.JSONDecodeError, ValidationError) as e:
        raise ModelDimensionError(path, "header", f"invalid metadata: {e}") from None
    return header, end


def _read_blocks(raw: bytes, path: str, names: List[str], offset: int) -> Dict[str, Matrix]:
    blocks: Dict[str, Matrix] = {}
    for name in names:
        if len(raw) - offset < _BLOCK.size:
            raise ModelDimensionError(path, name, "file ends before the block dimensions")
        rows, cols = _BLOCK.unpack_from(raw, offset)
        offset += _BLOCK.size
        nbytes = rows * cols * 8
        if len(raw) - offset < nbytes:
            raise ModelDimensionError(
                path, name, f"declares {rows}x{cols} reals, only {len(raw) - offset} bytes remain"
            )
        data = np.frombuffer(raw, dtype="<f8", count=rows * cols, offset=offset)
        blocks[name] = data.reshape(rows, cols).astype(np.float64)
        offset += nbytes
    if offset != len(raw):
        raise ModelDimensionError(path, "trailer", f"{len(raw) - offset} unexpected bytes after the last block")
    return blocks


def _check_chain(header: ModelHeader) -> None:
    previous = header.input_dim
    for k, layer in enumerate(header.layers, start=1):
        if layer.input_dim != previous:
            raise DimensionChainError(k, layer.input_dim, previous)
        previous = layer.atoms
    if header.final.input_dim != previous:
        raise DimensionChainError(len(header.layers) + 1, header.final.input_dim, previous)


def _block(blocks: Dict[str, Matrix], path: str, name: str, shape: Tuple[Optional[int], Optional[int]]) -> Matrix:
    if name not in blocks:
        raise ModelDimensionError(path, name, "block missing")
    matrix = blocks[name]
    for axis, expected in enumerate(shape):
        if expected is not None and matrix.shape[axis] != expected:
            raise ModelDimensionError(
                path, name, f"shape {matrix.shape[0]}x{matrix.shape[1]}, axis {axis} should be {expected}"
            )
    return matrix


def deserialize_model(raw: bytes, path: str) -> Tuple[TrainedNetwork, Optional[NormalizationParams]]:
    header, offset = parse_header(raw, path)
    _check_chain(header)
    blocks = _read_blocks(raw, path, header.blocks, offset)

    layers: List[TrainedLayer] = []
    for k, info in enumerate(header.layers, start=1):
        theta = None
        if info.kind == LayerKind.LOGISTIC:
            theta = _block(blocks, path, f"layer{k}.theta", (1, info.atoms)).ravel()
        layers.append(TrainedLayer(
            D=_block(blocks, path, f"layer{k}.D", (info.input_dim, info.atoms)),
            Z=_block(blocks, path, f"layer{k}.Z", (info.atoms, info.samples)),
            loss_trace=_block(blocks, path, f"layer{k}.loss_trace", (1, None)).ravel().tolist(),
            iterations=info.iterations,
            stop_reason=info.stop_reason,
            kind=info.kind,
            theta=theta,
            bias=info.bias,
            class_of_atom=info.class_of_atom,
        ))

    f = header.final
    final = FinalLayerModel(
        D=_block(blocks, path, "final.D", (f.input_dim, f.atoms)),
        M=_block(blocks, path, "final.M", (f.classes, f.atoms)),
        W=_block(blocks, path, "final.W", (f.atoms, f.atoms)) if f.has_w else None,
        mu=f.mu,
        allocation=AtomAllocation(class_of_atom=tuple(f.class_of_atom)),
        loss_trace=_block(blocks, path, "final.loss_trace", (1, None)).ravel().tolist(),
        iterations=f.iterations,
        stop_reason=f.stop_reason,
    )
    if len(header.class_labels) != f.classes:
        raise ModelDimensionError(path, "final.M", f"{f.classes} classifier rows for {len(header.class_labels)} labels")

    try:
        spec = NetworkSpec.model_validate(_decode_non_finite(header.network_spec))
    except ValidationError as e:
        raise ModelDimensionError(path, "header", f"invalid network spec: {e}") from None

    net = TrainedNetwork(
        layers=layers,
        final=final,
        final_codes=_block(blocks, path, "final.Z", (f.atoms, f.samples)),
        activation=header.activation,
        guard=header.guard,
        class_labels=tuple(header.class_labels),
        spec=spec,
    )
    normalization = NormalizationParams.from_dict(header.normalization) if header.normalization else None
    return net, normalization


def save_model(net: TrainedNetwork, normalization: Optional[NormalizationParams], path: str) -> None:
    data = serialize_model(net, normalization)
    try:
        with open(path, "wb") as f:
            f.write(data)
    except OSError as e:
        raise ModelStoreIOError(str(path), f"cannot write model: {e.strerror or e}") from e
    logger.info(f"Saved model to {path} ({len(data)} bytes)")


def _read_file(path: str) -> bytes:
    try:
        with open(path, "rb") as f:
            return f.read()
    except OSError as e:
        raise ModelStoreIOError(str(path), f"cannot read model: {e.strerror or e}") from e


def load_model(path: str) -> Tuple[TrainedNetwork, Optional[NormalizationParams]]:
    return deserialize_model(_read_file(path), str(path))


def read_header(path: str) -> ModelHeader:
    """Magic, version and header only; matrix blocks are not decoded."""
    header, _ = parse_header(_read_file(path), str(path))
    return header


class ModelRepository(IModelRepository):
    """File-system model store"""

    def save(self, net: TrainedNetwork, normalization: Optional[NormalizationParams], path: str) -> None:
        save_model(net, normalization, path)

    def load(self, path: str) -> Tuple[TrainedNetwork, Optional[NormalizationParams]]:
        return load_model(path)

    def read_header(self, path: str) -> ModelHeader:
        return read_header(path)
