"""
Binary checkpoints of named parameter tensors.

Layout: magic b'CVNMT1', then one record per parameter in lexicographic name
order: <u32 name length> <name utf-8> <u32 rank> <u32 extent>*rank <f32 values, little-endian>
"""
import struct
from pathlib import Path
from typing import Dict, Union

import numpy as np

from .console import log_console
from .errors import CheckpointError
from .params import ModelParams
from .tensor import parameter

MAGIC = b'CVNMT1'
VALUE_DTYPE = np.dtype('<f4')


def checkpoint_path(directory: Union[str, Path], epoch: int) -> Path:
    return Path(directory) / f'checkpoint-e{epoch:03d}.bin'


def latest_checkpoint(directory: Union[str, Path]) -> Path:
    """Highest-epoch checkpoint in a training output directory"""
    found = sorted(Path(directory).glob('checkpoint-e*.bin'))
    if not found:
        raise CheckpointError(f"no checkpoint found in {directory}", path=directory)
    return found[-1]


def encode_params(params: ModelParams) -> bytes:
    chunks = [MAGIC]
    for name in sorted(params.names()):
        data = np.ascontiguousarray(params[name].data, dtype=VALUE_DTYPE)
        raw_name = name.encode('utf-8')
        chunks.append(struct.pack('<I', len(raw_name)))
        chunks.append(raw_name)
        chunks.append(struct.pack('<I', data.ndim))
        chunks.append(struct.pack(f'<{data.ndim}I', *data.shape))
        chunks.append(data.tobytes())
    return b''.join(chunks)


def save_checkpoint(params: ModelParams, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_params(params))
    log_console(f"checkpoint written to {path} ({len(params)} tensors)")
    return path


def decode_params(raw: bytes, source: str = '<memory>') -> Dict[str, np.ndarray]:
    if not raw.startswith(MAGIC):
        raise CheckpointError("not a checkpoint file (bad magic)", path=source)
    arrays = {}
    offset = len(MAGIC)

    def read(count: int) -> bytes:
        nonlocal offset
        if offset + count > len(raw):
            raise CheckpointError(f"checkpoint truncated at byte {offset}", path=source)
        chunk = raw[offset:offset + count]
        offset += count
        return chunk

    while offset < len(raw):
        (name_len,) = struct.unpack('<I', read(4))
        try:
            name = read(name_len).decode('utf-8')
        except UnicodeDecodeError:
            raise CheckpointError(f"unreadable parameter name at byte {offset}", path=source) from None
        (rank,) = struct.unpack('<I', read(4))
        extents = struct.unpack(f'<{rank}I', read(4 * rank))
        count = int(np.prod(extents, dtype=np.int64))
        values = np.frombuffer(read(count * VALUE_DTYPE.itemsize), dtype=VALUE_DTYPE)
        if name in arrays:
            raise CheckpointError(f"parameter '{name}' stored twice", path=source)
        arrays[name] = values.reshape(extents)
    return arrays


def load_checkpoint(path: Union[str, Path]) -> ModelParams:
    """Read a checkpoint back into float32 parameters and validate the architecture"""
    path = Path(path)
    if not path.exists():
        raise CheckpointError("checkpoint file not found", path=path)
    arrays = decode_params(path.read_bytes(), str(path))
    params = ModelParams({name: parameter(values.astype(np.float32), name=name) for name, values in arrays.items()})
    params.infer_shape()
    return params
