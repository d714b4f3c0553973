"""STF1 tensor files.

Layout: magic ``STF1``, u32 LE rank, rank × u32 LE dims, then row-major
float32 LE values. A file may hold several tensors back to back.
"""
import struct
from pathlib import Path

import numpy as np

from errors import FormatError

MAGIC = b"STF1"
_U32 = struct.Struct("<I")
_LE_F32 = np.dtype("<f4")


def encode_tensor(array):
    array = np.asarray(array)
    if array.ndim == 0:
        raise FormatError("STF1 cannot hold a rank-0 tensor")
    header = MAGIC + _U32.pack(array.ndim) + b"".join(_U32.pack(int(d)) for d in array.shape)
    return header + np.ascontiguousarray(array, dtype=_LE_F32).tobytes()


def write_tensor(path, array):
    Path(path).write_bytes(encode_tensor(array))


def write_tensor_sequence(path, arrays):
    with open(path, "wb") as fh:
        count = 0
        for array in arrays:
            fh.write(encode_tensor(array))
            count += 1
    return count


def _read_exact(fh, n, what, index):
    data = fh.read(n)
    if len(data) != n:
        raise FormatError(f"truncated STF1 {what} in tensor {index} of {getattr(fh, 'name', '<stream>')}")
    return data


def _read_header(fh, index):
    magic = fh.read(4)
    if not magic:
        return None
    if len(magic) != 4:
        raise FormatError(f"truncated STF1 header in tensor {index}")
    if magic != MAGIC:
        raise FormatError(f"bad STF1 magic {magic!r} in tensor {index}")
    (rank,) = _U32.unpack(_read_exact(fh, 4, "rank", index))
    if rank == 0:
        raise FormatError(f"rank-0 tensor at index {index}")
    return tuple(_U32.unpack(_read_exact(fh, 4, "dims", index))[0] for _ in range(rank))


def read_next_tensor(fh, index=0):
    """Read one tensor from an open binary handle; ``None`` at clean EOF."""
    dims = _read_header(fh, index)
    if dims is None:
        return None
    count = int(np.prod(dims, dtype=np.int64))
    payload = _read_exact(fh, count * 4, "payload", index)
    return np.frombuffer(payload, dtype=_LE_F32).astype(np.float32).reshape(dims)


def skip_next_tensor(fh, index=0):
    """Seek past one tensor without decoding it; ``False`` at clean EOF."""
    dims = _read_header(fh, index)
    if dims is None:
        return False
    fh.seek(int(np.prod(dims, dtype=np.int64)) * 4, 1)
    return True


def iter_tensor_sequence(path, start=0):
    """Yield the tensors of a file one at a time, from index ``start`` on."""
    with open(path, "rb") as fh:
        index = 0
        while index < start:
            if not skip_next_tensor(fh, index):
                return
            index += 1
        while True:
            array = read_next_tensor(fh, index)
            if array is None:
                return
            yield array
            index += 1


def read_tensor(path):
    tensors = iter_tensor_sequence(path)
    first = next(tensors, None)
    if first is None:
        raise FormatError(f"{path} holds no STF1 tensor")
    return first
