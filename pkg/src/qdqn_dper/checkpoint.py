"""Portable parameter checkpoints.

Layout (all integers and floats little-endian)::

    8 bytes   magic  b"QDQNCKPT"
    uint32    format version (1)
    uint32    variant: 0 = quantum, 1 = classical
    int64     seed the run was started with (-1 if unknown)
    uint32    n_qubits, n_layers, obs_dim, n_actions
    uint32    entangler: 0 = ring, 1 = chain, 2 = none
    uint32    number of fields F
    F times:  uint32 ndim, then ndim x uint32 dims
    uint64    number of values V (sum of field sizes)
    V x float64  flat parameter vector, fields in header order
"""

import struct

import numpy as np

from .circuit import ENTANGLERS
from .errors import ConfigurationError
from .model import Architecture, ModelParams, Variant

MAGIC = b"QDQNCKPT"
VERSION = 1
_VARIANTS = (Variant.QUANTUM, Variant.CLASSICAL)


def dumps(params, seed=-1):
    arch = params.arch
    parts = [
        MAGIC,
        struct.pack("<IIq", VERSION, _VARIANTS.index(arch.variant), seed),
        struct.pack("<5I", arch.n_qubits, arch.n_layers, arch.obs_dim, arch.n_actions,
                    ENTANGLERS.index(arch.entangler)),
        struct.pack("<I", len(arch.layout)),
    ]
    for _, shape in arch.layout:
        parts.append(struct.pack(f"<I{len(shape)}I", len(shape), *shape))
    parts.append(struct.pack("<Q", params.flat.shape[0]))
    parts.append(params.flat.astype("<f8").tobytes())
    return b"".join(parts)


def loads(blob):
    """Parse a checkpoint; returns ``(params, seed)``."""
    if blob[:8] != MAGIC:
        raise ConfigurationError("not a checkpoint: bad magic")
    pos = 8
    version, variant, seed = struct.unpack_from("<IIq", blob, pos)
    pos += 16
    if version != VERSION:
        raise ConfigurationError(f"unsupported checkpoint version {version}")
    n_qubits, n_layers, obs_dim, n_actions, entangler = struct.unpack_from("<5I", blob, pos)
    pos += 20
    arch = Architecture(_VARIANTS[variant], obs_dim, n_qubits, n_layers, n_actions, ENTANGLERS[entangler])
    (n_fields,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    shapes = []
    for _ in range(n_fields):
        (ndim,) = struct.unpack_from("<I", blob, pos)
        shapes.append(struct.unpack_from(f"<{ndim}I", blob, pos + 4))
        pos += 4 + 4 * ndim
    if shapes != [shape for _, shape in arch.layout]:
        raise ConfigurationError("checkpoint field shapes do not match its architecture")
    (n_values,) = struct.unpack_from("<Q", blob, pos)
    pos += 8
    flat = np.frombuffer(blob, dtype="<f8", count=n_values, offset=pos).astype(np.float64)
    return ModelParams(arch, flat), seed


def save(path, params, seed=-1):
    with open(path, "wb") as fh:
        fh.write(dumps(params, seed))


def load(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
