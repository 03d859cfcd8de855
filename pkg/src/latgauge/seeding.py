"""Per-chain random streams derived from a single 64-bit master seed.

Derivation (fixed, so other implementations can reproduce the streams):

1. ``digest = SHA-256(b"latgauge-chain" || u64le(master_seed) || u64le(index))``
2. ``state = int.from_bytes(digest[0:16], "little")``,
   ``inc = int.from_bytes(digest[16:32], "little") | 1``
3. The generator is PCG64 (XSL-RR 128/64, as implemented by NumPy's
   ``numpy.random.PCG64``) with that raw ``state`` and ``inc``.

Auxiliary streams (boundary draws, test vectors) use the same scheme with a
different domain tag.
"""
from __future__ import annotations

import hashlib
import struct

import numpy as np

MASK64 = (1 << 64) - 1


def _digest(tag: bytes, master_seed: int, index: int) -> bytes:
    if not 0 <= master_seed <= MASK64:
        raise ValueError("master seed must be an unsigned 64-bit integer")
    if index < 0 or index > MASK64:
        raise ValueError("stream index must be a non-negative 64-bit integer")
    return hashlib.sha256(tag + struct.pack("<QQ", master_seed, index)).digest()


def stream_state(master_seed: int, index: int, tag: bytes = b"latgauge-chain") -> tuple[int, int]:
    """Raw PCG64 (state, inc) for a stream."""
    h = _digest(tag, int(master_seed), int(index))
    return int.from_bytes(h[:16], "little"), int.from_bytes(h[16:], "little") | 1


def _generator(state: int, inc: int) -> np.random.Generator:
    bg = np.random.PCG64()
    bg.state = {
        "bit_generator": "PCG64",
        "state": {"state": state, "inc": inc},
        "has_uint32": 0,
        "uinteger": 0,
    }
    return np.random.Generator(bg)


def derive_chain_seed(master_seed: int, chain_index: int) -> np.random.Generator:
    """Independent, reproducible generator for chain ``chain_index``."""
    return _generator(*stream_state(master_seed, chain_index))


def derive_aux_rng(master_seed: int, index: int, tag: str = "aux") -> np.random.Generator:
    return _generator(*stream_state(master_seed, index, tag=b"latgauge-" + tag.encode()))


def rng_state_words(rng: np.random.Generator) -> tuple[int, int, int, int, int, int]:
    """Generator state as six u64 words: state lo/hi, inc lo/hi, has_uint32, uinteger."""
    st = rng.bit_generator.state
    if st["bit_generator"] != "PCG64":
        raise TypeError("only PCG64 generators can be checkpointed")
    s, inc = st["state"]["state"], st["state"]["inc"]
    return (s & MASK64, s >> 64, inc & MASK64, inc >> 64, int(st["has_uint32"]), int(st["uinteger"]))


def rng_from_words(words) -> np.random.Generator:
    s_lo, s_hi, i_lo, i_hi, has32, uint = (int(w) for w in words)
    rng = _generator(s_lo | (s_hi << 64), i_lo | (i_hi << 64))
    st = rng.bit_generator.state
    st["has_uint32"] = has32
    st["uinteger"] = uint
    rng.bit_generator.state = st
    return rng
