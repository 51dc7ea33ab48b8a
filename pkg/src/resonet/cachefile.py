"""Binary containers for cached features, node states and trained models.

All files share a fixed little-endian layout: a 4-byte magic, a u16
format version, a type-specific header, a row-major float64 payload and
a trailing 64-bit checksum (BLAKE2b-8 over everything before it).
Readers verify magic, version, checksum and, when given one, the config
hash recorded at write time, so caches from different configurations
cannot be mixed silently.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from .errors import CacheError
from .filterbank import FeatureMatrix
from .readout import ReadoutModel, ReadoutOptions
from .reservoir import NeuronStates, StnoParams

MAGIC_FEATURES = b"RNBF"
MAGIC_STATES = b"RNBS"
MAGIC_MODEL = b"RNBM"
CACHE_VERSION = 1

FILTER_CODES = {"spectro_real": 0, "spectro_exp": 1, "spectro_hp": 2,
                "mfcc": 3, "cochlear": 4}
FILTER_NAMES = {v: k for k, v in FILTER_CODES.items()}
NODE_CODES = {"stno": 0, "tanh": 1, "none": 255}
NODE_NAMES = {v: k for k, v in NODE_CODES.items()}

_HASH_LEN = 8


def _checksum(data: bytes) -> bytes:
    return hashlib.blake2b(data, digest_size=8).digest()


def _normalize_hash(config_hash: bytes | str | None) -> bytes:
    if config_hash is None:
        return b"\x00" * _HASH_LEN
    if isinstance(config_hash, str):
        config_hash = bytes.fromhex(config_hash)
    if len(config_hash) != _HASH_LEN:
        raise CacheError(f"config hash must be {_HASH_LEN} bytes, got {len(config_hash)}")
    return config_hash


def _finish(path: Path, body: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(body + _checksum(body))


def _open(path: str | Path, magic: bytes) -> bytes:
    path = Path(path)
    if not path.exists():
        raise CacheError(f"cache file not found: {path}")
    blob = path.read_bytes()
    if len(blob) < len(magic) + 2 + 8:
        raise CacheError(f"cache file truncated: {path}")
    if blob[:4] != magic:
        raise CacheError(
            f"{path}: bad magic {blob[:4]!r}, expected {magic!r}")
    body, trailer = blob[:-8], blob[-8:]
    if _checksum(body) != trailer:
        raise CacheError(f"{path}: checksum mismatch, file is corrupt")
    (version,) = struct.unpack("<H", body[4:6])
    if version != CACHE_VERSION:
        raise CacheError(
            f"{path}: cache version {version} != {CACHE_VERSION}; regenerate "
            f"the cache (delete the file or rerun featurize)")
    return body[6:]


def _check_hash(path, stored: bytes, expected: bytes | str | None) -> None:
    if expected is None:
        return
    if stored != _normalize_hash(expected):
        raise CacheError(
            f"{path}: cache was written under a different config "
            f"(hash {stored.hex()}); regenerate it")


def write_feature_cache(path: str | Path, fm: FeatureMatrix,
                        config_hash: bytes | str | None = None) -> None:
    alpha = fm.alpha if fm.alpha is not None else float("nan")
    header = MAGIC_FEATURES + struct.pack("<HBdII", CACHE_VERSION,
                                          FILTER_CODES[fm.filter_kind], alpha,
                                          fm.n_rows, fm.n_frames)
    header += _normalize_hash(config_hash)
    clip = fm.clip_id.encode()
    header += struct.pack("<H", len(clip)) + clip
    payload = np.ascontiguousarray(fm.values, dtype="<f8").tobytes()
    _finish(Path(path), header + payload)


def read_feature_cache(path: str | Path,
                       config_hash: bytes | str | None = None) -> FeatureMatrix:
    body = _open(path, MAGIC_FEATURES)
    kind_code, alpha, n_rows, n_frames = struct.unpack_from("<BdII", body, 0)
    off = struct.calcsize("<BdII")
    stored_hash = body[off:off + _HASH_LEN]
    off += _HASH_LEN
    _check_hash(path, stored_hash, config_hash)
    (id_len,) = struct.unpack_from("<H", body, off)
    off += 2
    clip_id = body[off:off + id_len].decode()
    off += id_len
    expect = n_rows * n_frames * 8
    payload = body[off:off + expect]
    if len(payload) != expect:
        raise CacheError(f"{path}: payload truncated")
    values = np.frombuffer(payload, dtype="<f8").reshape(n_rows, n_frames)
    if kind_code not in FILTER_NAMES:
        raise CacheError(f"{path}: unknown filter code {kind_code}")
    kind = FILTER_NAMES[kind_code]
    return FeatureMatrix(values.copy(), kind, clip_id,
                         alpha=None if np.isnan(alpha) else alpha)


def write_state_cache(path: str | Path, states: NeuronStates, params: StnoParams,
                      mask_seed: int, config_hash: bytes | str | None = None) -> None:
    """Persist node states; oscillator constants ride along for provenance."""
    header = MAGIC_STATES + struct.pack(
        "<HBII", CACHE_VERSION, NODE_CODES[states.node_kind],
        states.values.shape[0], states.values.shape[1])
    header += struct.pack("<q6d", mask_seed, params.dt, params.t_relax,
                          params.i_dc, params.i_c, params.c, params.input_gain)
    header += _normalize_hash(config_hash)
    clip = states.clip_id.encode()
    header += struct.pack("<H", len(clip)) + clip
    payload = np.ascontiguousarray(states.values, dtype="<f8").tobytes()
    _finish(Path(path), header + payload)


def read_state_cache(path: str | Path,
                     config_hash: bytes | str | None = None
                     ) -> tuple[NeuronStates, StnoParams, int]:
    body = _open(path, MAGIC_STATES)
    node_code, n_theta, n_frames = struct.unpack_from("<BII", body, 0)
    off = struct.calcsize("<BII")
    mask_seed, dt, t_relax, i_dc, i_c, c, input_gain = struct.unpack_from("<q6d", body, off)
    off += struct.calcsize("<q6d")
    stored_hash = body[off:off + _HASH_LEN]
    off += _HASH_LEN
    _check_hash(path, stored_hash, config_hash)
    (id_len,) = struct.unpack_from("<H", body, off)
    off += 2
    clip_id = body[off:off + id_len].decode()
    off += id_len
    expect = n_theta * n_frames * 8
    payload = body[off:off + expect]
    if len(payload) != expect:
        raise CacheError(f"{path}: payload truncated")
    if node_code not in NODE_NAMES or NODE_NAMES[node_code] == "none":
        raise CacheError(f"{path}: unknown node code {node_code}")
    values = np.frombuffer(payload, dtype="<f8").reshape(n_theta, n_frames)
    states = NeuronStates(values.copy(), clip_id, node_kind=NODE_NAMES[node_code])
    params = StnoParams(dt=dt, t_relax=t_relax, i_dc=i_dc, i_c=i_c, c=c,
                        input_gain=input_gain)
    return states, params, mask_seed


def write_model(path: str | Path, model: ReadoutModel, alpha: float | None = None,
                config_hash: bytes | str | None = None) -> None:
    if model.filter_kind not in FILTER_CODES:
        raise CacheError(f"cannot serialize model for filter {model.filter_kind!r}")
    w = model.weights
    header = MAGIC_MODEL + struct.pack(
        "<HBBdddBII", CACHE_VERSION, NODE_CODES[model.node_kind],
        FILTER_CODES[model.filter_kind],
        alpha if alpha is not None else float("nan"),
        model.options.rtol, model.options.ridge, 1 if model.options.bias else 0,
        w.shape[0], w.shape[1])
    header += _normalize_hash(config_hash)
    desc = model.trained_on.encode()
    header += struct.pack("<H", len(desc)) + desc
    _finish(Path(path), header + np.ascontiguousarray(w, dtype="<f8").tobytes())


def read_model(path: str | Path,
               config_hash: bytes | str | None = None) -> ReadoutModel:
    body = _open(path, MAGIC_MODEL)
    fmt = "<BBdddBII"
    node_code, filt_code, alpha, rtol, ridge, bias, rows, cols = struct.unpack_from(fmt, body, 0)
    off = struct.calcsize(fmt)
    stored_hash = body[off:off + _HASH_LEN]
    off += _HASH_LEN
    _check_hash(path, stored_hash, config_hash)
    (d_len,) = struct.unpack_from("<H", body, off)
    off += 2
    trained_on = body[off:off + d_len].decode()
    off += d_len
    expect = rows * cols * 8
    payload = body[off:off + expect]
    if len(payload) != expect:
        raise CacheError(f"{path}: payload truncated")
    w = np.frombuffer(payload, dtype="<f8").reshape(rows, cols)
    options = ReadoutOptions(rtol=rtol, ridge=ridge, bias=bool(bias))
    return ReadoutModel(w.copy(), options, trained_on=trained_on,
                        node_kind=NODE_NAMES.get(node_code, "none"),
                        filter_kind=FILTER_NAMES.get(filt_code, "spectro_real"))
