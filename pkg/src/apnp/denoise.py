"""Pluggable priors: identity, soft-threshold, and neural denoisers.

A denoiser maps (field, sigma) -> field in either the gradient domain
(2-channel input/output) or the image domain (1-channel). Gradient values
live in [-1, 1]; nothing is clipped here. Final clipping to [0, 1] happens
once, in the reconstruction drivers.

Weight archive file format (bit-exact):

    bytes 0..7    magic "APNPW1\\0\\0"
    bytes 8..11   little-endian uint32 header length N
    bytes 12..12+N  header: UTF-8 JSON declaring layers, tensors, metadata
    tensor payload: each tensor as IEEE-754 float32 little-endian, row-major,
                    at its declared byte offset into the payload region
    final 8 bytes: little-endian uint64 CRC-64 of the payload region
                   (ECMA-182 polynomial 0x42F0E1EB2ADCF177, init 0,
                   not reflected, no final xor)

Header layer types: "conv" (cross-correlation, zero padding, any stride),
"conv_transpose" (zero-insertion upsampling), "relu", and "add" (skip
addition from a previous layer's "save_as" tag). Anything else is rejected
at load time. The header's "predicts" field declares whether the network
outputs the clean signal ("direct") or the noise to subtract ("residual").
"""

import json
import logging
import struct
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

log = logging.getLogger(__name__)

__all__ = [
    "ArchiveError",
    "WeightArchive",
    "IdentityDenoiser",
    "SoftThresholdDenoiser",
    "NeuralDenoiser",
    "load_weights",
    "save_weights",
    "neural_forward",
    "crc64",
    "parse_denoiser",
]

MAGIC = b"APNPW1\x00\x00"
_CRC64_POLY = 0x42F0E1EB2ADCF177

_crc64_table = None


def _make_crc64_table():
    table = []
    for byte in range(256):
        crc = byte << 56
        for _ in range(8):
            if crc & (1 << 63):
                crc = ((crc << 1) ^ _CRC64_POLY) & 0xFFFFFFFFFFFFFFFF
            else:
                crc = (crc << 1) & 0xFFFFFFFFFFFFFFFF
        table.append(crc)
    return table


def crc64(data):
    """CRC-64/ECMA-182 (non-reflected, init 0, no final xor)."""
    global _crc64_table
    if _crc64_table is None:
        _crc64_table = _make_crc64_table()
    crc = 0
    for b in data:
        crc = ((crc << 8) & 0xFFFFFFFFFFFFFFFF) ^ _crc64_table[((crc >> 56) ^ b) & 0xFF]
    return crc


class ArchiveError(ValueError):
    """A weight archive failed to parse or validate."""


_SUPPORTED_LAYERS = {"conv", "conv_transpose", "relu", "add"}


@dataclass(frozen=True)
class WeightArchive:
    """Parsed and validated weight archive."""

    header: dict
    tensors: dict  # name -> float32 ndarray

    @property
    def domain(self):
        return self.header["domain"]

    @property
    def in_channels(self):
        return int(self.header["in_channels"])

    @property
    def out_channels(self):
        return int(self.header["out_channels"])

    @property
    def predicts(self):
        return self.header.get("predicts", "direct")

    @property
    def noise_range(self):
        lo, hi = self.header.get("noise_range", [0.0, 1.0])
        return float(lo), float(hi)


def _validate_header(header, tensors):
    domain = header.get("domain")
    if domain not in ("gradient", "image"):
        raise ArchiveError(f"unknown domain {domain!r}")
    signal = 2 if domain == "gradient" else 1
    if header["in_channels"] != signal + 1 or header["out_channels"] != signal:
        raise ArchiveError(
            f"{domain}-domain archives need {signal + 1} input / {signal} "
            f"output channels, header declares "
            f"{header['in_channels']}/{header['out_channels']}"
        )
    if header.get("predicts", "direct") not in ("direct", "residual"):
        raise ArchiveError(f"unknown prediction convention {header.get('predicts')!r}")

    # layer chain consistency
    channels = header["in_channels"]
    saved = {}
    for idx, layer in enumerate(header["layers"]):
        ltype = layer.get("type")
        if ltype not in _SUPPORTED_LAYERS:
            raise ArchiveError(f"unsupported layer type {ltype!r} at layer {idx}")
        if ltype in ("conv", "conv_transpose"):
            if layer["in"] != channels:
                raise ArchiveError(
                    f"layer {idx}: expects {layer['in']} input channels, "
                    f"chain provides {channels}"
                )
            w = tensors[layer["weight"]]
            b = tensors[layer["bias"]]
            k = layer["kernel"]
            want = (
                (layer["out"], layer["in"], k, k)
                if ltype == "conv"
                else (layer["in"], layer["out"], k, k)
            )
            if w.shape != want:
                raise ArchiveError(
                    f"layer {idx}: weight shape {w.shape} != declared {want}"
                )
            if b.shape != (layer["out"],):
                raise ArchiveError(f"layer {idx}: bias shape {b.shape} invalid")
            channels = layer["out"]
        elif ltype == "add":
            src = layer["from"]
            if src not in saved:
                raise ArchiveError(f"layer {idx}: skip source {src!r} not saved")
            if saved[src] != channels:
                raise ArchiveError(
                    f"layer {idx}: skip source {src!r} has {saved[src]} "
                    f"channels, chain has {channels}"
                )
        if "save_as" in layer:
            saved[layer["save_as"]] = channels
    if channels != header["out_channels"]:
        raise ArchiveError(
            f"layer chain ends with {channels} channels, header declares "
            f"{header['out_channels']}"
        )


def load_weights(path):
    """Read and validate a weight archive file."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != MAGIC:
        raise ArchiveError(f"bad magic in {path}")
    if len(blob) < 12:
        raise ArchiveError("file truncated before header length")
    (hlen,) = struct.unpack("<I", blob[8:12])
    if len(blob) < 12 + hlen + 8:
        raise ArchiveError("file truncated inside header")
    try:
        header = json.loads(blob[12 : 12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ArchiveError(f"malformed header: {e}") from e
    payload = blob[12 + hlen : -8]
    (declared_crc,) = struct.unpack("<Q", blob[-8:])
    if crc64(payload) != declared_crc:
        raise ArchiveError("payload checksum mismatch")

    tensors = {}
    for t in header["tensors"]:
        shape = tuple(t["shape"])
        nbytes = 4 * int(np.prod(shape))
        off = t["offset"]
        if off + nbytes > len(payload):
            raise ArchiveError(
                f"tensor {t['name']!r} extends past end of payload "
                f"({off + nbytes} > {len(payload)})"
            )
        tensors[t["name"]] = (
            np.frombuffer(payload, dtype="<f4", count=nbytes // 4, offset=off)
            .reshape(shape)
            .astype(np.float32)
        )
    _validate_header(header, tensors)
    return WeightArchive(header=header, tensors=tensors)


def save_weights(path, header, tensors):
    """Write a weight archive; fills in tensor offsets in declaration order."""
    header = dict(header)
    decls = []
    payload = bytearray()
    for name, arr in tensors.items():
        arr32 = np.ascontiguousarray(arr, dtype="<f4")
        decls.append({"name": name, "shape": list(arr32.shape), "offset": len(payload)})
        payload += arr32.tobytes()
    header["tensors"] = decls
    _validate_header(header, {d["name"]: np.ascontiguousarray(t, dtype="<f4")
                              for d, t in zip(decls, tensors.values())})
    htext = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(htext)))
        f.write(htext)
        f.write(bytes(payload))
        f.write(struct.pack("<Q", crc64(bytes(payload))))


def _conv2d(x, w, b, stride=1):
    kh, kw = w.shape[2:]
    pad = kh // 2 if stride == 1 else 0
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    win = sliding_window_view(x, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
    return np.einsum("oikl,ihwkl->ohw", w, win) + b[:, None, None]


def _conv_transpose2d(x, w, b, stride):
    cin, h, wd = x.shape
    cout, kh, kw = w.shape[1], w.shape[2], w.shape[3]
    out = np.zeros((cout, (h - 1) * stride + kh, (wd - 1) * stride + kw))
    for ki in range(kh):
        for kj in range(kw):
            out[:, ki : ki + h * stride : stride, kj : kj + wd * stride : stride] += (
                np.einsum("io,ihw->ohw", w[:, :, ki, kj], x)
            )
    return out + b[:, None, None]


def neural_forward(arch, x):
    """Run the archive's layer chain on a (C, H, W) field.

    Weights are float32 as stored; arithmetic is float64. Deterministic.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[0] != arch.in_channels:
        raise ValueError(
            f"input shape {x.shape} does not match archive "
            f"({arch.in_channels} channels)"
        )
    saved = {}
    for idx, layer in enumerate(arch.header["layers"]):
        ltype = layer["type"]
        if ltype == "conv":
            w = arch.tensors[layer["weight"]].astype(np.float64)
            b = arch.tensors[layer["bias"]].astype(np.float64)
            x = _conv2d(x, w, b, stride=layer.get("stride", 1))
        elif ltype == "conv_transpose":
            w = arch.tensors[layer["weight"]].astype(np.float64)
            b = arch.tensors[layer["bias"]].astype(np.float64)
            x = _conv_transpose2d(x, w, b, stride=layer.get("stride", 1))
        elif ltype == "relu":
            x = np.maximum(x, 0.0)
        elif ltype == "add":
            x = x + saved[layer["from"]]
        else:
            raise ArchiveError(f"unsupported layer type {ltype!r} at layer {idx}")
        if "save_as" in layer:
            saved[layer["save_as"]] = x
    return x


class IdentityDenoiser:
    """Returns its input unchanged; works in either domain."""

    kind = "identity"

    def __init__(self, domain="gradient"):
        if domain not in ("gradient", "image"):
            raise ValueError(f"unknown domain {domain!r}")
        self.domain = domain

    def __call__(self, v, sigma):
        _check_domain(self, v)
        return np.asarray(v, dtype=np.float64)


class SoftThresholdDenoiser:
    """Per-element shrinkage by weight * sigma^2.

    This is the proximal map of weight * ||.||_1 with step sigma^2, so
    gradient-domain HQS with this denoiser minimizes an anisotropic-TV
    objective exactly.
    """

    kind = "soft_threshold"

    def __init__(self, weight=1.0, domain="gradient"):
        if domain not in ("gradient", "image"):
            raise ValueError(f"unknown domain {domain!r}")
        if weight < 0:
            raise ValueError("weight must be >= 0")
        self.weight = float(weight)
        self.domain = domain

    def __call__(self, v, sigma):
        _check_domain(self, v)
        v = np.asarray(v, dtype=np.float64)
        thr = self.weight * float(sigma) ** 2
        return np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)


class NeuralDenoiser:
    """Runs a loaded weight archive with a constant noise-map channel."""

    kind = "neural"

    def __init__(self, archive):
        self.archive = archive
        self.domain = archive.domain

    def __call__(self, v, sigma):
        _check_domain(self, v)
        v = np.asarray(v, dtype=np.float64)
        if v.ndim == 2:
            v = v[None]
        lo, hi = self.archive.noise_range
        if not lo <= sigma <= hi:
            log.warning(
                "denoiser sigma %.5f outside trained range [%.5f, %.5f]",
                sigma, lo, hi,
            )
        noise_map = np.full((1,) + v.shape[1:], float(sigma))
        out = neural_forward(self.archive, np.concatenate([v, noise_map]))
        if self.archive.predicts == "residual":
            out = v - out
        return out if self.domain == "gradient" else out[0]


def _check_domain(handle, v):
    v = np.asarray(v)
    is_gradient = v.ndim == 3 and v.shape[0] == 2
    want_gradient = handle.domain == "gradient"
    if is_gradient != want_gradient:
        raise TypeError(
            f"{handle.kind} denoiser expects {handle.domain}-domain input, "
            f"got array of shape {v.shape}"
        )


def parse_denoiser(text, domain):
    """Parse a CLI denoiser description: identity | soft:W | neural:PATH."""
    if text == "identity":
        return IdentityDenoiser(domain)
    if text.startswith("soft:"):
        return SoftThresholdDenoiser(float(text[5:]), domain)
    if text.startswith("neural:"):
        archive = load_weights(text[7:])
        if archive.domain != domain:
            raise ValueError(
                f"archive is {archive.domain}-domain, expected {domain}"
            )
        return NeuralDenoiser(archive)
    raise ValueError(f"unknown denoiser {text!r}")
