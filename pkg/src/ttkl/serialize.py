"""Single-file container for a FinalExpansion (layout in docs/format.md)."""

import json
import struct

import numpy as np

from .chebapprox import FunctionMatrix
from .cumulant import FinalExpansion, LatentCumulant3
from .errors import TTKLError
from .klmodes import DirectionalModes
from .nurbs import NurbsGeometry

MAGIC = b"TTKLEXP\x00"
VERSION = 1
_PREFIX = struct.Struct("<8sIQ")  # magic, format version, header byte length


class FormatError(TTKLError):
    pass


def _arrays(fe):
    md = fe.modes
    out = {}
    for name, M, eig in (("f", md.f, md.eig_f), ("g", md.g, md.eig_g), ("h", md.h, md.eig_h)):
        if M is not None:
            out[f"modes.{name}"] = M.coeffs
            out[f"eig.{name}"] = np.asarray(eig, dtype=float)
    out["U3"] = fe.U3
    out["cum2"] = fe.cum2
    if fe.cum3 is not None:
        for i, A in enumerate(fe.cum3.cores, start=1):
            out[f"cum3.A{i}"] = A
    g = fe.geometry
    if g is not None:
        out["geometry.control_points"] = g.control_points
        out["geometry.weights"] = g.weights
        for i, kv in enumerate(g.knots):
            out[f"geometry.knots{i}"] = kv
    return out


def save_expansion(fe, path):
    arrays = _arrays(fe)
    entries = []
    offset = 0
    for name, a in arrays.items():
        a = np.ascontiguousarray(a, dtype="<f8")
        entries.append({"name": name, "shape": list(a.shape), "offset": offset})
        offset += a.nbytes
    header = {
        "m": fe.m,
        "mode_counts": list(fe.modes.counts),
        "n": int(fe.n),
        "has_cum3": fe.cum3 is not None,
        "degrees": list(fe.geometry.degrees) if fe.geometry is not None else None,
        "metadata": fe.metadata,
        "arrays": entries,
        "payload_bytes": offset,
    }
    blob = json.dumps(header, sort_keys=True, default=_json_default).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(MAGIC, VERSION, len(blob)))
        fh.write(blob)
        for a in arrays.values():
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def load_expansion(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _PREFIX.size:
        raise FormatError("file too short")
    magic, version, hlen = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise FormatError("not an expansion container")
    if version != VERSION:
        raise FormatError(f"unsupported format version {version}")
    header = json.loads(data[_PREFIX.size : _PREFIX.size + hlen].decode("utf-8"))
    base = _PREFIX.size + hlen
    if len(data) - base != header["payload_bytes"]:
        raise FormatError("payload length does not match header")
    arrays = {}
    for e in header["arrays"]:
        count = int(np.prod(e["shape"], dtype=np.int64))
        a = np.frombuffer(data, dtype="<f8", count=count, offset=base + e["offset"])
        arrays[e["name"]] = a.reshape(e["shape"]).astype(float)

    kw = {}
    for name in ("f", "g", "h"):
        if f"modes.{name}" in arrays:
            kw[name] = FunctionMatrix(arrays[f"modes.{name}"])
            kw[f"eig_{name}"] = arrays[f"eig.{name}"]
    modes = DirectionalModes(**kw)
    cum3 = None
    if header["has_cum3"]:
        cum3 = LatentCumulant3(arrays["cum3.A1"], arrays["cum3.A2"], arrays["cum3.A3"])
    geom = None
    if header["degrees"] is not None:
        knots = tuple(arrays[f"geometry.knots{i}"] for i in range(len(header["degrees"])))
        geom = NurbsGeometry(
            tuple(header["degrees"]), knots, arrays["geometry.control_points"], arrays["geometry.weights"]
        )
    return FinalExpansion(modes, arrays["U3"], arrays["cum2"], cum3, geom, header["metadata"])
