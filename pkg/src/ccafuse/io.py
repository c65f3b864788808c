"""File formats: CCAT binary tensors, headered CSV matrices, model JSON.

CCAT layout (little-endian)::

    b"CCAT" | u32 version=1 | u32 ndim | u64 dims[ndim] | f64 data (row-major)
"""
import csv
import json
import struct
from pathlib import Path

import numpy as np

from .cca import CcaModel
from .cca2d import Cca2dModel
from .errors import DimensionError, FormatError
from .fusion.net import FeatureNet, NetConfig

MAGIC = b"CCAT"
VERSION = 1


def write_ccat(path, array):
    a = np.ascontiguousarray(array, dtype="<f8")
    header = MAGIC + struct.pack("<II", VERSION, a.ndim) + struct.pack(f"<{a.ndim}Q", *a.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(a.tobytes(order="C"))


def read_ccat(path):
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != MAGIC:
        raise FormatError(f"{path}: not a CCAT file (bad magic)")
    version, ndim = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported CCAT version {version}")
    off = 12 + 8 * ndim
    if len(raw) < off:
        raise FormatError(f"{path}: truncated header")
    dims = struct.unpack_from(f"<{ndim}Q", raw, 12)
    count = int(np.prod(dims, dtype=np.int64)) if ndim else 1
    if len(raw) - off != 8 * count:
        raise FormatError(f"{path}: expected {count} values, found {(len(raw) - off) // 8}")
    return np.frombuffer(raw, dtype="<f8", offset=off).reshape(dims).astype(np.float64)


def write_csv(path, array):
    a = np.asarray(array, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError(f"CSV output holds 2-D matrices only, got {a.ndim}-D array of shape {a.shape}")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"c{j}" for j in range(a.shape[1])])
        for row in a:
            w.writerow([repr(float(v)) for v in row])


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty CSV")
    header, body = rows[0], rows[1:]
    width = len(header)
    values = []
    for i, row in enumerate(body, start=2):
        if not row:
            continue
        if len(row) != width:
            raise FormatError(f"{path}: row {i} has {len(row)} fields, expected {width}")
        try:
            values.append([float(v) for v in row])
        except ValueError as exc:
            raise FormatError(f"{path}: row {i}: {exc}") from None
    if not values:
        raise FormatError(f"{path}: no data rows")
    return np.array(values, dtype=np.float64)


def load_array(path):
    """Read a tensor by extension: ``.csv`` or CCAT (anything else)."""
    if str(path).lower().endswith(".csv"):
        return read_csv(path)
    return read_ccat(path)


def save_array(path, array):
    if str(path).lower().endswith(".csv"):
        write_csv(path, array)
    else:
        write_ccat(path, array)


def _enc(a):
    a = np.asarray(a, dtype=np.float64)
    return {"shape": list(a.shape), "data": a.ravel().tolist()}


def _dec(d):
    return np.array(d["data"], dtype=np.float64).reshape(d["shape"])


def model_to_dict(model):
    if isinstance(model, FeatureNet):
        return {
            "type": "fusion_net",
            "kind": model.kind,
            "config": model.config.as_dict(),
            "in_shape_a": list(model.in_shape_a),
            "in_shape_b": list(model.in_shape_b),
            "n_classes": model.n_classes,
            "k": model.k,
            "d1": model.d1,
            "d2": model.d2,
            "params": {name: _enc(v) for name, v in sorted(model.params.items())},
        }
    if isinstance(model, CcaModel):
        return {
            "type": "cca",
            "dims": {"dx": model.u.shape[0], "dy": model.v.shape[0], "k": model.k},
            "reg_epsilon": model.reg_epsilon,
            "correlations": model.correlations.tolist(),
            "u": _enc(model.u),
            "v": _enc(model.v),
            "mean_x": _enc(model.mean_x),
            "mean_y": _enc(model.mean_y),
        }
    if isinstance(model, Cca2dModel):
        return {
            "type": "cca2d",
            "dims": {
                "m_x": model.lx.shape[0],
                "n_x": model.rx.shape[0],
                "m_y": model.ly.shape[0],
                "n_y": model.ry.shape[0],
                "d1": model.d1,
                "d2": model.d2,
            },
            "reg_epsilon": model.reg_epsilon,
            "converged": model.converged,
            "n_iter": model.n_iter,
            "fallback_steps": model.fallback_steps,
            "correlations": model.correlations.tolist(),
            "objective_trace": model.objective_trace.tolist(),
            "lx": _enc(model.lx),
            "rx": _enc(model.rx),
            "ly": _enc(model.ly),
            "ry": _enc(model.ry),
            "mean_x": _enc(model.mean_x),
            "mean_y": _enc(model.mean_y),
        }
    raise TypeError(f"cannot serialize {type(model).__name__}")


def model_from_dict(d):
    kind = d.get("type")
    if kind == "cca":
        return CcaModel(
            _dec(d["u"]), _dec(d["v"]), np.array(d["correlations"]), _dec(d["mean_x"]), _dec(d["mean_y"]), d["reg_epsilon"]
        )
    if kind == "cca2d":
        return Cca2dModel(
            lx=_dec(d["lx"]),
            rx=_dec(d["rx"]),
            ly=_dec(d["ly"]),
            ry=_dec(d["ry"]),
            mean_x=_dec(d["mean_x"]),
            mean_y=_dec(d["mean_y"]),
            objective_trace=np.array(d["objective_trace"]),
            reg_epsilon=d["reg_epsilon"],
            converged=d["converged"],
            n_iter=d["n_iter"],
            fallback_steps=d["fallback_steps"],
            correlations=np.array(d["correlations"]),
        )
    if kind == "fusion_net":
        return FeatureNet(
            NetConfig.from_dict(d["config"]),
            d["kind"],
            tuple(d["in_shape_a"]),
            tuple(d["in_shape_b"]),
            d["n_classes"],
            d["k"],
            d["d1"],
            d["d2"],
            {name: _dec(v) for name, v in d["params"].items()},
        )
    raise FormatError(f"unknown model type {kind!r}")


def save_model(path, model):
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1))


def load_model(path):
    try:
        return model_from_dict(json.loads(Path(path).read_text()))
    except (KeyError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: malformed model file ({exc})") from None
