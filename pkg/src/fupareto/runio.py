"""Run-directory I/O: dataset construction from a config, model checkpoints
and the ``rounds.csv`` log."""

import csv
import io
import struct
from pathlib import Path

import numpy as np

from . import data
from .exceptions import ConfigurationError
from .model import ModelSpec

MODEL_MAGIC = b"FUPM"
MODEL_VERSION = 1
_HEADER = struct.Struct("<4sIQ")

ROUND_FIELDS = (
    "round", "stage", "mode", "trigger", "accepted", "step", "trials",
    "gd_norm", "losses", "columns", "weights", "eval_set", "eval_before",
    "eval_after", "slopes", "beta", "remaining_before", "remaining_after",
    "max_remaining_alignment", "asr", "racc_mean", "racc_std", "distance",
    "flags",
)


def build_dataset(cfg):
    if cfg.dataset == "synthetic":
        X, y = data.synth_gaussians(cfg.classes, cfg.dim, cfg.per_class,
                                    cfg.spread, cfg.resolved_data_seed)
        C = cfg.classes
    else:
        X, y = data.load_idx(cfg.idx_images, cfg.idx_labels)
        C = int(y.max()) + 1
    return data.build_federated(X, y, cfg.clients, cfg.alpha,
                                cfg.resolved_data_seed, cfg.test_frac,
                                scheme=cfg.partition, class_count=C)


def build_spec(cfg, dataset):
    d = dataset.train[0].features.shape[1]
    return ModelSpec((d, *cfg.hidden, dataset.class_count), cfg.activation,
                     cfg.seed)


# -- model files --------------------------------------------------------------

def save_model(path, w):
    """16-byte header (magic, u32 version, u64 n) then little-endian f64."""
    w = np.ascontiguousarray(w, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MODEL_MAGIC, MODEL_VERSION, w.shape[0]))
        fh.write(w.tobytes())


def read_model_header(path):
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise ConfigurationError(f"{path}: truncated model header")
    magic, version, n = _HEADER.unpack(raw)
    if magic != MODEL_MAGIC:
        raise ConfigurationError(f"{path}: not a model file")
    return {"magic": magic.decode(), "version": version, "n": n}


def load_model(path):
    header = read_model_header(path)
    raw = Path(path).read_bytes()[_HEADER.size:]
    if len(raw) != 8 * header["n"]:
        raise ConfigurationError(f"{path}: expected {header['n']} parameters")
    return np.frombuffer(raw, dtype="<f8").astype(np.float64)


# -- rounds.csv ---------------------------------------------------------------

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple)):
        return ";".join(_fmt(x) for x in v)
    return str(v)


def records_to_csv(records):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ROUND_FIELDS)
    for r in records:
        writer.writerow([_fmt(getattr(r, f)) for f in ROUND_FIELDS])
    return buf.getvalue()


def write_rounds(path, records):
    Path(path).write_text(records_to_csv(records))


def read_rounds(path):
    """Parse ``rounds.csv`` back into dicts with numeric fields restored."""
    floats = {"step", "gd_norm", "beta", "max_remaining_alignment", "asr",
              "racc_mean", "racc_std", "distance"}
    float_lists = {"losses", "weights", "eval_before", "eval_after", "slopes",
                   "remaining_before", "remaining_after"}
    str_lists = {"columns", "eval_set", "flags"}
    rows = []
    with open(path, newline="") as fh:
        for raw in csv.DictReader(fh):
            row = {}
            for k, v in raw.items():
                if k in floats:
                    row[k] = float(v) if v else None
                elif k in float_lists:
                    row[k] = [float(x) for x in v.split(";")] if v else []
                elif k in str_lists:
                    row[k] = v.split(";") if v else []
                elif k in ("round", "trials"):
                    row[k] = int(v)
                elif k == "accepted":
                    row[k] = v == "1"
                else:
                    row[k] = v
            rows.append(row)
    return rows
