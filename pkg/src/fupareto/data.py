"""Synthetic blobs, non-IID client partitioning and IDX ingestion."""

import gzip
import itertools
import struct
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (ConfigurationError, IDXCountMismatchError,
                         IDXFormatError, IDXTruncatedError)
from .model import Batch

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class FederatedDataset:
    train: list
    test: list
    global_test: Batch
    class_count: int
    partition_meta: dict = field(default_factory=dict)

    @property
    def n_clients(self):
        return len(self.train)


def synth_gaussians(C, d, per_class, spread, seed):
    """``C`` isotropic Gaussian blobs in ``R^d``, ``per_class`` points each.

    Class means are drawn from a standard normal and rescaled so that the
    closest pair sits exactly one unit apart; ``spread`` is the per-axis
    standard deviation of every blob. Samples come out grouped by class.
    """
    if C < 2 or d < 2:
        raise ConfigurationError("need C >= 2 and d >= 2")
    rng = np.random.default_rng(seed)
    means = rng.standard_normal((C, d))
    closest = min(np.linalg.norm(means[i] - means[j])
                  for i, j in itertools.combinations(range(C), 2))
    means /= closest
    X = np.concatenate([m + spread * rng.standard_normal((per_class, d))
                        for m in means])
    y = np.repeat(np.arange(C), per_class)
    return X, y


def _repair_empty(shards, min_size):
    # steal from the currently largest shard until every shard is big enough
    while True:
        sizes = [len(s) for s in shards]
        small = [i for i, n in enumerate(sizes) if n < min_size]
        if not small:
            return shards
        donor = int(np.argmax(sizes))
        if sizes[donor] <= min_size:
            raise ConfigurationError("too few samples to fill every shard")
        shards[small[0]].append(shards[donor].pop())


def dirichlet_partition(labels, alpha, m, seed, min_size=1):
    """Split sample indices across ``m`` clients with Dir(alpha) label skew.

    Returns a list of ``m`` sorted index arrays.
    """
    labels = np.asarray(labels)
    if not alpha > 0:
        raise ConfigurationError("alpha must be positive")
    if m < 2:
        raise ConfigurationError("need at least two clients")
    if len(labels) < m * min_size:
        raise ConfigurationError("fewer samples than clients")
    rng = np.random.default_rng(seed)
    shards = [[] for _ in range(m)]
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        rng.shuffle(idx)
        props = rng.dirichlet(np.full(m, float(alpha)))
        cuts = (np.cumsum(props) * len(idx)).astype(int)[:-1]
        for shard, part in zip(shards, np.split(idx, cuts)):
            shard.extend(part.tolist())
    shards = _repair_empty(shards, min_size)
    return [np.array(sorted(s), dtype=np.intp) for s in shards]


def pathological_partition(labels, m, seed):
    """Round-robin every class across all clients (approximately IID)."""
    labels = np.asarray(labels)
    if len(labels) < m:
        raise ConfigurationError("fewer samples than clients")
    rng = np.random.default_rng(seed)
    shards = [[] for _ in range(m)]
    offset = 0
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        rng.shuffle(idx)
        for j, i in enumerate(idx):
            shards[(offset + j) % m].append(int(i))
        offset += len(idx)
    return [np.array(sorted(s), dtype=np.intp) for s in shards]


def build_federated(X, y, m, alpha=0.5, seed=0, test_frac=0.2,
                    scheme="dirichlet", class_count=None):
    """Partition ``(X, y)`` over ``m`` clients and carve per-client test shards.

    Each client's indices are split ``1 - test_frac`` / ``test_frac`` into
    train and test; the global test set is the union of all client test
    shards.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.intp)
    C = int(class_count if class_count is not None else y.max() + 1)
    if scheme == "dirichlet":
        parts = dirichlet_partition(y, alpha, m, seed, min_size=2)
    elif scheme == "pat":
        parts = pathological_partition(y, m, seed)
    else:
        raise ConfigurationError(f"unknown partition scheme {scheme!r}")
    rng = np.random.default_rng([seed, 1])
    train, test = [], []
    for idx in parts:
        idx = idx.copy()
        rng.shuffle(idx)
        n_test = min(max(1, int(round(test_frac * len(idx)))), len(idx) - 1)
        test.append(Batch(X[np.sort(idx[:n_test])], y[np.sort(idx[:n_test])]))
        train.append(Batch(X[np.sort(idx[n_test:])], y[np.sort(idx[n_test:])]))
    meta = {"scheme": scheme, "alpha": alpha if scheme == "dirichlet" else None,
            "seed": seed, "train_index": [np.sort(p) for p in parts]}
    return FederatedDataset(train, test, Batch.concat(test), C, meta)


# -- IDX ---------------------------------------------------------------------

def _read_bytes(path):
    path = str(path)
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "rb") as fh:
        return fh.read()


def read_idx_images(path):
    raw = _read_bytes(path)
    if len(raw) < 16:
        raise IDXTruncatedError(f"{path}: header truncated")
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IDX_IMAGES_MAGIC:
        raise IDXFormatError(f"{path}: bad image magic {magic:#010x}")
    need = 16 + count * rows * cols
    if len(raw) < need:
        raise IDXTruncatedError(f"{path}: expected {need} bytes, got {len(raw)}")
    pixels = np.frombuffer(raw, dtype=np.uint8, count=count * rows * cols,
                           offset=16)
    return pixels.reshape(count, rows * cols)


def read_idx_labels(path):
    raw = _read_bytes(path)
    if len(raw) < 8:
        raise IDXTruncatedError(f"{path}: header truncated")
    magic, count = struct.unpack(">II", raw[:8])
    if magic != IDX_LABELS_MAGIC:
        raise IDXFormatError(f"{path}: bad label magic {magic:#010x}")
    if len(raw) < 8 + count:
        raise IDXTruncatedError(f"{path}: expected {8 + count} bytes")
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=8)


def load_idx(images_path, labels_path):
    """Load an IDX image/label pair as ``(X in [0, 1], y)``."""
    pixels = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if pixels.shape[0] != labels.shape[0]:
        raise IDXCountMismatchError(
            f"{pixels.shape[0]} images but {labels.shape[0]} labels")
    return pixels.astype(np.float64) / 255.0, labels.astype(np.intp)


def write_idx(images_path, labels_path, images, labels):
    """Write uint8 ``images`` of shape ``(N, rows, cols)`` and their labels."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, rows, cols = images.shape
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, rows, cols))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, len(labels)))
        fh.write(labels.tobytes())
