"""Model files: a self-describing zip of weights plus a JSON header.

Entries are stored uncompressed with a fixed timestamp so that saving
the same model twice produces byte-identical files.
"""

from __future__ import annotations

import io
import json
import zipfile
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .features import FeaturizerConfig
from .neuralnet import Model, ModelConfig

FORMAT_VERSION = 1
_EPOCH = (1980, 1, 1, 0, 0, 0)
_ARRAYS = ("W1", "b1", "W2", "b2")


def _write_entry(zf: zipfile.ZipFile, name: str, data: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_EPOCH)
    info.compress_type = zipfile.ZIP_STORED
    zf.writestr(info, data)


def save_model(
    path: str | Path,
    model: Model,
    featurizer: FeaturizerConfig,
    kind: str = "classifier",
    mode: str | None = None,
) -> None:
    meta = {
        "version": FORMAT_VERSION,
        "kind": kind,
        "mode": mode,
        "model": {
            "input_dim": model.config.input_dim,
            "hidden_dim": model.config.hidden_dim,
            "n_classes": model.config.n_classes,
            "dropout_rate": model.config.dropout_rate,
        },
        "featurizer": {
            "n_gram_orders": sorted(featurizer.n_gram_orders),
            "dimension": featurizer.dimension,
        },
    }
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        _write_entry(zf, "meta.json", json.dumps(meta, sort_keys=True).encode("utf-8"))
        for name in _ARRAYS:
            arr_buf = io.BytesIO()
            np.lib.format.write_array(arr_buf, np.ascontiguousarray(getattr(model, name)))
            _write_entry(zf, f"{name}.npy", arr_buf.getvalue())
    Path(path).write_bytes(buf.getvalue())


def load_model(path: str | Path) -> tuple[Model, FeaturizerConfig, str, str | None]:
    with zipfile.ZipFile(Path(path)) as zf:
        meta = json.loads(zf.read("meta.json"))
        if meta.get("version") != FORMAT_VERSION:
            raise ConfigError(f"unsupported model file version {meta.get('version')!r}")
        arrays = {
            name: np.lib.format.read_array(io.BytesIO(zf.read(f"{name}.npy")))
            for name in _ARRAYS
        }
    model = Model(config=ModelConfig(**meta["model"]), **arrays)
    featurizer = FeaturizerConfig(
        n_gram_orders=frozenset(meta["featurizer"]["n_gram_orders"]),
        dimension=meta["featurizer"]["dimension"],
    )
    return model, featurizer, meta["kind"], meta["mode"]
