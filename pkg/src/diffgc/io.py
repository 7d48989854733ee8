"""CSV panel ingestion and JSON model descriptors."""
import csv
import json
from pathlib import Path

import numpy as np

from .exceptions import IngestionError
from .var_core import TimeSeriesPanel, VarModel


def read_panel_csv(path, header=False, condition_label=1):
    """Read a panel stored one row per time point, one column per channel.

    Returns the panel and the channel names (``None`` without a header).
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from exc
    names = None
    if header:
        if not rows:
            raise IngestionError(f"{path} is empty")
        names = [c.strip() for c in rows[0]]
        rows = rows[1:]
    if not rows:
        raise IngestionError(f"{path} has no data rows")
    width = len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != width:
            raise IngestionError(f"{path}: row {i + 1} has {len(r)} fields, expected {width}")
    try:
        data = np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise IngestionError(f"{path}: non-numeric value ({exc})") from exc
    return TimeSeriesPanel(data.T, condition_label), names


def write_panel_csv(panel, path, names=None):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        if names is not None:
            w.writerow(names)
        for row in panel.data.T:
            w.writerow([repr(float(v)) for v in row])


def model_to_dict(model):
    out = {
        "order": model.order,
        "dim": model.dim,
        "transitions": [a.tolist() for a in model.transitions],
        "noise_cov": model.noise_cov.tolist(),
    }
    if model.stationary_cov is not None:
        out["stationary_cov"] = model.stationary_cov.tolist()
    return out


def model_from_dict(obj):
    mats = [np.array(a, dtype=float) for a in obj["transitions"]]
    if "order" in obj and obj["order"] != len(mats):
        raise ValueError(f"order {obj['order']} does not match {len(mats)} transition matrices")
    sigma = obj.get("stationary_cov")
    return VarModel(mats, np.array(obj["noise_cov"], dtype=float),
                    None if sigma is None else np.array(sigma, dtype=float))


def save_model_json(model, path):
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2))


def load_model_json(path):
    return model_from_dict(json.loads(Path(path).read_text()))
