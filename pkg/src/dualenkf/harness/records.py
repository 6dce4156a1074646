"""Per-step run records and their CSV / JSON-lines persistence."""

import csv
import json
import math
from dataclasses import asdict, astuple, dataclass, fields
from pathlib import Path


@dataclass(frozen=True)
class RunRecord:
    run_id: str
    t: int
    variant: str
    gamma1: float
    gamma2: float
    N: int
    seed: int
    mean_err: float
    cov_err: float
    ct_residual: float
    rhs_residual: float
    rmse_truth: float

    def __post_init__(self):
        for name in ("mean_err", "cov_err", "ct_residual", "rhs_residual", "rmse_truth"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and non-negative, got {value}")


COLUMNS = tuple(f.name for f in fields(RunRecord))
_TYPES = {f.name: f.type for f in fields(RunRecord)}

PLOT_TEMPLATE = '''"""Plot mean and covariance errors from {data_name}."""
from pathlib import Path

import matplotlib.pyplot as plt
import pandas as pd

DATA = Path(__file__).with_name("{data_name}")

df = pd.read_{reader}(DATA{reader_args})
fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharex=True)
for (variant, N), grp in df.groupby(["variant", "N"]):
    curve = grp.groupby("t")[["mean_err", "cov_err"]].mean()
    axes[0].semilogy(curve.index, curve["mean_err"], label=f"{{variant}} N={{N}}")
    axes[1].semilogy(curve.index, curve["cov_err"], label=f"{{variant}} N={{N}}")
axes[0].set_title("mean error vs Kalman filter")
axes[1].set_title("relative covariance error")
for ax in axes:
    ax.set_xlabel("t")
axes[0].legend(fontsize="small")
fig.tight_layout()
fig.savefig(DATA.with_suffix(".png"), dpi=120)
'''


def _format(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_records(records, path, fmt="csv", plot_script=True):
    """Write records in a fixed column order, plus a sibling ``*_plot.py``.

    Floats are written with ``repr`` so they round-trip exactly.
    """
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True)
    if fmt == "csv":
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(COLUMNS)
            for rec in records:
                writer.writerow([_format(v) for v in astuple(rec)])
    elif fmt == "jsonl":
        with path.open("w") as fh:
            for rec in records:
                fh.write(json.dumps(asdict(rec)) + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if plot_script:
        reader, args = ("csv", "") if fmt == "csv" else ("json", ", lines=True")
        script = PLOT_TEMPLATE.format(data_name=path.name, reader=reader, reader_args=args)
        path.with_name(path.stem + "_plot.py").write_text(script)
    return path


def _coerce(row):
    return RunRecord(**{k: _TYPES[k](row[k]) if _TYPES[k] is not str else str(row[k]) for k in COLUMNS})


def read_records(path, fmt=None):
    path = Path(path)
    if fmt is None:
        fmt = "jsonl" if path.suffix in (".jsonl", ".json") else "csv"
    if fmt == "csv":
        with path.open(newline="") as fh:
            return [_coerce(row) for row in csv.DictReader(fh)]
    with path.open() as fh:
        return [_coerce(json.loads(line)) for line in fh if line.strip()]
