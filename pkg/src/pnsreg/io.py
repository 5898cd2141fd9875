"""CSV ingestion and JSON model files."""
from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional, Sequence

import numpy as np

from .geom import Subsphere
from .pns import PnsModel
from .regress import RegressionModel
from .simplex import normalize

FORMAT_VERSION = "1.1"
MISSING = {"", "na", "nan", "null", "none"}


class DataError(ValueError):
    """Bad or inconsistent input data."""


class ModelFileError(ValueError):
    """Unreadable, corrupt or incompatible model file."""


@dataclass
class DataTable:
    columns: list
    responses: np.ndarray        # (n, D) compositions
    predictors: np.ndarray       # (n, p)
    response_cols: list
    predictor_cols: list
    dropped: int = 0


def _parse(cell, row_no, col):
    try:
        val = float(cell)
    except ValueError:
        raise DataError(f"row {row_no}, column {col!r}: cannot parse {cell!r}") from None
    if not math.isfinite(val):
        raise DataError(f"row {row_no}, column {col!r}: non-finite value {cell!r}")
    return val


def read_table(path, response_cols: Sequence[str],
               predictor_cols: Sequence[str] = ()) -> DataTable:
    """Read a headed CSV file and close the response columns to unit sum.

    Rows with a missing value in any declared column are dropped and
    counted in ``DataTable.dropped``. Row numbers in error messages count
    the header as row 1.
    """
    response_cols = list(response_cols)
    predictor_cols = list(predictor_cols)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file (header required)") from None
        missing = [c for c in response_cols + predictor_cols if c not in header]
        if missing:
            raise DataError(f"{path}: missing column(s) {', '.join(missing)}")
        r_idx = [header.index(c) for c in response_cols]
        p_idx = [header.index(c) for c in predictor_cols]
        resp, pred, dropped = [], [], 0
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            cells = [row[i].strip() if i < len(row) else "" for i in r_idx + p_idx]
            if any(c.lower() in MISSING for c in cells):
                dropped += 1
                continue
            r = [_parse(row[i], row_no, header[i]) for i in r_idx]
            for i, v in zip(r_idx, r):
                if v < 0:
                    raise DataError(f"row {row_no}, column {header[i]!r}: negative part {v}")
            if r and sum(r) <= 0:
                raise DataError(f"row {row_no}: all response parts are zero")
            resp.append(r)
            pred.append([_parse(row[i], row_no, header[i]) for i in p_idx])
    D, p = len(response_cols), len(predictor_cols)
    responses = normalize(np.array(resp, dtype=float)) if resp and D else np.zeros((len(resp), D))
    predictors = np.array(pred, dtype=float).reshape(len(pred), p)
    return DataTable(header, responses, predictors, response_cols, predictor_cols, dropped)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                        for v in row])


# ---------------------------------------------------------------------------
# model files

@dataclass
class ModelFile:
    pns: PnsModel
    regression: Optional[RegressionModel] = None
    response_cols: list = field(default_factory=list)
    predictor_cols: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    @property
    def alpha(self) -> float:
        return self.pns.alpha


def _pns_to_dict(m: PnsModel) -> dict:
    return {
        "dim": m.dim,
        "alpha": m.alpha,
        "selection": m.selection,
        "levels": [{"axis": lev.axis.tolist(), "angle": lev.angle, "kind": lev.kind.value}
                   for lev in m.levels],
        "mean_angle": m.mean_angle,
        "score_scales": m.scales.tolist(),
        "anchor": None if m.anchor is None else m.anchor.tolist(),
        "level_stats": list(m.level_stats),
    }


def _pns_from_dict(d: dict) -> PnsModel:
    levels = tuple(Subsphere(np.array(lev["axis"], dtype=float), float(lev["angle"]))
                   for lev in d["levels"])
    anchor = d.get("anchor")
    return PnsModel(dim=int(d["dim"]), levels=levels, mean_angle=float(d["mean_angle"]),
                    alpha=float(d.get("alpha", 0.5)), selection=d.get("selection", "bic"),
                    anchor=None if anchor is None else np.array(anchor, dtype=float),
                    level_stats=tuple(d.get("level_stats", ())))


def _reg_to_dict(r: RegressionModel) -> dict:
    return {
        "beta_circular": r.beta_circular.tolist(),
        "B_linear": r.B_linear.tolist(),
        "k_used": r.k_used,
        "residual_variances": r.residual_variances.tolist(),
        "circular_link": r.circular_link,
        "kappa": r.kappa,
        "converged": r.converged,
    }


def _reg_from_dict(d: dict, pns: PnsModel) -> RegressionModel:
    beta = np.array(d["beta_circular"], dtype=float)
    k = int(d["k_used"])
    B = np.array(d.get("B_linear", []), dtype=float).reshape(k - 1, beta.size)
    resvar = np.array(d.get("residual_variances", [np.nan] * k), dtype=float)
    return RegressionModel(pns=pns, beta_circular=beta, B_linear=B, k_used=k,
                           residual_variances=resvar,
                           circular_link=d.get("circular_link", "ls"),
                           kappa=d.get("kappa"), converged=bool(d.get("converged", True)))


def _timestamp() -> str:
    # SOURCE_DATE_EPOCH pins the stamp for reproducible output
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = (datetime.fromtimestamp(int(epoch), timezone.utc) if epoch
            else datetime.now(timezone.utc))
    return when.isoformat()


def model_to_dict(mf: ModelFile) -> dict:
    prov = {"fit_timestamp": _timestamp()}
    prov.update(mf.provenance)
    return {
        "format_version": FORMAT_VERSION,
        "alpha": mf.pns.alpha,
        "response_cols": list(mf.response_cols),
        "predictor_cols": list(mf.predictor_cols),
        "pns": _pns_to_dict(mf.pns),
        "regression": None if mf.regression is None else _reg_to_dict(mf.regression),
        "provenance": prov,
    }


def model_from_dict(doc: dict) -> ModelFile:
    version = str(doc.get("format_version", ""))
    major = version.split(".")[0]
    if major != FORMAT_VERSION.split(".")[0]:
        raise ModelFileError(f"unsupported format_version {version!r}")
    try:
        pns = _pns_from_dict(doc["pns"])
        reg = doc.get("regression")
        reg = None if reg is None else _reg_from_dict(reg, pns)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"corrupt model document: {exc}") from exc
    return ModelFile(pns=pns, regression=reg,
                     response_cols=list(doc.get("response_cols", [])),
                     predictor_cols=list(doc.get("predictor_cols", [])),
                     provenance=dict(doc.get("provenance", {})))


def write_model(mf: ModelFile, path) -> None:
    """Write atomically (temporary file in the same directory, then rename)."""
    text = json.dumps(model_to_dict(mf), indent=2)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".model-", suffix=".json")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_model(path) -> ModelFile:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path}: corrupt model file ({exc})") from exc
    if not isinstance(doc, dict):
        raise ModelFileError(f"{path}: not a model document")
    return model_from_dict(doc)
