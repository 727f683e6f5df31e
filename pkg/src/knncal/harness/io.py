"""File formats: representation files, model checkpoints, and reports.

Everything is line-delimited JSON (one self-contained record per line) with
floats serialized through Python's shortest round-trip decimal repr, so every
f64 survives a save/load cycle bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Union

import numpy as np

from ..ans import AnsModel
from ..core import Dataset, Embedding, Hyperparams, Instance, LabelSpace, Variant, SPLITS
from ..errors import KnncalError, ParseError, SchemaError
from ..fr import FrModel

FORMAT_VERSION = 1


def _dump(obj) -> str:
    return json.dumps(obj, allow_nan=False)


def _parse_line(text: str, lineno: int):
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except ValueError as exc:
        raise ParseError(str(exc), line=lineno) from None


def _reject_constant(name):
    raise ValueError(f"non-finite constant {name!r} not allowed")


def _require(record: dict, key: str, kind, path: str):
    if key not in record:
        raise SchemaError(f"missing field {key!r}", path=path)
    value = record[key]
    if kind is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise SchemaError(f"field {key!r} must be a number", path=path)
        return float(value)
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise SchemaError(f"field {key!r} must be {kind.__name__}", path=path)
    return value


def _float_list(values, length: int, path: str) -> np.ndarray:
    if not isinstance(values, list) or len(values) != length:
        raise SchemaError(f"expected a list of {length} numbers", path=path)
    for v in values:
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise SchemaError("entries must be numbers", path=path)
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise SchemaError("entries must be finite", path=path)
    return arr


def save_representations(dataset: Dataset, path: Union[str, Path]) -> None:
    """Write the dataset as a header line plus one line per instance."""

    lines = [
        _dump(
            {
                "format_version": FORMAT_VERSION,
                "dim": dataset.dim,
                "labels": list(dataset.label_space.labels),
                "k_shots": dataset.k_shots,
            }
        )
    ]
    for inst in dataset.instances:
        lines.append(
            _dump(
                {
                    "id": inst.id,
                    "split": inst.split,
                    "label": inst.label,
                    "variants": [
                        {
                            "embedding": v.embedding.values.tolist(),
                            "plm_logits": v.plm_logits.tolist(),
                        }
                        for v in inst.variants
                    ],
                }
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def load_representations(path: Union[str, Path]) -> Dataset:
    """Parse and fully validate a representation file.

    Malformed lines raise ParseError with the 1-based line number; well-formed
    lines that break the schema raise SchemaError naming the offending field
    (by record id where one exists).
    """

    text = Path(path).read_text()
    lines = text.split("\n")
    header = None
    instances = []
    for lineno, raw in enumerate(lines, start=1):
        if raw.strip() == "":
            continue
        record = _parse_line(raw, lineno)
        if not isinstance(record, dict):
            raise SchemaError("each line must be an object", path=f"line {lineno}")
        if header is None:
            header = record
            version = _require(record, "format_version", int, "header.format_version")
            if version != FORMAT_VERSION:
                raise SchemaError(f"unsupported format_version {version}", path="header.format_version")
            dim = _require(record, "dim", int, "header.dim")
            if dim <= 0:
                raise SchemaError("dim must be positive", path="header.dim")
            labels = _require(record, "labels", list, "header.labels")
            if len(labels) < 2 or not all(isinstance(x, str) for x in labels):
                raise SchemaError("labels must be a list of at least two strings", path="header.labels")
            k_shots = _require(record, "k_shots", int, "header.k_shots")
            if k_shots <= 0:
                raise SchemaError("k_shots must be positive", path="header.k_shots")
            continue
        iid = _require(record, "id", str, f"line {lineno}.id")
        split = _require(record, "split", str, f"{iid}.split")
        if split not in SPLITS:
            raise SchemaError(f"unknown split {split!r}", path=f"{iid}.split")
        label = record.get("label")
        if label is not None and not isinstance(label, str):
            raise SchemaError("label must be a string or null", path=f"{iid}.label")
        if label is None and split in ("train", "dev"):
            raise SchemaError(f"{split} instances need a label", path=f"{iid}.label")
        if label is not None and label not in labels:
            raise SchemaError(f"label {label!r} not in header labels", path=f"{iid}.label")
        raw_variants = _require(record, "variants", list, f"{iid}.variants")
        if not raw_variants:
            raise SchemaError("variants must be non-empty", path=f"{iid}.variants")
        variants = []
        for j, rv in enumerate(raw_variants):
            if not isinstance(rv, dict):
                raise SchemaError("variant must be an object", path=f"{iid}.variants[{j}]")
            emb = _float_list(rv.get("embedding"), dim, f"{iid}.variants[{j}].embedding")
            logits = _float_list(rv.get("plm_logits"), len(labels), f"{iid}.variants[{j}].plm_logits")
            variants.append(Variant(embedding=Embedding(emb), plm_logits=logits))
        instances.append(Instance(id=iid, split=split, label=label, variants=tuple(variants)))
    if header is None:
        raise ParseError("file has no header line", line=1)
    try:
        return Dataset(
            label_space=LabelSpace(tuple(labels)),
            dim=dim,
            k_shots=k_shots,
            instances=tuple(instances),
        )
    except KnncalError as exc:
        raise SchemaError(str(exc), path="dataset") from exc


@dataclass(frozen=True)
class LoadedCheckpoint:
    module: str
    model: Union[AnsModel, FrModel]
    hyperparams: Hyperparams
    seed: int


def save_checkpoint(
    model: Union[AnsModel, FrModel],
    hp: Hyperparams,
    seed: int,
    path: Union[str, Path],
) -> None:
    """Header line with shapes and hyperparameters, then one line per array."""

    if isinstance(model, FrModel):
        module = "fr"
        arrays = {"weight": model.weight, "bias": model.bias}
        extra = {}
    elif isinstance(model, AnsModel):
        module = "ans"
        arrays = {"w1": model.w1, "b1": model.b1, "w2": model.w2, "b2": model.b2}
        if model.feature_shift is not None:
            arrays["feature_shift"] = model.feature_shift
            arrays["feature_scale"] = model.feature_scale
        extra = {"k_choices": list(model.k_choices)}
    else:
        raise SchemaError(f"cannot checkpoint {type(model).__name__}", path="model")
    header = {
        "module": module,
        "shapes": {name: list(arr.shape) for name, arr in arrays.items()},
        "hyperparams": asdict(hp),
        "seed": seed,
        **extra,
    }
    lines = [_dump(header)]
    for name, arr in arrays.items():
        lines.append(_dump({"name": name, "data": arr.ravel().tolist()}))
    Path(path).write_text("\n".join(lines) + "\n")


def load_checkpoint(path: Union[str, Path]) -> LoadedCheckpoint:
    text = Path(path).read_text()
    lines = [l for l in text.split("\n") if l.strip() != ""]
    if not lines:
        raise ParseError("empty checkpoint file", line=1)
    header = _parse_line(lines[0], 1)
    module = _require(header, "module", str, "header.module")
    if module not in ("ans", "fr"):
        raise SchemaError(f"unknown module {module!r}", path="header.module")
    shapes = _require(header, "shapes", dict, "header.shapes")
    hp_dict = _require(header, "hyperparams", dict, "header.hyperparams")
    seed = _require(header, "seed", int, "header.seed")
    try:
        hp = Hyperparams(**hp_dict)
    except (TypeError, KnncalError) as exc:
        raise SchemaError(f"bad hyperparams: {exc}", path="header.hyperparams") from None
    arrays = {}
    for lineno, raw in enumerate(lines[1:], start=2):
        record = _parse_line(raw, lineno)
        name = _require(record, "name", str, f"line {lineno}.name")
        if name not in shapes:
            raise SchemaError(f"array {name!r} not declared in header", path=f"{name}")
        shape = tuple(shapes[name])
        size = int(np.prod(shape))
        arrays[name] = _float_list(record.get("data"), size, f"{name}.data").reshape(shape)
    missing = set(shapes) - set(arrays)
    if missing:
        raise SchemaError(f"arrays missing: {sorted(missing)}", path="arrays")
    try:
        if module == "fr":
            model: Union[AnsModel, FrModel] = FrModel(weight=arrays["weight"], bias=arrays["bias"])
        else:
            k_choices = _require(header, "k_choices", list, "header.k_choices")
            model = AnsModel(
                w1=arrays["w1"],
                b1=arrays["b1"],
                w2=arrays["w2"],
                b2=arrays["b2"],
                k_choices=tuple(k_choices),
                feature_shift=arrays.get("feature_shift"),
                feature_scale=arrays.get("feature_scale"),
            )
    except KnncalError as exc:
        raise SchemaError(str(exc), path="arrays") from exc
    return LoadedCheckpoint(module=module, model=model, hyperparams=hp, seed=seed)


REPORT_COLUMNS = ("method", "avg", "worst", "std", "n_runs", "lambda", "tau", "k")


def report_lines(report) -> list[str]:
    """Tab-separated rows with full-precision floats; '-' marks unused knobs.

    Accepts a RunReport or any iterable of rows.
    """

    def fmt(value) -> str:
        if value is None:
            return "-"
        if isinstance(value, float):
            return repr(value)
        return str(value)

    rows = getattr(report, "rows", report)
    out = ["\t".join(REPORT_COLUMNS)]
    for row in rows:
        out.append(
            "\t".join(
                [
                    row.method.value,
                    repr(row.avg),
                    repr(row.worst),
                    repr(row.std),
                    str(row.n_runs),
                    fmt(row.lam),
                    fmt(row.tau),
                    fmt(row.k),
                ]
            )
        )
    return out


def write_report(report, path: Union[str, Path]) -> None:
    Path(path).write_text("\n".join(report_lines(report)) + "\n")
