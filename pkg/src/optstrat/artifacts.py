"""Dataset, model and report files.

Each file is a JSON object ``{"format", "version", "manifest", "payload"}``.
The payload is a deterministic function of the inputs and seeds; the
manifest records the command, configuration, tool version and timestamps.
Files are written to a temporary name and renamed into place.
"""

import datetime
import json
import os
import tempfile

import numpy as np

from . import __version__
from .learners.predictor import predictor_from_dict, predictor_to_dict
from .problem import ParameterSpace
from .problem_io import problem_from_source
from .strategy import StrategyCatalog

DATASET_FORMAT = "optstrat-dataset"
MODEL_FORMAT = "optstrat-model-file"
REPORT_FORMAT = "optstrat-report"


class ArtifactError(ValueError):
    """Missing, malformed or mismatched artifact file."""


def manifest(command, config, outputs=(), started=None):
    now = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    return {"command": command, "config": config, "outputs": list(outputs),
            "version": __version__, "started": started or now, "finished": now}


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def atomic_write(path, text):
    """Write ``text`` to ``path`` via a temporary file in the same directory."""
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=d)
    umask = os.umask(0)
    os.umask(umask)
    try:
        os.chmod(tmp, 0o666 & ~umask)
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_artifact(path, fmt, payload, man, **extra):
    """``extra`` holds non-deterministic sections such as timings."""
    doc = {"format": fmt, "version": 1, "manifest": man, "payload": payload, **extra}
    atomic_write(path, canonical_json(doc) + "\n")


def read_artifact(path, fmt):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ArtifactError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format") != fmt:
        got = doc.get("format") if isinstance(doc, dict) else None
        raise ArtifactError(f"{path}: expected a {fmt} file, found {got!r}")
    if doc.get("version") != 1:
        raise ArtifactError(f"{path}: unsupported version {doc.get('version')!r}")
    return doc


def payload_bytes(path):
    """Canonical bytes of a file's payload (manifest excluded)."""
    with open(path) as fh:
        doc = json.load(fh)
    return canonical_json(doc["payload"]).encode()


# ---------------------------------------------------------------------------
# datasets


def dataset_payload(problem, space, result):
    return {
        "problem": problem.source, "space": space.to_dict(),
        "param_names": problem.parameter_names, "exploration": result.config.to_dict(),
        "N": result.N, "G": result.G, "bound": result.bound_value,
        "terminated_by": result.terminated_by, "history": [list(h) for h in result.history],
        "thetas": result.thetas.tolist(), "labels": result.labels.tolist(),
        "catalog": result.catalog.to_records(),
    }


class LoadedDataset:
    """Parsed dataset file with the problem rebuilt from its recorded source."""

    def __init__(self, payload):
        self.payload = payload
        self.source = payload["problem"]
        self.space = ParameterSpace.from_dict(payload["space"])
        self.catalog = StrategyCatalog.from_records(payload["catalog"]).freeze()
        self.thetas = np.asarray(payload["thetas"], dtype=float).reshape(-1, self.space.dimension)
        self.labels = np.asarray(payload["labels"], dtype=np.int64)
        self.N = int(payload["N"])
        self.G = float(payload["G"])
        self.param_names = list(payload["param_names"])
        if self.thetas.shape[0] != self.labels.shape[0]:
            raise ArtifactError("dataset has mismatched theta and label counts")
        if self.labels.size and self.labels.max() >= self.catalog.M:
            raise ArtifactError("dataset labels exceed the catalog")

    @property
    def M(self):
        return self.catalog.M

    def problem(self):
        return problem_from_source(self.source)[0]


def load_dataset(path):
    return LoadedDataset(read_artifact(path, DATASET_FORMAT)["payload"])


# ---------------------------------------------------------------------------
# models


def model_payload(pred, ds, split_seed, train_seed):
    return {"predictor": predictor_to_dict(pred), "problem": ds.source,
            "space": ds.payload["space"], "catalog": ds.payload["catalog"], "N": ds.N,
            "G": ds.G, "split_seed": split_seed, "train_seed": train_seed}


class LoadedModel:
    def __init__(self, payload):
        self.payload = payload
        try:
            self.predictor = predictor_from_dict(payload["predictor"])
        except (KeyError, ValueError) as exc:
            raise ArtifactError(f"malformed model payload: {exc}") from None
        self.source = payload["problem"]
        self.space = ParameterSpace.from_dict(payload["space"])
        self.catalog = StrategyCatalog.from_records(payload["catalog"]).freeze()
        self.N = int(payload["N"])
        self.G = float(payload["G"])
        if self.catalog.M != self.predictor.M:
            raise ArtifactError("model and catalog disagree on the number of strategies")

    def problem(self):
        return problem_from_source(self.source)[0]


def load_model(path):
    return LoadedModel(read_artifact(path, MODEL_FORMAT)["payload"])


def load_report(path):
    return read_artifact(path, REPORT_FORMAT)
