"""Strategy encoding and the append-only strategy catalog."""

import json
from dataclasses import dataclass

import numpy as np

from .solver import OPTIMAL

INT_ROUND_TOL = 1e-6


@dataclass(frozen=True, order=True)
class Strategy:
    """Tight canonical rows plus the integer assignment (empty if continuous)."""

    tight_rows: tuple = ()
    integer_values: tuple = ()

    def __post_init__(self):
        rows = tuple(int(i) for i in self.tight_rows)
        if any(b <= a for a, b in zip(rows, rows[1:])):
            raise ValueError("tight_rows must be sorted and duplicate-free")
        object.__setattr__(self, "tight_rows", rows)
        object.__setattr__(self, "integer_values", tuple(int(v) for v in self.integer_values))

    def to_dict(self):
        return {"tight_rows": list(self.tight_rows), "integer_values": list(self.integer_values)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["tight_rows"]), tuple(d["integer_values"]))


class StrategyError(ValueError):
    pass


def encode(result, inst):
    """Strategy of an optimal solve result on ``inst``."""
    if result.status != OPTIMAL:
        raise StrategyError(f"cannot encode a {result.status} result")
    if inst.integer.size:
        vals = np.asarray(result.x_star, dtype=float)[inst.integer]
        rounded = np.round(vals)
        if np.any(np.abs(vals - rounded) > INT_ROUND_TOL):
            raise StrategyError("integer variables are not integral within tolerance")
        ints = tuple(int(v) for v in rounded)
    else:
        ints = ()
    return Strategy(tuple(sorted(set(result.tight_rows))), ints)


class StrategyCatalog:
    """Deduplicating map from strategies to labels assigned in first-seen order."""

    def __init__(self):
        self._strategies = []
        self._labels = {}
        self._counts = []
        self.frozen = False

    def insert(self, s):
        """Return ``(label, is_new)`` and count the occurrence."""
        label = self._labels.get(s)
        if label is not None:
            self._counts[label] += 1
            return label, False
        if self.frozen:
            raise StrategyError("catalog is frozen")
        label = len(self._strategies)
        self._strategies.append(s)
        self._labels[s] = label
        self._counts.append(1)
        return label, True

    def lookup(self, s):
        return self._labels.get(s)

    def freeze(self):
        self.frozen = True
        return self

    @property
    def M(self):
        return len(self._strategies)

    def __len__(self):
        return len(self._strategies)

    def __getitem__(self, label):
        return self._strategies[label]

    @property
    def strategies(self):
        return list(self._strategies)

    @property
    def counts(self):
        return list(self._counts)

    @property
    def total(self):
        return sum(self._counts)

    def frequency_of_frequencies(self):
        """Map r -> N_r, the number of labels seen exactly r times."""
        out = {}
        for c in self._counts:
            out[c] = out.get(c, 0) + 1
        return out

    def to_records(self):
        return [
            {"label": i, "tight_rows": list(s.tight_rows),
             "integer_values": list(s.integer_values), "count": c}
            for i, (s, c) in enumerate(zip(self._strategies, self._counts))
        ]

    @classmethod
    def from_records(cls, records):
        cat = cls()
        for k, rec in enumerate(sorted(records, key=lambda r: r["label"])):
            if rec["label"] != k:
                raise StrategyError("catalog labels must be 0..M-1 without gaps")
            s = Strategy(tuple(rec["tight_rows"]), tuple(rec["integer_values"]))
            if s in cat._labels:
                raise StrategyError(f"duplicate strategy at label {k}")
            cat._strategies.append(s)
            cat._labels[s] = k
            cat._counts.append(int(rec["count"]))
        return cat

    def dumps(self):
        return json.dumps({"format": "optstrat-catalog", "version": 1,
                           "strategies": self.to_records()}, indent=1, sort_keys=True)

    @classmethod
    def loads(cls, text):
        payload = json.loads(text)
        if payload.get("format") != "optstrat-catalog":
            raise StrategyError("not a strategy catalog file")
        return cls.from_records(payload["strategies"])


def catalog_insert(catalog, s):
    """Insert ``s``; returns ``(label, is_new)``."""
    return catalog.insert(s)
