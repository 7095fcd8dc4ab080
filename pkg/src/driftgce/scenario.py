"""Synthetic drift scenarios: Gaussian sub-concept mixtures over [0,1]^d.

A scenario is a list of SubConcept blobs, each carrying a class label
and a mixture weight. Drift is a pure transform of the scenario list
(remove a blob, swap two labels, translate a mean, or a sequence of
those), so pre- and post-drift windows are sampled from two scenario
values that share provenance.

Sampling is reproducible across platforms: the generator is
numpy.random.default_rng (PCG64) and the call order is fixed and
documented in docs/file_formats.md (component choice first, then one
standard-normal block).
"""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python 3.10
    import tomli as tomllib

from .errors import InvalidArgumentError

FORMAT_VERSION = 1


@dataclass
class SubConcept:
    """One Gaussian blob: diagonal covariance, class label, mixture weight."""

    id: int
    label: int
    mean: np.ndarray
    std: np.ndarray
    weight: float

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.mean.ndim != 1 or self.std.shape != self.mean.shape:
            raise InvalidArgumentError("mean and std must be 1-d arrays of equal length")
        if self.label not in (0, 1):
            raise InvalidArgumentError(f"label must be 0 or 1, got {self.label}")
        if not np.all(np.isfinite(self.mean)) or np.any(self.mean < 0) or np.any(self.mean > 1):
            raise InvalidArgumentError("mean must lie in the unit box")
        if not np.all(self.std > 0):
            raise InvalidArgumentError("standard deviations must be positive")
        if not (np.isfinite(self.weight) and self.weight > 0):
            raise InvalidArgumentError("weight must be positive and finite")


@dataclass
class DriftSpec:
    """Tagged drift transform: vanish, swap_labels, shift, or combined."""

    kind: str
    id: int | None = None
    other_id: int | None = None
    delta: np.ndarray | None = None
    steps: list["DriftSpec"] = field(default_factory=list)

    @classmethod
    def vanish(cls, sub_id: int) -> "DriftSpec":
        return cls(kind="vanish", id=sub_id)

    @classmethod
    def swap_labels(cls, id_a: int, id_b: int) -> "DriftSpec":
        return cls(kind="swap_labels", id=id_a, other_id=id_b)

    @classmethod
    def shift(cls, sub_id: int, delta) -> "DriftSpec":
        return cls(kind="shift", id=sub_id, delta=np.asarray(delta, dtype=np.float64))

    @classmethod
    def combined(cls, steps: list["DriftSpec"]) -> "DriftSpec":
        return cls(kind="combined", steps=list(steps))


@dataclass
class SampleWindow:
    """A sampled data window: features in [0,1]^d plus ground-truth labels.

    subconcept_ids records which blob generated each row; it never feeds
    the pipeline (models and explanations see features and labels only)
    but lets tests check structural claims against the ground truth.
    """

    features: np.ndarray
    labels: np.ndarray
    tag: str = ""
    subconcept_ids: np.ndarray | None = None

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def validate_scenario(scenario: list[SubConcept]) -> None:
    if not scenario:
        raise InvalidArgumentError("scenario has no sub-concepts")
    ids = [s.id for s in scenario]
    if len(set(ids)) != len(ids):
        raise InvalidArgumentError(f"duplicate sub-concept ids: {ids}")
    dims = {s.mean.shape[0] for s in scenario}
    if len(dims) != 1:
        raise InvalidArgumentError(f"inconsistent feature dimensions: {sorted(dims)}")
    total = sum(s.weight for s in scenario)
    if not np.isfinite(total) or total <= 0:
        raise InvalidArgumentError("weights are not normalizable")


def _find(scenario: list[SubConcept], sub_id: int) -> int:
    for i, s in enumerate(scenario):
        if s.id == sub_id:
            return i
    raise InvalidArgumentError(f"unknown sub-concept id {sub_id}")


def apply_drift(scenario: list[SubConcept], drift: DriftSpec) -> list[SubConcept]:
    """Return the post-drift scenario. The input list is never mutated."""
    validate_scenario(scenario)
    out = [dataclasses.replace(s) for s in scenario]
    if drift.kind == "vanish":
        i = _find(out, drift.id)
        del out[i]
        if not out:
            raise InvalidArgumentError("vanish would leave an empty scenario")
        total = sum(s.weight for s in out)
        for s in out:
            s.weight = s.weight / total
    elif drift.kind == "swap_labels":
        i = _find(out, drift.id)
        j = _find(out, drift.other_id)
        out[i].label, out[j].label = out[j].label, out[i].label
    elif drift.kind == "shift":
        i = _find(out, drift.id)
        if drift.delta is None or drift.delta.shape != out[i].mean.shape:
            raise InvalidArgumentError("shift delta must match the feature dimension")
        out[i].mean = np.clip(out[i].mean + drift.delta, 0.0, 1.0)
    elif drift.kind == "combined":
        for step in drift.steps:
            out = apply_drift(out, step)
    else:
        raise InvalidArgumentError(f"unknown drift kind {drift.kind!r}")
    return out


def sample_window(scenario: list[SubConcept], n: int, seed: int, tag: str = "") -> SampleWindow:
    """Draw n points: pick a blob per row by weight, then one Gaussian draw.

    Features are clamped to the unit box after sampling.
    """
    validate_scenario(scenario)
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    weights = np.array([s.weight for s in scenario], dtype=np.float64)
    weights = weights / weights.sum()
    means = np.stack([s.mean for s in scenario])
    stds = np.stack([s.std for s in scenario])
    labels = np.array([s.label for s in scenario], dtype=np.int64)
    ids = np.array([s.id for s in scenario], dtype=np.int64)

    idx = rng.choice(len(scenario), size=n, p=weights)
    noise = rng.standard_normal((n, means.shape[1]))
    feats = np.clip(means[idx] + noise * stds[idx], 0.0, 1.0)
    return SampleWindow(features=feats, labels=labels[idx], tag=tag, subconcept_ids=ids[idx])


# ---------------------------------------------------------------------------
# built-in case studies
#
# Layouts are fixed constants chosen so each case produces its intended
# three-layer signature (docs/file_formats.md records the layout
# reasoning and the target numbers each case is tuned to hit).


def build_case(case_id: int, n_per_window: int = 1000, seed: int = 0):
    """Return (scenario, drift) for one of the three built-in cases.

    Case 1: one class-1 sub-concept vanishes; the model barely changes.
    Case 2: two sub-concepts exchange labels; every group's
            counterfactual direction inverts while P(X) is unchanged.
    Case 3: one class-0 sub-concept moves and one class-1 sub-concept
            vanishes; disagreement is confined to a single region.

    n_per_window and seed are validated and echoed by callers that
    sample; the layout itself does not depend on them.
    """
    if case_id not in (1, 2, 3):
        raise InvalidArgumentError(f"case_id must be 1, 2 or 3, got {case_id}")
    if n_per_window < 200:
        raise InvalidArgumentError("n_per_window must be >= 200 for stable group estimates")

    s = 0.05
    if case_id == 1:
        scenario = [
            SubConcept(1, 0, [0.67, 0.80], [s, s], 0.35),
            SubConcept(2, 0, [0.67, 0.20], [s, s], 0.35),
            SubConcept(3, 1, [0.10, 0.10], [s, s], 0.16),
            SubConcept(4, 1, [0.14, 0.96], [s, s], 0.14),
        ]
        drift = DriftSpec.vanish(4)
    elif case_id == 2:
        # staggered row: outer blobs swap; inner gaps stay unambiguous so
        # every point's nearest opposite-class mass is unique pre and post
        t = 0.025
        scenario = [
            SubConcept(1, 0, [0.07, 0.46], [t, t], 0.25),
            SubConcept(2, 0, [0.30, 0.54], [t, t], 0.25),
            SubConcept(3, 1, [0.72, 0.54], [t, t], 0.25),
            SubConcept(4, 1, [0.93, 0.46], [t, t], 0.25),
        ]
        drift = DriftSpec.swap_labels(1, 4)
    else:
        t = 0.025
        scenario = [
            SubConcept(1, 0, [0.50, 0.15], [t, t], 0.22),
            SubConcept(2, 0, [0.85, 0.12], [t, t], 0.21),
            SubConcept(3, 1, [0.15, 0.70], [t, t], 0.29),
            SubConcept(4, 1, [0.50, 0.47], [t, t], 0.28),
        ]
        drift = DriftSpec.combined([DriftSpec.shift(1, [0.12, 0.03]), DriftSpec.vanish(4)])
    return scenario, drift


# ---------------------------------------------------------------------------
# window CSV files


def write_window_csv(window: SampleWindow, path) -> None:
    d = window.dim
    header = [f"x{i + 1}" for i in range(d)] + ["label"]
    if window.subconcept_ids is not None:
        header.append("subconcept")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for i in range(len(window)):
            row = [repr(float(v)) for v in window.features[i]] + [int(window.labels[i])]
            if window.subconcept_ids is not None:
                row.append(int(window.subconcept_ids[i]))
            wr.writerow(row)


def read_window_csv(path, tag: str = "") -> SampleWindow:
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        rows = list(rd)
    has_sub = header and header[-1] == "subconcept"
    d = len(header) - (2 if has_sub else 1)
    if d < 1 or header[:d] != [f"x{i + 1}" for i in range(d)] or header[d] != "label":
        raise InvalidArgumentError(f"unrecognized window header {header!r} in {path}")
    if not rows:
        raise InvalidArgumentError(f"window file {path} has no rows")
    feats = np.array([[float(r[i]) for i in range(d)] for r in rows], dtype=np.float64)
    labels = np.array([int(r[d]) for r in rows], dtype=np.int64)
    subs = np.array([int(r[d + 1]) for r in rows], dtype=np.int64) if has_sub else None
    return SampleWindow(features=feats, labels=labels, tag=tag, subconcept_ids=subs)


# ---------------------------------------------------------------------------
# scenario config files (TOML)


def _toml_list(values) -> str:
    return "[" + ", ".join(repr(float(v)) for v in values) + "]"


def _drift_tables(drift: DriftSpec, path: str, array: bool) -> list[str]:
    header = f"[[{path}]]" if array else f"[{path}]"
    lines = [header, f'kind = "{drift.kind}"']
    if drift.id is not None:
        lines.append(f"id = {drift.id}")
    if drift.other_id is not None:
        lines.append(f"other_id = {drift.other_id}")
    if drift.delta is not None:
        lines.append(f"delta = {_toml_list(drift.delta)}")
    out = ["\n".join(lines)]
    for step in drift.steps:
        out.extend(_drift_tables(step, f"{path}.steps", array=True))
    return out


def write_scenario_file(path, scenario: list[SubConcept], drift: DriftSpec | None = None) -> None:
    validate_scenario(scenario)
    blocks = [f"format_version = {FORMAT_VERSION}"]
    for s in scenario:
        blocks.append(
            "\n".join(
                [
                    "[[subconcept]]",
                    f"id = {s.id}",
                    f"label = {s.label}",
                    f"weight = {s.weight!r}",
                    f"mean = {_toml_list(s.mean)}",
                    f"std = {_toml_list(s.std)}",
                ]
            )
        )
    if drift is not None:
        blocks.extend(_drift_tables(drift, "drift", array=False))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n\n".join(blocks) + "\n")


def _drift_from_dict(tbl: dict) -> DriftSpec:
    kind = tbl.get("kind")
    if kind == "combined":
        return DriftSpec.combined([_drift_from_dict(t) for t in tbl.get("steps", [])])
    if kind == "vanish":
        return DriftSpec.vanish(int(tbl["id"]))
    if kind == "swap_labels":
        return DriftSpec.swap_labels(int(tbl["id"]), int(tbl["other_id"]))
    if kind == "shift":
        return DriftSpec.shift(int(tbl["id"]), tbl["delta"])
    raise InvalidArgumentError(f"unknown drift kind {kind!r} in scenario file")


def read_scenario_file(path):
    """Parse a scenario TOML file. Returns (scenario, drift-or-None)."""
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise InvalidArgumentError(f"unsupported scenario format_version {version!r}")
    try:
        scenario = [
            SubConcept(int(t["id"]), int(t["label"]), t["mean"], t["std"], float(t["weight"]))
            for t in data.get("subconcept", [])
        ]
    except KeyError as exc:
        raise InvalidArgumentError(f"subconcept table missing key {exc}") from exc
    validate_scenario(scenario)
    drift = _drift_from_dict(data["drift"]) if "drift" in data else None
    return scenario, drift
