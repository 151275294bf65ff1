"""Benchmark evaluation: per-split accuracy with multi-trial statistics.

Splits follow the benchmark convention: Easy/Hard by the number of
same-class distractors, View-Dep./View-Ind. by whether the statement uses
an observer-dependent relation. Accuracy is exact target-id match. The
deterministic path yields zero variance across trials by construction;
only external backends introduce spread.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GroundingError, OutOfGrammarError, UnknownObjectError
from .parser import DIRECTIONAL, parse
from .reasoner import ExternalReasonerConfig, resolve, run_external
from .scene import Scene
from .statements import EASY, HARD, VIEW_DEP, VIEW_IND, Statement
from .toolbox import DEFAULT_CONFIG, ToolboxConfig

SPLITS = ("overall", EASY, HARD, VIEW_DEP, VIEW_IND)


@dataclass
class SplitStats:
    mean: float
    std: float
    n: int

    def to_dict(self) -> dict:
        return {"mean": round(self.mean, 6), "std": round(self.std, 6), "n": self.n}


@dataclass
class StatementRecord:
    scene_id: str
    utterance: str
    gold: int
    predicted: list[int | None]
    correct: float
    path: str
    tags: tuple[str, ...]
    trace_ref: str | None = None

    def to_dict(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "utterance": self.utterance,
            "gold": self.gold,
            "predicted": self.predicted,
            "correct": round(self.correct, 6),
            "path": self.path,
            "tags": list(self.tags),
            "trace_ref": self.trace_ref,
        }


@dataclass
class EvalReport:
    trials: int
    n_statements: int
    n_skipped: int
    splits: dict[str, SplitStats]
    records: list[StatementRecord]
    line_errors: list[tuple[int, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "n_statements": self.n_statements,
            "n_skipped": self.n_skipped,
            "splits": {name: self.splits[name].to_dict() for name in SPLITS},
            "records": [r.to_dict() for r in self.records],
            "line_errors": [{"line": n, "error": e} for n, e in self.line_errors],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


def format_table(report: EvalReport) -> str:
    names = {"overall": "Overall", EASY: "Easy", HARD: "Hard",
             VIEW_DEP: "View-Dep.", VIEW_IND: "View-Ind."}
    lines = [f"{'Split':<10} {'Accuracy':>18} {'n':>6}"]
    for split in SPLITS:
        stats = report.splits[split]
        lines.append(
            f"{names[split]:<10} {stats.mean:>10.3f} ± {stats.std:<5.3f} {stats.n:>6}"
        )
    lines.append(f"statements: {report.n_statements}  skipped: {report.n_skipped}  trials: {report.trials}")
    return "\n".join(lines)


def _ensure_tags(statement: Statement, scene: Scene) -> tuple[str, ...]:
    """Fill in missing split tags so partitions stay consistent."""
    tags = set(statement.tags)
    if EASY not in tags and HARD not in tags:
        try:
            label = scene.object(statement.target_id).label
            distractors = sum(1 for o in scene.objects if o.label == label) - 1
        except UnknownObjectError:
            distractors = 0
        tags.add(HARD if distractors > 1 else EASY)
    if VIEW_DEP not in tags and VIEW_IND not in tags:
        try:
            program = parse(statement.utterance)
            directional = any(
                t.relation in DIRECTIONAL for t in (*program.terms, *program.negated_terms)
            )
        except OutOfGrammarError:
            words = set(statement.utterance.lower().split())
            directional = bool(words & {"left", "right", "front", "behind", "facing"})
        tags.add(VIEW_DEP if directional else VIEW_IND)
    return tuple(sorted(tags))


def _predict(scene: Scene, utterance: str, toolbox_config: ToolboxConfig,
             external: ExternalReasonerConfig | None, client=None):
    """Returns (predicted id or None, path, trace)."""
    try:
        program = parse(utterance)
    except OutOfGrammarError:
        if external is None:
            return None, "deterministic", []
        try:
            result = run_external(external, scene, utterance, client=client,
                                  toolbox_config=toolbox_config)
            return result.target_id, "external", result.trace
        except GroundingError:
            return None, "external", []
    try:
        result = resolve(program, scene, toolbox_config)
        return result.target_id, "deterministic", result.trace
    except GroundingError:
        return None, "deterministic", []


def run_eval(scenes: dict[str, Scene], statements: list[Statement], trials: int = 1,
             skip: bool = False, use_captions: bool = True,
             toolbox_config: ToolboxConfig = DEFAULT_CONFIG,
             external: ExternalReasonerConfig | None = None,
             client_factory=None, trace_dir: str | Path | None = None,
             line_errors: list[tuple[int, str]] | None = None) -> EvalReport:
    """Evaluate statements against their scenes.

    ``skip`` excludes statements flagged skip before accuracy, mirroring
    the benchmark's "+skip" protocol. ``use_captions=False`` strips
    captions before resolution (the captions ablation).
    """
    n_skipped = sum(1 for s in statements if s.skip)
    active = [s for s in statements if not (skip and s.skip)]

    prepared: dict[str, Scene] = {}

    def scene_for(scene_id: str) -> Scene:
        if scene_id not in prepared:
            if scene_id not in scenes:
                raise GroundingError(f"unknown scene_id {scene_id!r}")
            scene = scenes[scene_id]
            prepared[scene_id] = scene if use_captions else scene.without_captions()
        return prepared[scene_id]

    if trace_dir is not None:
        trace_dir = Path(trace_dir)
        trace_dir.mkdir(parents=True, exist_ok=True)

    records: list[StatementRecord] = []
    per_trial_correct = np.zeros((trials, len(active)))
    for idx, statement in enumerate(active):
        scene = scene_for(statement.scene_id)
        predictions: list[int | None] = []
        path = "deterministic"
        for trial in range(trials):
            client = client_factory() if client_factory is not None else None
            predicted, path, trace = _predict(scene, statement.utterance,
                                              toolbox_config, external, client)
            predictions.append(predicted)
            per_trial_correct[trial, idx] = 1.0 if predicted == statement.target_id else 0.0
            if trial == 0 and trace_dir is not None:
                ref = trace_dir / f"trace-{idx:05d}.jsonl"
                ref.write_text(
                    "".join(json.dumps(c.to_dict(), sort_keys=True) + "\n" for c in trace),
                    "utf-8",
                )
        tags = _ensure_tags(statement, scene)
        records.append(
            StatementRecord(
                scene_id=statement.scene_id,
                utterance=statement.utterance,
                gold=statement.target_id,
                predicted=predictions,
                correct=float(np.mean([p == statement.target_id for p in predictions])),
                path=path,
                tags=tags,
                trace_ref=f"trace-{idx:05d}.jsonl" if trace_dir is not None else None,
            )
        )

    splits: dict[str, SplitStats] = {}
    for split in SPLITS:
        members = [
            i for i, r in enumerate(records) if split == "overall" or split in r.tags
        ]
        if members:
            per_trial = per_trial_correct[:, members].mean(axis=1)
            splits[split] = SplitStats(float(per_trial.mean()), float(per_trial.std()), len(members))
        else:
            splits[split] = SplitStats(0.0, 0.0, 0)
    return EvalReport(
        trials=trials,
        n_statements=len(active),
        n_skipped=n_skipped,
        splits=splits,
        records=records,
        line_errors=list(line_errors or []),
    )
