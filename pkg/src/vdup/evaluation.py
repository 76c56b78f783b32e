"""Duplicate-detection tasks, retrieval metrics, and the evaluation runner.

A task asks the engine to rank a small corpus against one query video. The
corpus mixes three groups: the query's own duplicates (ground truth, 2
videos), one other bug's duplicates (3 videos that are duplicates of each
other but not of the query), and one video from every remaining bug. With
the reference dataset shape of 10 bugs x 3 videos per app this yields
groups of 2/3/8, a 13-video corpus, and exactly 810 tasks per app:
every query video (30) x every different-bug choice (9) x every video
group (3) used as the non-duplicate pool.

Per task we score the rank of the first true duplicate, its reciprocal
rank, average precision over the ground-truth set, and HIT@k for k=1..10;
aggregates are arithmetic means (HIT@k becomes the fraction of tasks with
a duplicate in the top k).
"""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .corpus import VideoReport
from .errors import ParseError, ValidationError
from .ranker import DuplicateRanker, RankedResult, vocabulary_agreement
from .text import ALL_TEXT, TextDocument

log = logging.getLogger(__name__)

HIT_KS = tuple(range(1, 11))
VIDEOS_PER_BUG = 3
SAME_BUG_SIZE = 2
DIFFERENT_BUG_SIZE = 3
REFERENCE_BUGS = 10


@dataclass
class DetectionTask:
    """One query plus its corpus, split into the three groups."""

    task_id: str
    app_id: str
    query_id: str
    ground_truth: list[str]
    distractor_dup: list[str]
    unique: list[str]
    corpus_ids: list[str] = field(default_factory=list)

    def validate(self) -> None:
        groups = [self.ground_truth, self.distractor_dup, self.unique]
        combined: list[str] = sum(groups, [])
        if len(set(combined)) != len(combined):
            raise ValidationError(f"task {self.task_id}: groups overlap")
        if self.query_id in combined:
            raise ValidationError(f"task {self.task_id}: query appears in corpus")
        if len(self.ground_truth) != SAME_BUG_SIZE:
            raise ValidationError(f"task {self.task_id}: need {SAME_BUG_SIZE} ground-truth ids")
        if len(self.distractor_dup) != DIFFERENT_BUG_SIZE:
            raise ValidationError(f"task {self.task_id}: need {DIFFERENT_BUG_SIZE} distractors")
        if sorted(self.corpus_ids) != sorted(combined):
            raise ValidationError(f"task {self.task_id}: corpus_ids must cover the groups exactly")

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "app_id": self.app_id,
            "query": self.query_id,
            "ground_truth": list(self.ground_truth),
            "distractor_dup": list(self.distractor_dup),
            "unique": list(self.unique),
            "corpus": list(self.corpus_ids),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DetectionTask":
        try:
            task = cls(
                task_id=data["task_id"],
                app_id=data["app_id"],
                query_id=data["query"],
                ground_truth=list(data["ground_truth"]),
                distractor_dup=list(data["distractor_dup"]),
                unique=list(data["unique"]),
                corpus_ids=list(data["corpus"]),
            )
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed task record ({exc})") from exc
        task.validate()
        return task


def generate_tasks(bugs: dict[str, list[str]], app_id: str, seed: int = 0) -> list[DetectionTask]:
    """Enumerate every (query video, different-bug, video group) combination.

    ``bugs`` maps bug id to its 3 video report ids; video position within
    a bug's list defines the three groups. The seed only shuffles each
    task's corpus listing order (ranking is order-independent), so task
    files are byte-identical for a fixed seed.
    """
    bug_ids = sorted(bugs)
    if len(bug_ids) < 4:
        raise ValidationError(f"need at least 4 bugs to form tasks, got {len(bug_ids)}")
    for bug, vids in bugs.items():
        if len(vids) != VIDEOS_PER_BUG:
            raise ValidationError(f"bug {bug!r} has {len(vids)} videos, need {VIDEOS_PER_BUG}")
    if len(bug_ids) < REFERENCE_BUGS:
        log.warning(
            "only %d bugs: non-duplicate group shrinks to %d (reference shape is %d bugs -> 8)",
            len(bug_ids), len(bug_ids) - 2, REFERENCE_BUGS,
        )

    tasks = []
    for qbug in bug_ids:
        for qpos in range(VIDEOS_PER_BUG):
            query = bugs[qbug][qpos]
            ground_truth = [v for v in bugs[qbug] if v != query]
            for dbug in bug_ids:
                if dbug == qbug:
                    continue
                distractor = list(bugs[dbug])
                for group in range(VIDEOS_PER_BUG):
                    unique = [bugs[b][group] for b in bug_ids if b not in (qbug, dbug)]
                    task_id = f"{app_id}-{query}-{dbug}-g{group}"
                    corpus = ground_truth + distractor + unique
                    rng = np.random.default_rng((seed, len(tasks)))
                    order = rng.permutation(len(corpus))
                    task = DetectionTask(
                        task_id=task_id,
                        app_id=app_id,
                        query_id=query,
                        ground_truth=ground_truth,
                        distractor_dup=distractor,
                        unique=unique,
                        corpus_ids=[corpus[i] for i in order],
                    )
                    task.validate()
                    tasks.append(task)
    return tasks


def save_tasks(tasks: Sequence[DetectionTask], path) -> None:
    tmp = Path(path).with_suffix(".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        for task in tasks:
            fh.write(json.dumps(task.to_dict()) + "\n")
    os.replace(tmp, path)


def load_tasks(path) -> list[DetectionTask]:
    tasks = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
            tasks.append(DetectionTask.from_dict(data))
    return tasks


@dataclass
class TaskMetrics:
    rank: int
    reciprocal_rank: float
    average_precision: float
    hit: dict[int, int]


def evaluate_task(result, task: DetectionTask) -> TaskMetrics:
    """Score one ranked result against a task's ground truth."""
    ordered = result.ordered_ids() if isinstance(result, RankedResult) else list(result)
    if sorted(ordered) != sorted(task.corpus_ids):
        raise ValidationError(f"task {task.task_id}: result does not cover the task corpus")
    gt = set(task.ground_truth)
    positions = sorted(i + 1 for i, rid in enumerate(ordered) if rid in gt)
    if len(positions) != len(gt):
        raise ValidationError(f"task {task.task_id}: ground truth missing from result")
    rank = positions[0]
    ap = sum(found / pos for found, pos in enumerate(positions, start=1)) / len(positions)
    return TaskMetrics(
        rank=rank,
        reciprocal_rank=1.0 / rank,
        average_precision=ap,
        hit={k: 1 if rank <= k else 0 for k in HIT_KS},
    )


@dataclass
class MetricsReport:
    n_tasks: int
    mrr: float
    map: float
    mean_rank: float
    hit_rate: dict[int, float]

    def to_dict(self) -> dict:
        return {
            "tasks": self.n_tasks,
            "mRR": self.mrr,
            "mAP": self.map,
            "mean_rank": self.mean_rank,
            "hit": {str(k): v for k, v in sorted(self.hit_rate.items())},
        }


def aggregate(per_task: Sequence[TaskMetrics]) -> MetricsReport:
    if not per_task:
        raise ValidationError("cannot aggregate zero tasks")
    n = len(per_task)
    return MetricsReport(
        n_tasks=n,
        mrr=math.fsum(m.reciprocal_rank for m in per_task) / n,
        map=math.fsum(m.average_precision for m in per_task) / n,
        mean_rank=math.fsum(m.rank for m in per_task) / n,
        hit_rate={k: math.fsum(m.hit[k] for m in per_task) / n for k in HIT_KS},
    )


def app_agreement_history(
    reports: dict[str, VideoReport],
    bugs: dict[str, list[str]],
    strategy: str = ALL_TEXT,
) -> tuple[list[float], list[float]]:
    """Vocabulary agreement of every duplicate pair (same bug) and
    non-duplicate pair (different bugs) in a labeled per-app dataset."""
    docs = {}
    bug_of = {}
    for bug, vids in bugs.items():
        for rid in vids:
            docs[rid] = TextDocument.from_report(reports[rid], strategy)
            bug_of[rid] = bug
    ids = sorted(docs)
    dup, nondup = [], []
    for i, a in enumerate(ids):
        for b in ids[i + 1 :]:
            value = vocabulary_agreement(docs[a], docs[b])
            (dup if bug_of[a] == bug_of[b] else nondup).append(value)
    return dup, nondup


def run_tasks(
    ranker: DuplicateRanker,
    tasks: Sequence[DetectionTask],
    dup_agreements: Optional[Sequence[float]] = None,
    nondup_agreements: Optional[Sequence[float]] = None,
    jobs: int = 1,
) -> list[tuple[DetectionTask, RankedResult, TaskMetrics]]:
    """Rank and score every task. The selective mode is decided once from
    the agreement history and applied to all tasks. Results come back in
    task order regardless of ``jobs``, so runs are reproducible."""
    mode = ranker.decide_mode(dup_agreements, nondup_agreements)

    def one(task: DetectionTask) -> tuple[DetectionTask, RankedResult, TaskMetrics]:
        result = ranker.rank(task.query_id, task.corpus_ids, mode=mode)
        return task, result, evaluate_task(result, task)

    if jobs <= 1:
        return [one(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, tasks))


def write_metrics_csv(path, rows: Sequence[tuple[str, str, MetricsReport]]) -> None:
    """Flat CSV: app, config, mRR, mAP, meanRank, HIT@1..HIT@10."""
    header = "app,config,mRR,mAP,meanRank," + ",".join(f"HIT@{k}" for k in HIT_KS)
    lines = [header]
    for app, config, report in rows:
        cells = [app, config, f"{report.mrr:.6f}", f"{report.map:.6f}", f"{report.mean_rank:.6f}"]
        cells += [f"{report.hit_rate[k]:.6f}" for k in HIT_KS]
        lines.append(",".join(cells))
    tmp = Path(path).with_suffix(".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)
