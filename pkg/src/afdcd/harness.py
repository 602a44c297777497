"""End-to-end experiment loop: data, teacher pretraining, the distillation
objective, evaluation, diagnostics, and on-disk run artifacts.

All randomness flows from one seed through named child streams, so a run is
a pure function of its config: two runs with the same config produce
byte-identical CSV output. The teacher is frozen during distillation and its
outputs are cached per image.
"""
from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import featio, losses, masking, metrics, nn
from .config import RunConfig
from .data import ToyDataset, SegSplit, gen_toy_dataset
from .errors import DegenerateInputError, TrainingError
from .masking import GeneratorParams
from .metrics import DistanceHistogram
from .models import ToyModel, model_backward, model_forward, model_init, predict

RUN_CSV_HEADER = "iter,task,kd,fd,afdcd,total"
MEASURE_IMAGES = 8

_STREAM_NAMES = (
    "data",
    "teacher_init",
    "teacher_batches",
    "student_init",
    "generator_init",
    "distill_batches",
    "masks",
    "metrics",
)


@dataclass
class Streams:
    data: np.random.Generator
    teacher_init: np.random.Generator
    teacher_batches: np.random.Generator
    student_init: np.random.Generator
    generator_init: np.random.Generator
    distill_batches: np.random.Generator
    masks: np.random.Generator
    metrics: np.random.Generator


def spawn_streams(seed: int) -> Streams:
    """Independent named child streams of one root seed, in a fixed order."""
    children = np.random.SeedSequence(seed).spawn(len(_STREAM_NAMES))
    return Streams(**{
        name: np.random.default_rng(child)
        for name, child in zip(_STREAM_NAMES, children)
    })


@dataclass
class RunRecord:
    seed: int
    config: dict
    rows: list[tuple[int, float, float, float, float, float]]
    teacher_miou: float
    student_miou: float
    student_per_class: list[float]
    ts_init_mean: float
    ts_final_mean: float
    ts_histogram: DistanceHistogram
    selfsim_histogram: DistanceHistogram
    files: dict[str, str]

    @property
    def selfsim_variance(self) -> float:
        return self.selfsim_histogram.variance


def rows_to_csv(rows: list[tuple[int, float, float, float, float, float]]) -> str:
    lines = [RUN_CSV_HEADER]
    for it, task, kd, fd, afdcd, total in rows:
        lines.append(f"{it},{task!r},{kd!r},{fd!r},{afdcd!r},{total!r}")
    return "\n".join(lines) + "\n"


class _TeacherCache:
    """Frozen-teacher outputs per training-image index, computed lazily."""

    def __init__(self, teacher: ToyModel, split: SegSplit):
        self.teacher = teacher
        self.split = split
        self._store: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def get(self, idx: int) -> tuple[np.ndarray, np.ndarray]:
        hit = self._store.get(idx)
        if hit is None:
            logits, feats, _ = model_forward(self.teacher, self.split.images[idx])
            hit = (logits, feats)
            self._store[idx] = hit
        return hit


def _accumulate(into: list[np.ndarray], grads: list[np.ndarray]) -> None:
    for a, g in zip(into, grads):
        a += g


def train_teacher(
    cfg: RunConfig,
    dataset: ToyDataset,
    rng_init: np.random.Generator,
    rng_batches: np.random.Generator,
) -> tuple[ToyModel, float]:
    """Task-loss-only training of the teacher; returns it with its val mIoU."""
    teacher = model_init(cfg.teacher_layers, cfg.teacher_channels, cfg.num_classes, rng_init)
    params = teacher.param_list()
    velocity = [np.zeros_like(p) for p in params]
    count = len(dataset.train.images)
    for it in range(cfg.teacher_iterations):
        idx = rng_batches.integers(0, count, cfg.batch_size)
        grads = [np.zeros_like(p) for p in params]
        batch_loss = 0.0
        for i in idx:
            logits, _, cache = model_forward(teacher, dataset.train.images[i])
            loss, grad_logits = nn.softmax_xent(logits, dataset.train.labels[i])
            batch_loss += loss
            _accumulate(grads, model_backward(teacher, cache, grad_logits))
        if not math.isfinite(batch_loss):
            raise TrainingError(f"teacher loss non-finite at iteration {it}", iteration=it)
        for g in grads:
            g /= cfg.batch_size
        nn.sgd_step(params, grads, velocity, cfg.lr, cfg.momentum)
    teacher_miou, _ = evaluate(teacher, dataset.val, cfg.num_classes)
    return teacher, teacher_miou


def evaluate(model: ToyModel, split: SegSplit, num_classes: int) -> tuple[float, list[float]]:
    """mIoU over the whole split from one pooled confusion matrix."""
    conf = np.zeros((num_classes, num_classes), dtype=np.int64)
    for image, label in zip(split.images, split.labels):
        conf += metrics.confusion_matrix(predict(model, image), label, num_classes)
    per_class, score = metrics.miou_from_confusion(conf)
    return score, per_class


def _afdcd_loss(
    cfg: RunConfig, fs: np.ndarray, ft: np.ndarray
) -> tuple[float, np.ndarray]:
    if cfg.afdcd_variant == "sc":
        return losses.loss_sc(
            fs, ft, cfg.tau, cfg.distance, cfg.include_positive_in_denominator
        )
    if cfg.afdcd_variant == "cc":
        return losses.loss_cc(
            fs, ft, cfg.channel_groups, cfg.tau, cfg.distance,
            cfg.include_positive_in_denominator,
        )
    return losses.loss_oc(fs, ft, cfg.contrast_config())


def _distill_batch(
    cfg: RunConfig,
    dataset: ToyDataset,
    student: ToyModel,
    generator: GeneratorParams,
    teacher_cache: _TeacherCache,
    rng_masks: np.random.Generator,
    idx: np.ndarray,
    terms: set[str],
    need_generator: bool,
    grads: list[np.ndarray],
    sums: dict[str, float],
    student_param_count: int,
) -> None:
    """Accumulate one batch of losses and gradients into grads/sums."""
    for i in idx:
        image = dataset.train.images[i]
        label = dataset.train.labels[i]
        logits_s, feat_s, cache_s = model_forward(student, image)
        logits_t, feat_t = teacher_cache.get(int(i))
        task_value, grad_logits = nn.softmax_xent(logits_s, label)
        sums["task"] += task_value
        if "kd" in terms:
            kd_value, grad_kd = losses.loss_kd(logits_s, logits_t, cfg.kd_temperature)
            sums["kd"] += kd_value
            grad_logits = grad_logits + cfg.lambda1 * grad_kd
        grad_feat = None
        if need_generator:
            mask = masking.sample_mask(
                feat_s.shape[0], feat_s.shape[1], cfg.mask_ratio,
                rng_masks, cfg.mask_method,
            )
            masked = masking.apply_mask(feat_s, mask)
            gen_out, gen_cache = masking.generator_forward_cache(masked, generator)
            grad_gen_out = np.zeros_like(gen_out)
            if "fd" in terms:
                fd_value, grad_fd = losses.l_fd(feat_t, gen_out)
                sums["fd"] += fd_value
                grad_gen_out += cfg.lambda2 * grad_fd
            if "afdcd" in terms:
                af_value, grad_af = _afdcd_loss(cfg, gen_out, feat_t)
                sums["afdcd"] += af_value
                grad_gen_out += cfg.lambda3 * grad_af
            grad_masked, gen_grads = masking.generator_backward(
                gen_cache, generator, grad_gen_out
            )
            grad_feat = masking.apply_mask(grad_masked, mask)
            _accumulate(grads[student_param_count:], gen_grads)
        _accumulate(
            grads[:student_param_count],
            model_backward(student, cache_s, grad_logits, grad_feat),
        )


def distill_student(
    cfg: RunConfig,
    dataset: ToyDataset,
    student: ToyModel,
    generator: GeneratorParams,
    teacher_cache: _TeacherCache,
    rng_batches: np.random.Generator,
    rng_masks: np.random.Generator,
) -> list[tuple[int, float, float, float, float, float]]:
    """Run the distillation loop in place; returns the per-iteration log rows.

    Per item: the task and logit-KD terms see the plain student forward; the
    feature terms see the masked student features pushed through the
    generator. Component columns log unweighted batch means; the total column
    applies the lambda weighting.
    """
    terms = set(cfg.loss_terms)
    need_generator = bool({"fd", "afdcd"} & terms)
    params = student.param_list() + generator.param_list()
    velocity = [np.zeros_like(p) for p in params]
    count = len(dataset.train.images)
    student_param_count = len(student.param_list())
    rows = []
    for it in range(cfg.iterations):
        idx = rng_batches.integers(0, count, cfg.batch_size)
        grads = [np.zeros_like(p) for p in params]
        sums = {"task": 0.0, "kd": 0.0, "fd": 0.0, "afdcd": 0.0}
        try:
            _distill_batch(
                cfg, dataset, student, generator, teacher_cache, rng_masks,
                idx, terms, need_generator, grads, sums, student_param_count,
            )
        except DegenerateInputError as exc:
            raise TrainingError(
                f"loss evaluation failed at iteration {it}: {exc}", iteration=it
            ) from exc
        means = {k: v / cfg.batch_size for k, v in sums.items()}
        bundle = losses.total_loss(
            means["task"], means["kd"], means["fd"], means["afdcd"],
            cfg.lambda1, cfg.lambda2, cfg.lambda3,
        )
        if not math.isfinite(bundle.total):
            raise TrainingError(f"loss non-finite at iteration {it}", iteration=it)
        for g in grads:
            g /= cfg.batch_size
        nn.sgd_step(params, grads, velocity, cfg.lr, cfg.momentum)
        rows.append(
            (it, bundle.task, bundle.kd, bundle.fd, bundle.afdcd, bundle.total)
        )
    return rows


def _measure_features(
    student: ToyModel,
    generator: GeneratorParams,
    teacher: ToyModel,
    split: SegSplit,
    count: int,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Unmasked distillation features (F^s, F^t) of the first val images."""
    pairs = []
    for image in split.images[:count]:
        _, feat_s, _ = model_forward(student, image)
        fs = masking.generator_forward(feat_s, generator)
        _, ft, _ = model_forward(teacher, image)
        pairs.append((fs, ft))
    return pairs


def _ts_mean(pairs: list[tuple[np.ndarray, np.ndarray]], m: int) -> tuple[float, np.ndarray]:
    dists = np.concatenate([metrics.ts_pair_distances(fs, ft, m) for fs, ft in pairs])
    return float(dists.mean()), dists


def run_experiment(
    cfg: RunConfig,
    prepared: tuple[ToyDataset, ToyModel, float, _TeacherCache] | None = None,
) -> RunRecord:
    """Full pipeline for one config; writes artifacts when out_dir is set.

    `prepared` re-uses a (dataset, teacher, teacher mIoU, cache) tuple from a
    previous run with the same seed and data/teacher keys; results are
    identical to recomputing them because every phase has its own seed stream.
    """
    streams = spawn_streams(cfg.seed)
    if prepared is None:
        dataset = gen_toy_dataset(cfg.dataset_spec(), streams.data)
        teacher, teacher_miou = train_teacher(
            cfg, dataset, streams.teacher_init, streams.teacher_batches
        )
        teacher_cache = _TeacherCache(teacher, dataset.train)
    else:
        dataset, teacher, teacher_miou, teacher_cache = prepared

    student = model_init(
        cfg.student_layers, cfg.student_channels, cfg.num_classes, streams.student_init
    )
    generator = masking.generator_init(
        cfg.student_channels, cfg.teacher_channels, streams.generator_init
    )

    measure_count = min(MEASURE_IMAGES, len(dataset.val.images))
    groups = cfg.channel_groups
    pairs = _measure_features(student, generator, teacher, dataset.val, measure_count)
    ts_init_mean, _ = _ts_mean(pairs, groups)

    rows = distill_student(
        cfg, dataset, student, generator, teacher_cache,
        streams.distill_batches, streams.masks,
    )

    pairs = _measure_features(student, generator, teacher, dataset.val, measure_count)
    ts_final_mean, ts_dists = _ts_mean(pairs, groups)
    ts_hist = metrics.histogram_from_distances(
        metrics.subsample_distances(ts_dists, None, streams.metrics)
    )
    window = cfg.patch_side
    selfsim = np.concatenate(
        [metrics.self_similarity_distances(fs, window, groups) for fs, _ in pairs]
    )
    selfsim_hist = metrics.histogram_from_distances(
        metrics.subsample_distances(selfsim, None, streams.metrics)
    )

    student_miou, per_class = evaluate(student, dataset.val, cfg.num_classes)

    record = RunRecord(
        seed=cfg.seed,
        config=cfg.to_dict(),
        rows=rows,
        teacher_miou=teacher_miou,
        student_miou=student_miou,
        student_per_class=per_class,
        ts_init_mean=ts_init_mean,
        ts_final_mean=ts_final_mean,
        ts_histogram=ts_hist,
        selfsim_histogram=selfsim_hist,
        files={},
    )
    if cfg.out_dir:
        record.files = _write_artifacts(cfg.out_dir, record, pairs[0])
    return record


def _write_artifacts(
    out_dir: str,
    record: RunRecord,
    feature_pair: tuple[np.ndarray, np.ndarray],
) -> dict[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    files = {}

    def emit(name: str, text: str) -> None:
        path = os.path.join(out_dir, name)
        with open(path, "w") as fh:
            fh.write(text)
        files[name] = path

    emit("run.csv", rows_to_csv(record.rows))
    emit(
        "config.json",
        json.dumps(record.config, indent=2, sort_keys=True) + "\n",
    )
    emit("ts_distance.csv", metrics.format_histogram_csv(record.ts_histogram))
    emit("self_similarity.csv", metrics.format_histogram_csv(record.selfsim_histogram))
    summary = {
        "seed": record.seed,
        "teacher_miou": record.teacher_miou,
        "student_miou": record.student_miou,
        "student_per_class": record.student_per_class,
        "ts_init_mean": record.ts_init_mean,
        "ts_final_mean": record.ts_final_mean,
        "selfsim_variance": record.selfsim_variance,
    }
    emit("record.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    for name, feat in (
        ("features_student.bin", feature_pair[0]),
        ("features_teacher.bin", feature_pair[1]),
    ):
        path = os.path.join(out_dir, name)
        featio.write_features(path, feat)
        files[name] = path
    return files


def run_study(
    base: RunConfig,
    variants: dict[str, list[str]],
    seeds: list[int],
) -> dict[int, dict[str, RunRecord]]:
    """Run each loss-term variant at each seed, sharing the per-seed teacher.

    Variants must differ only in keys that do not affect the dataset or the
    teacher (loss terms and lambda weights), which is what makes the shared
    teacher identical to a per-variant retrain.
    """
    results: dict[int, dict[str, RunRecord]] = {}
    for seed in seeds:
        cfg0 = dataclasses.replace(base, seed=seed, out_dir=None)
        streams = spawn_streams(seed)
        dataset = gen_toy_dataset(cfg0.dataset_spec(), streams.data)
        teacher, teacher_miou = train_teacher(
            cfg0, dataset, streams.teacher_init, streams.teacher_batches
        )
        cache = _TeacherCache(teacher, dataset.train)
        results[seed] = {}
        for name, terms in variants.items():
            cfg = dataclasses.replace(cfg0, loss_terms=list(terms))
            results[seed][name] = run_experiment(
                cfg, prepared=(dataset, teacher, teacher_miou, cache)
            )
    return results
