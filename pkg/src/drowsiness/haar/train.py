"""Desk-scale discrete AdaBoost over decision stumps, and cascade bootstrapping."""

from __future__ import annotations

import logging
from typing import Callable, Sequence

import numpy as np

from ..imaging import as_gray, integral
from .cascade import Cascade, Stage, Stump
from .features import HaarFeature, feature_values

log = logging.getLogger(__name__)

# vote weight used when a stump separates the weighted sample perfectly
MIN_ERROR = 1e-10


class TrainingError(RuntimeError):
    pass


def _stack_integrals(samples: Sequence[np.ndarray], base_w: int, base_h: int) -> np.ndarray:
    iis = np.empty((len(samples), base_h + 1, base_w + 1), dtype=np.int64)
    for i, s in enumerate(samples):
        s = as_gray(s)
        if s.shape != (base_h, base_w):
            raise ValueError(f"sample {i} is {s.shape[1]}x{s.shape[0]}, expected {base_w}x{base_h}")
        iis[i] = integral(s)
    return iis


def _value_matrix(iis: np.ndarray, pool: Sequence[HaarFeature]) -> np.ndarray:
    vals = np.empty((iis.shape[0], len(pool)))
    for j, f in enumerate(pool):
        vals[:, j] = feature_values(iis, f)
    return vals


def _best_stumps(sorted_vals, order, weights, labels):
    """Lowest weighted error per feature over all thresholds and both polarities."""
    n, _ = sorted_vals.shape
    w_sorted = weights[order]
    pos_sorted = labels[order] > 0
    wp = np.vstack([np.zeros((1, w_sorted.shape[1])), np.cumsum(np.where(pos_sorted, w_sorted, 0.0), axis=0)])
    wn = np.vstack([np.zeros((1, w_sorted.shape[1])), np.cumsum(np.where(pos_sorted, 0.0, w_sorted), axis=0)])
    tp, tn = wp[-1], wn[-1]
    # split i puts sorted[:i] below the threshold
    err_pos = (tp - wp) + wn  # positive predicted when value < threshold
    err_neg = wp + (tn - wn)  # positive predicted when value > threshold
    valid = np.ones_like(err_pos, dtype=bool)
    valid[1:n] = sorted_vals[1:] > sorted_vals[:-1]
    err_pos = np.where(valid, err_pos, np.inf)
    err_neg = np.where(valid, err_neg, np.inf)
    return err_pos, err_neg


def _threshold_at(col_sorted: np.ndarray, split: int) -> float:
    n = col_sorted.size
    if split == 0:
        return float(col_sorted[0] - 1.0)
    if split == n:
        return float(col_sorted[-1] + 1.0)
    return float((col_sorted[split - 1] + col_sorted[split]) / 2.0)


def train_stage(
    positives: Sequence[np.ndarray],
    negatives: Sequence[np.ndarray],
    feature_pool: Sequence[HaarFeature],
    rounds: int,
    history: list | None = None,
) -> Stage:
    """Boost ``rounds`` stumps and set the stage threshold to pass every positive.

    If ``history`` is a list, one dict per round is appended with the chosen
    feature index, its weighted error and the sample weights after
    reweighting.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    if not positives:
        raise TrainingError("no positive samples")
    if not negatives:
        raise TrainingError("no negative samples")
    if not feature_pool:
        raise TrainingError("empty feature pool")
    bh, bw = as_gray(positives[0]).shape
    iis = _stack_integrals(list(positives) + list(negatives), bw, bh)
    vals = _value_matrix(iis, feature_pool)
    n_pos = len(positives)
    labels = np.r_[np.ones(n_pos), -np.ones(len(negatives))]
    weights = np.where(labels > 0, 0.5 / n_pos, 0.5 / len(negatives))
    order = np.argsort(vals, axis=0, kind="stable")
    sorted_vals = np.take_along_axis(vals, order, axis=0)

    stumps: list[Stump] = []
    fired = []
    for t in range(rounds):
        err_pos, err_neg = _best_stumps(sorted_vals, order, weights, labels)
        best_pos = np.unravel_index(np.argmin(err_pos), err_pos.shape)
        best_neg = np.unravel_index(np.argmin(err_neg), err_neg.shape)
        if err_pos[best_pos] <= err_neg[best_neg]:
            (split, j), polarity, eps = best_pos, 1, float(err_pos[best_pos])
        else:
            (split, j), polarity, eps = best_neg, -1, float(err_neg[best_neg])
        if eps >= 0.5 - 1e-12:
            if t == 0:
                raise TrainingError("no feature in the pool beats chance on the weighted sample")
            log.info("round %d: best error %.4f, stopping", t, eps)
            break
        threshold = _threshold_at(sorted_vals[:, j], split)
        eps_c = max(eps, MIN_ERROR)
        alpha = 0.5 * np.log((1.0 - eps_c) / eps_c)
        stump = Stump(feature_pool[j], threshold, polarity, float(alpha))
        h = stump.fires(vals[:, j])
        stumps.append(stump)
        fired.append(h)
        signed = np.where(h, 1.0, -1.0)
        weights = weights * np.exp(-alpha * labels * signed)
        weights /= weights.sum()
        if history is not None:
            history.append({"round": t, "feature": int(j), "error": eps, "alpha": float(alpha), "weights": weights.copy()})
        log.debug("round %d: feature %d error %.4f alpha %.3f", t, j, eps, alpha)
        if eps <= 0.0:
            break

    votes = np.zeros(len(labels))
    for s, h in zip(stumps, fired):
        votes += np.where(h, s.vote, 0.0)
    # pass every training positive, with slack for summation order
    threshold = float(votes[:n_pos].min()) - 1e-9
    return Stage(tuple(stumps), threshold)


def stage_pass(stage: Stage, iis: np.ndarray) -> np.ndarray:
    votes = np.zeros(iis.shape[0])
    for s in stage.stumps:
        votes += np.where(s.fires(feature_values(iis, s.feature)), s.vote, 0.0)
    return votes >= stage.threshold


def build_cascade(
    positives: Sequence[np.ndarray],
    negatives: Sequence[np.ndarray],
    feature_pool: Sequence[HaarFeature],
    stage_specs: Sequence[int],
    refill: Callable[[Cascade | None, int], list] | None = None,
    min_negatives: int = 0,
) -> Cascade:
    """Train stages in sequence, each on the negatives the previous ones let through.

    ``refill(partial_cascade, n)``, when given, is asked for up to ``n`` fresh
    negatives that the partial cascade (``None`` before the first stage)
    still accepts whenever fewer than ``min_negatives`` survive.
    """
    if not positives:
        raise TrainingError("no positive samples")
    if not stage_specs:
        raise ValueError("need at least one stage spec")
    bh, bw = as_gray(positives[0]).shape
    neg = list(negatives)
    stages: list[Stage] = []
    for k, rounds in enumerate(stage_specs):
        if refill is not None and len(neg) < min_negatives:
            partial = Cascade(bw, bh, tuple(stages), False) if stages else None
            neg += refill(partial, min_negatives - len(neg))
        if not neg:
            log.info("no negatives survive after %d stages; stopping", k)
            break
        stage = train_stage(positives, neg, feature_pool, rounds)
        stages.append(stage)
        keep = stage_pass(stage, _stack_integrals(neg, bw, bh))
        neg = [s for s, kp in zip(neg, keep) if kp]
        log.info("stage %d: %d stumps, %d negatives survive", k, len(stage.stumps), len(neg))
    if not stages:
        raise TrainingError("no negative samples")
    return Cascade(bw, bh, tuple(stages), False)
