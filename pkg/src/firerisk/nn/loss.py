"""Quadratic weighted-kappa loss over softmax outputs.

    loss = sum_ij W_ij O_ij / sum_ij W_ij E_ij,   W_ij = (i - j)^2 / (C - 1)^2

with O the soft confusion matrix (O_ij = sum_n [y_n = i] p_n(j)) and E the
outer product of the label histogram and the mean predicted distribution,
scaled to the batch. Uniform predictions give O = E and a loss of 1.
"""

from __future__ import annotations

import numpy as np

DENOM_EPS = 1e-12


def _weights(n_classes: int) -> np.ndarray:
    idx = np.arange(n_classes)
    return (idx[:, None] - idx[None, :]) ** 2 / float((n_classes - 1) ** 2)


def _check(probs: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=int)
    if probs.ndim != 2 or labels.shape != (probs.shape[0],):
        raise ValueError("probs must be (B, C) and labels (B,)")
    if np.any(labels < 0) or np.any(labels >= probs.shape[1]):
        raise ValueError("label outside the class range")
    return probs, labels


def wk_loss_parts(probs: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """Numerator and denominator of the loss ratio."""
    probs, labels = _check(probs, labels)
    w = _weights(probs.shape[1])
    num = float(np.sum(w[labels] * probs))
    hist = np.bincount(labels, minlength=probs.shape[1]).astype(float)
    pred_mass = probs.sum(axis=0)
    den = float(hist @ w @ pred_mass) / probs.shape[0]
    return num, den


def wk_loss(probs: np.ndarray, labels: np.ndarray) -> float:
    num, den = wk_loss_parts(probs, labels)
    return num / max(den, DENOM_EPS)


def wk_loss_grad(probs: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Loss value and its gradient with respect to ``probs``."""
    probs, labels = _check(probs, labels)
    w = _weights(probs.shape[1])
    num, den = wk_loss_parts(probs, labels)
    hist = np.bincount(labels, minlength=probs.shape[1]).astype(float)
    dnum = w[labels]
    dden = np.broadcast_to((hist @ w) / probs.shape[0], probs.shape)
    if den <= DENOM_EPS:
        return num / DENOM_EPS, dnum / DENOM_EPS
    return num / den, (dnum * den - num * dden) / (den * den)
