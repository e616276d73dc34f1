"""Slow, obviously-correct reference implementations used as test oracles.

None of these call into the code under test beyond plain data types.
"""

from __future__ import annotations

import math

import numpy as np

WEIGHTS = np.array([0.0448, 0.2856, 0.3001, 0.2363, 0.1333])


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    r = np.arange(size) - size // 2
    g = np.exp(-(r[:, None] ** 2 + r[None, :] ** 2) / (2 * sigma**2))
    return g / g.sum()


def ssim_terms(a: np.ndarray, b: np.ndarray, L: float = 255.0) -> tuple[float, float]:
    """Direct summation over the 121 window offsets; returns (mean ssim, mean cs)."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    w = gaussian_window()
    k = w.shape[0]
    H, W = a.shape[0] - k + 1, a.shape[1] - k + 1
    mu_a = np.zeros((H, W))
    mu_b = np.zeros((H, W))
    for u in range(k):
        for v in range(k):
            mu_a += w[u, v] * a[u:u + H, v:v + W]
            mu_b += w[u, v] * b[u:u + H, v:v + W]
    va = np.zeros((H, W))
    vb = np.zeros((H, W))
    cab = np.zeros((H, W))
    for u in range(k):
        for v in range(k):
            da = a[u:u + H, v:v + W] - mu_a
            db = b[u:u + H, v:v + W] - mu_b
            va += w[u, v] * da * da
            vb += w[u, v] * db * db
            cab += w[u, v] * da * db
    c1, c2 = (0.01 * L) ** 2, (0.03 * L) ** 2
    lum = (2 * mu_a * mu_b + c1) / (mu_a**2 + mu_b**2 + c1)
    cs = (2 * cab + c2) / (va + vb + c2)
    return float(np.mean(lum * cs)), float(np.mean(cs))


def ms_ssim_oracle(a: np.ndarray, b: np.ndarray) -> tuple[float, int]:
    a, b = np.asarray(a, float), np.asarray(b, float)
    side = min(a.shape)
    scales = max(s for s in range(1, 6) if side >= 11 * 2 ** (s - 1))
    w = WEIGHTS[:scales] / WEIGHTS[:scales].sum()
    out = 1.0
    for j in range(scales):
        s, cs = ssim_terms(a, b)
        term = s if j == scales - 1 else cs
        out *= max(term, 0.0) ** w[j]
        h, wd = a.shape[0] // 2, a.shape[1] // 2
        a = a[: 2 * h, : 2 * wd].reshape(h, 2, wd, 2).mean(axis=(1, 3))
        b = b[: 2 * h, : 2 * wd].reshape(h, 2, wd, 2).mean(axis=(1, 3))
    return out, scales


def box_mask(box, size: int) -> np.ndarray:
    m = np.zeros((size, size), dtype=bool)
    x0, y0, x1, y1 = (int(v) for v in box)
    m[y0:y1, x0:x1] = True
    return m


def iou_pixels(a, b, size: int = 64) -> float:
    ma, mb = box_mask(a, size), box_mask(b, size)
    union = int((ma | mb).sum())
    return int((ma & mb).sum()) / union if union else 0.0


def giou_pixels(a, b, size: int = 64) -> float:
    ma, mb = box_mask(a, size), box_mask(b, size)
    union = int((ma | mb).sum())
    enc = box_mask((min(a[0], b[0]), min(a[1], b[1]), max(a[2], b[2]), max(a[3], b[3])), size)
    n_enc = int(enc.sum())
    return int((ma & mb).sum()) / union - (n_enc - union) / n_enc


def dice_pixels(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = sum(bool(x) for x in a.ravel()), sum(bool(x) for x in b.ravel())
    both = sum(bool(x) and bool(y) for x, y in zip(a.ravel(), b.ravel()))
    return 1.0 if na + nb == 0 else 2 * both / (na + nb)


def mann_whitney_auc(scores, labels) -> float:
    s, y = np.asarray(scores, float), np.asarray(labels)
    pos, neg = s[y == 1], s[y == 0]
    wins = 0.0
    for chunk in np.array_split(pos, max(1, len(pos) // 1000)):
        d = chunk[:, None] - neg[None, :]
        wins += float((d > 0).sum()) + 0.5 * float((d == 0).sum())
    return wins / (len(pos) * len(neg))


def youden_scan(scores, labels) -> float:
    s, y = np.asarray(scores, float), np.asarray(labels)
    pos, neg = s[y == 1], s[y == 0]
    best = -math.inf
    for t in np.unique(s):
        best = max(best, float(np.mean(pos >= t) - np.mean(neg >= t)))
    return best


def _greedy(preds, gts, thr):
    """preds: list of (prob, idx, label, box); gts: list of (label, box)."""
    taken = set()
    hits = {}
    for p, i, lab, box in sorted(preds, key=lambda t: (-t[0], t[1])):
        cands = [(iou_float(box, g), -j) for j, (gl, g) in enumerate(gts) if gl == lab and j not in taken]
        if cands:
            v, negj = max(cands)
            if v >= thr:
                taken.add(-negj)
                hits[i] = True
                continue
        hits[i] = False
    return hits


def iou_float(a, b) -> float:
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / ((a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter)


def ap_enumeration(studies, label, thr=0.5) -> float:
    """AP for one class by enumerating every rank cutoff.

    ``studies``: list of (preds, gts) with preds (prob, label, box) and gts
    (label, box). At each cutoff k the top-k pooled predictions are matched
    from scratch; AP sums recall gains times the best precision at any
    deeper cutoff.
    """
    pooled = []
    for si, (preds, _) in enumerate(studies):
        for pi, (p, lab, box) in enumerate(preds):
            if lab == label:
                pooled.append((-p, si, pi))
    pooled.sort()
    n_gt = sum(1 for _, gts in studies for gl, _ in gts if gl == label)
    prec, rec = [], []
    for k in range(1, len(pooled) + 1):
        top = set((si, pi) for _, si, pi in pooled[:k])
        tp = 0
        for si, (preds, gts) in enumerate(studies):
            chosen = [(p, pi, lab, box) for pi, (p, lab, box) in enumerate(preds) if (si, pi) in top]
            tp += sum(_greedy(chosen, gts, thr).values())
        prec.append(tp / k)
        rec.append(tp / n_gt)
    ap, last = 0.0, 0.0
    for k in range(len(rec)):
        if rec[k] > last:
            ap += (rec[k] - last) * max(prec[k:])
            last = rec[k]
    return ap
