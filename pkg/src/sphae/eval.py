"""Evaluation: PSNR, clustering, linear probes, few-shot, retrieval."""

from __future__ import annotations

import numpy as np

from . import loss as loss_mod
from .exceptions import DimensionMismatchError
from .rotations import EulerZYZ
from .spectral import S2Signal, rotate_s2_spectrum_arr, s2_analyze_arr, s2_synthesize_arr

PSNR_CAP_DB = 99.0


def psnr_arr(f: np.ndarray, f_hat: np.ndarray, rot: EulerZYZ | None = None) -> float:
    """10 log10(1 / MSE) on unit-peak data; rotates f_hat by `rot` first."""
    if f.shape != f_hat.shape:
        raise DimensionMismatchError(f"psnr: shapes differ {f.shape} vs {f_hat.shape}")
    if rot is not None:
        f_hat = s2_synthesize_arr(rotate_s2_spectrum_arr(s2_analyze_arr(f_hat), rot))
    mse = float(np.mean((f - f_hat) ** 2))
    if mse <= 10.0 ** (-PSNR_CAP_DB / 10.0):
        return PSNR_CAP_DB
    return float(10.0 * np.log10(1.0 / mse))


def psnr(f: S2Signal, f_hat: S2Signal, align: bool = False, b_corr: int | None = None,
         refine: int = 3) -> float:
    """Reconstruction PSNR; align=True first applies the correlation-maximizing
    rotation to f_hat (reconstructions are defined only up to a rotation)."""
    rot = None
    if align:
        rot = loss_mod.align_rotations(f.values[None], f_hat.values[None], b_corr, refine)[0]
    return psnr_arr(f.values, f_hat.values, rot=rot)


# ---------------------------------------------------------------------------
# clustering
# ---------------------------------------------------------------------------


def kmeans(features: np.ndarray, k: int, seed: int = 0, restarts: int = 20) -> np.ndarray:
    """Lloyd's algorithm with k-means++ init, best inertia over restarts."""
    from sklearn.cluster import KMeans

    km = KMeans(n_clusters=k, init="k-means++", n_init=restarts, algorithm="lloyd",
                random_state=seed)
    return km.fit_predict(np.asarray(features, dtype=np.float64))


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0].astype(np.float64)
    p /= p.sum()
    return float(-(p * np.log(p)).sum())


def clustering_metrics(assignments: np.ndarray, labels: np.ndarray) -> dict:
    """Purity, homogeneity, completeness with the 0/0 -> 1 convention."""
    assignments = np.asarray(assignments)
    labels = np.asarray(labels)
    if assignments.shape != labels.shape:
        raise DimensionMismatchError("assignments and labels differ in length")
    n = assignments.size
    ks = np.unique(assignments)
    cs = np.unique(labels)
    cont = np.zeros((ks.size, cs.size))
    for i, kk in enumerate(ks):
        sub = labels[assignments == kk]
        for j, cc in enumerate(cs):
            cont[i, j] = np.sum(sub == cc)
    purity = float(cont.max(axis=1).sum() / n)
    h_class = _entropy(cont.sum(axis=0))
    h_clust = _entropy(cont.sum(axis=1))
    # conditional entropies
    h_class_given_clust = 0.0
    h_clust_given_class = 0.0
    for i in range(ks.size):
        h_class_given_clust += (cont[i].sum() / n) * _entropy(cont[i])
    for j in range(cs.size):
        h_clust_given_class += (cont[:, j].sum() / n) * _entropy(cont[:, j])
    homogeneity = 1.0 if h_class == 0.0 else 1.0 - h_class_given_clust / h_class
    completeness = 1.0 if h_clust == 0.0 else 1.0 - h_clust_given_class / h_clust
    return {"purity": purity, "homogeneity": homogeneity, "completeness": completeness}


# ---------------------------------------------------------------------------
# linear probe and few-shot protocol
# ---------------------------------------------------------------------------


def _probe_fit(feats: np.ndarray, labels: np.ndarray, n_classes: int,
               steps: int = 500, lr: float = 0.05):
    """Full-batch Adam softmax regression on standardized features."""
    from .train import AdamState, adam_step

    mu = feats.mean(axis=0)
    sd = feats.std(axis=0) + 1e-8
    x = (feats - mu) / sd
    params = {"W": np.zeros((n_classes, x.shape[1])), "b": np.zeros(n_classes)}
    state = AdamState()
    for _ in range(steps):
        logits = x @ params["W"].T + params["b"]
        losses, g = loss_mod.softmax_cross_entropy(logits, labels)
        g /= x.shape[0]
        grads = {"W": g.T @ x, "b": g.sum(axis=0)}
        adam_step(params, grads, state, lr=lr)
    return params, mu, sd


def linear_probe(train_feats: np.ndarray, train_labels: np.ndarray,
                 test_feats: np.ndarray, test_labels: np.ndarray,
                 steps: int = 500, lr: float = 0.05) -> float:
    """Accuracy of a single-layer softmax classifier on frozen features."""
    classes = np.unique(train_labels)
    remap = {c: i for i, c in enumerate(classes)}
    ytr = np.array([remap[c] for c in train_labels])
    params, mu, sd = _probe_fit(np.asarray(train_feats, float), ytr, classes.size, steps, lr)
    logits = ((np.asarray(test_feats, float) - mu) / sd) @ params["W"].T + params["b"]
    pred = classes[np.argmax(logits, axis=1)]
    return float(np.mean(pred == np.asarray(test_labels)))


def stratified_fraction(labels: np.ndarray, percent: float, seed: int) -> np.ndarray:
    """Indices of a stratified subsample keeping >= 1 example per class."""
    rng = np.random.default_rng(seed)
    keep = []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        n = max(1, int(round(idx.size * percent / 100.0)))
        keep.append(rng.choice(idx, size=min(n, idx.size), replace=False))
    return np.sort(np.concatenate(keep))


def few_shot_eval(train_feats: np.ndarray, train_labels: np.ndarray,
                  test_feats: np.ndarray, test_labels: np.ndarray,
                  fractions=(1, 2, 5, 10, 100), seed: int = 0) -> dict:
    """Probe accuracy per labeled-fraction percentage."""
    out = {}
    for frac in fractions:
        idx = stratified_fraction(np.asarray(train_labels), frac, seed)
        out[frac] = linear_probe(
            np.asarray(train_feats)[idx], np.asarray(train_labels)[idx], test_feats, test_labels
        )
    return out


# ---------------------------------------------------------------------------
# nearest-neighbor retrieval
# ---------------------------------------------------------------------------


def nn_retrieval(query_feats: np.ndarray, gallery_feats: np.ndarray,
                 gallery_labels: np.ndarray, k: int = 1,
                 query_labels: np.ndarray | None = None) -> float:
    """Cosine k-NN label precision@k (query labels default to gallery labels)."""
    q = np.asarray(query_feats, dtype=np.float64)
    g = np.asarray(gallery_feats, dtype=np.float64)
    if query_labels is None:
        if q.shape[0] != len(gallery_labels):
            raise DimensionMismatchError("query_labels required when queries differ from gallery")
        query_labels = gallery_labels
    qn = q / (np.linalg.norm(q, axis=1, keepdims=True) + 1e-12)
    gn = g / (np.linalg.norm(g, axis=1, keepdims=True) + 1e-12)
    sims = qn @ gn.T
    topk = np.argsort(-sims, axis=1, kind="stable")[:, :k]
    hits = np.asarray(gallery_labels)[topk] == np.asarray(query_labels)[:, None]
    return float(hits.mean())
