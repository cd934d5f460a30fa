"""Built-in numerical self-checks behind the ``selftest`` CLI verb.

Fast, dependency-free spot checks of the load-bearing math: the smooth
objective against exact average precision at a tiny smoothing width,
every analytic gradient against central finite differences, and the
hand-derivable batch cases.  Meant as a smoke test after install; the
full test suite covers the same ground at larger sample counts.
"""

from __future__ import annotations

import numpy as np

from .contrastive import ContrastiveConfig, info_nce_loss
from .encoder import EncoderConfig, backward, forward, init_params
from .ranking import SmoothingConfig, batch_smooth_ap_loss, exact_ap, smooth_ap, smooth_ap_grad
from .similarity import backprop_similarity, cosine_similarity_matrix

__all__ = ["run_selftest", "CheckResult"]

FD_EPS = 1e-6
GRAD_TOL = 1e-4


class CheckResult(tuple):
    """(name, ok, detail) triple with a readable render."""

    def __new__(cls, name: str, ok: bool, detail: str):
        return super().__new__(cls, (name, ok, detail))

    def __str__(self) -> str:
        name, ok, detail = self
        return f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"


def _margin_scores(rng: np.random.Generator, m: int) -> np.ndarray:
    """Scores on a 0.01 grid: pairwise margins >= 1e-2 by construction."""
    return rng.choice(np.arange(100) / 100.0, size=m, replace=False)


def _random_mask(rng: np.random.Generator, m: int) -> np.ndarray:
    mask = np.zeros(m, dtype=bool)
    n_pos = int(rng.integers(1, m))
    mask[rng.choice(m, size=n_pos, replace=False)] = True
    return mask


def _rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), 1e-12)
    return float(np.max(np.abs(analytic - numeric)) / denom)


def _fd_grad(fn, x: np.ndarray, eps: float = FD_EPS) -> np.ndarray:
    g = np.zeros_like(x, dtype=np.float64)
    flat = g.reshape(-1)
    xf = x.reshape(-1)
    for i in range(xf.size):
        orig = xf[i]
        xf[i] = orig + eps
        hi = fn(x)
        xf[i] = orig - eps
        lo = fn(x)
        xf[i] = orig
        flat[i] = (hi - lo) / (2 * eps)
    return g


def _check_oracle_equivalence(rng, trials=200) -> CheckResult:
    cfg = SmoothingConfig(tau=1e-6)
    worst = 0.0
    for _ in range(trials):
        m = int(rng.integers(4, 65))
        scores = _margin_scores(rng, m)
        mask = _random_mask(rng, m)
        worst = max(worst, abs(smooth_ap(scores, mask, cfg) - exact_ap(scores, mask)))
    return CheckResult(
        "smooth objective matches exact AP at tau=1e-6",
        worst <= 1e-4,
        f"max |smooth - exact| = {worst:.2e} over {trials} instances",
    )


def _check_smooth_ap_grad(rng, trials=20) -> CheckResult:
    cfg = SmoothingConfig(tau=0.05)
    worst = 0.0
    for _ in range(trials):
        m = int(rng.integers(4, 17))
        scores = rng.normal(size=m)
        mask = _random_mask(rng, m)
        analytic = smooth_ap_grad(scores, mask, cfg)
        numeric = _fd_grad(lambda s: smooth_ap(s, mask, cfg), scores.copy())
        worst = max(worst, _rel_err(analytic, numeric))
    return CheckResult(
        "smooth AP gradient matches finite differences",
        worst <= GRAD_TOL,
        f"max relative error = {worst:.2e} over {trials} instances",
    )


def _check_similarity_backprop(rng, trials=10) -> CheckResult:
    worst = 0.0
    for _ in range(trials):
        n, d = int(rng.integers(3, 7)), int(rng.integers(2, 6))
        vec = rng.normal(size=(n, d))
        coeff = rng.normal(size=(n, n))

        def loss(v):
            return float(np.sum(coeff * cosine_similarity_matrix(v)))

        analytic = backprop_similarity(vec, coeff)
        numeric = _fd_grad(loss, vec.copy())
        worst = max(worst, _rel_err(analytic, numeric))
    return CheckResult(
        "cosine-similarity backprop matches finite differences",
        worst <= GRAD_TOL,
        f"max relative error = {worst:.2e} over {trials} instances",
    )


def _check_encoder_backward(rng, trials=5) -> CheckResult:
    worst = 0.0
    for t in range(trials):
        cfg = EncoderConfig(
            input_dim=5, hidden_dims=(7,), rep_dim=4, proj_hidden_dim=6, proj_out_dim=3, seed=t
        )
        params = init_params(cfg, dtype=np.float64)
        x = rng.normal(size=(4, cfg.input_dim))
        coeff = rng.normal(size=(4, cfg.proj_out_dim))

        _, _, cache = forward(params, x)
        grad_w, grad_b = backward(params, cache, coeff)

        # _fd_grad perturbs the parameter array in place, so the closure can
        # ignore its argument and just rerun the forward pass.
        def loss_now(_arr):
            return float(np.sum(coeff * forward(params, x)[1]))

        for li in range(len(params.weights)):
            numeric = _fd_grad(loss_now, params.weights[li])
            worst = max(worst, _rel_err(grad_w[li], numeric))
            numeric_b = _fd_grad(loss_now, params.biases[li])
            worst = max(worst, _rel_err(grad_b[li], numeric_b))
    return CheckResult(
        "encoder backward matches finite differences",
        worst <= GRAD_TOL,
        f"max relative error = {worst:.2e} over {trials} networks",
    )


def _check_info_nce(rng, trials=10) -> CheckResult:
    groups = np.repeat(np.arange(2), 2)
    hand = info_nce_loss(np.ones((4, 4)), groups).loss
    if abs(hand - np.log(3.0)) > 1e-9:
        return CheckResult("contrastive loss and gradient", False,
                           f"all-equal case gave {hand}, expected ln 3")
    worst = 0.0
    cfg = ContrastiveConfig(temperature=0.5)
    for _ in range(trials):
        b, k = int(rng.integers(2, 4)), 2
        n, d = b * k, 5
        grp = np.repeat(np.arange(b), k)
        vec = rng.normal(size=(n, d))

        def loss(v):
            return info_nce_loss(cosine_similarity_matrix(v), grp, cfg).loss

        g_sim = info_nce_loss(cosine_similarity_matrix(vec), grp, cfg).grad_wrt_similarities
        analytic = backprop_similarity(vec, g_sim)
        numeric = _fd_grad(loss, vec.copy())
        worst = max(worst, _rel_err(analytic, numeric))
    return CheckResult(
        "contrastive loss and gradient",
        worst <= GRAD_TOL,
        f"ln-3 case exact; max relative error = {worst:.2e} over {trials} instances",
    )


def _check_batch_hand_cases(rng) -> CheckResult:
    groups = np.repeat(np.arange(2), 2)
    tied = batch_smooth_ap_loss(np.ones((4, 4)), groups, SmoothingConfig(tau=0.01)).loss
    if abs(tied - 0.5) > 1e-9:
        return CheckResult("hand-derived batch cases", False,
                           f"identical-representation loss {tied}, expected 0.5")
    vec = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
    sep = batch_smooth_ap_loss(cosine_similarity_matrix(vec), groups, SmoothingConfig(tau=0.01)).loss
    if sep > 1e-4:
        return CheckResult("hand-derived batch cases", False,
                           f"perfect-separation loss {sep}, expected <= 1e-4")
    return CheckResult("hand-derived batch cases", True,
                       f"ties -> 0.5 exactly; perfect separation -> {sep:.2e}")


def run_selftest(seed: int = 0, verbose: bool = True) -> list[CheckResult]:
    """Run every check; print one line each when verbose."""
    rng = np.random.default_rng(seed)
    checks = [
        _check_oracle_equivalence(rng),
        _check_smooth_ap_grad(rng),
        _check_similarity_backprop(rng),
        _check_encoder_backward(rng),
        _check_info_nce(rng),
        _check_batch_hand_cases(rng),
    ]
    if verbose:
        for c in checks:
            print(c)
    return checks
