"""Covariance matrix adaptation evolution strategy for box-bounded minimization.

Standard (mu/mu_w, lambda) formulation: weighted recombination of the best
half of each generation, rank-one plus rank-mu covariance updates, and
cumulative step-size adaptation. Bounds are enforced by resampling (up to
100 draws per candidate) followed by coordinate-wise clamping.

Candidate evaluations within a generation are independent; pass ``map_fn``
(e.g. an executor map) to run them concurrently. Results are consumed in
candidate order, so the optimizer trajectory for a fixed seed is identical
regardless of evaluation concurrency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SIGMA_COLLAPSE = 1e-12
RESAMPLE_TRIES = 100


@dataclass
class CmaesConfig:
    x0: np.ndarray                    # initial mean
    sigma0: float | np.ndarray        # initial step size, scalar or per-coordinate
    bounds: np.ndarray                # (n, 2) box, finite, lower < upper
    popsize: int | None = None        # default 4 + floor(3 ln n)
    max_evals: int = 20000
    target_loss: float | None = None
    seed: int = 0

    def validated(self) -> "CmaesConfig":
        x0 = np.asarray(self.x0, dtype=float)
        n = len(x0)
        bounds = np.asarray(self.bounds, dtype=float)
        if bounds.shape != (n, 2):
            raise ValueError(f"bounds must have shape ({n}, 2), got {bounds.shape}")
        if not np.all(np.isfinite(bounds)):
            raise ValueError("bounds must be finite")
        if not np.all(bounds[:, 0] < bounds[:, 1]):
            raise ValueError("each lower bound must be below its upper bound")
        popsize = self.popsize if self.popsize is not None else 4 + int(3 * math.log(n))
        if popsize < 4:
            raise ValueError(f"population size must be >= 4, got {popsize}")
        if self.max_evals < popsize:
            raise ValueError(f"max_evals {self.max_evals} cannot fit one generation of {popsize}")
        return CmaesConfig(
            x0=x0,
            sigma0=self.sigma0,
            bounds=bounds,
            popsize=popsize,
            max_evals=self.max_evals,
            target_loss=self.target_loss,
            seed=self.seed,
        )


@dataclass
class CmaesResult:
    x: np.ndarray
    loss: float
    n_evals: int
    generations: int
    history: list[float] = field(default_factory=list)  # best-so-far per generation
    stop: str = ""


def cmaes_minimize(loss, config: CmaesConfig, map_fn=None) -> CmaesResult:
    """Minimize a scalar function over a box.

    ``loss`` takes a 1-d float array and returns a float; it must be pure.
    ``map_fn(loss, candidates)`` may evaluate a generation concurrently and
    must return losses in candidate order (default: builtin map).
    """
    cfg = config.validated()
    n = len(cfg.x0)
    lam = cfg.popsize
    rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.bounds[:, 0], cfg.bounds[:, 1]

    sigma0 = np.asarray(cfg.sigma0, dtype=float)
    if sigma0.ndim == 0:
        sigma = float(sigma0)
        C = np.eye(n)
    else:
        if sigma0.shape != (n,):
            raise ValueError(f"per-coordinate sigma0 must have shape ({n},)")
        sigma = float(np.exp(np.mean(np.log(sigma0))))
        C = np.diag((sigma0 / sigma) ** 2)
    if not sigma > 0:
        raise ValueError(f"sigma0 must be positive, got {sigma}")

    mu = lam // 2
    raw_w = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    weights = raw_w / raw_w.sum()
    mueff = 1.0 / np.sum(weights**2)
    cc = (4.0 + mueff / n) / (n + 4.0 + 2.0 * mueff / n)
    cs = (mueff + 2.0) / (n + mueff + 5.0)
    c1 = 2.0 / ((n + 1.3) ** 2 + mueff)
    cmu = min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((n + 2.0) ** 2 + mueff))
    damps = 1.0 + 2.0 * max(0.0, math.sqrt((mueff - 1.0) / (n + 1.0)) - 1.0) + cs
    chi_n = math.sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n))

    mean = np.clip(cfg.x0, lo, hi).astype(float)
    pc = np.zeros(n)
    ps = np.zeros(n)
    best_x = mean.copy()
    best_loss = math.inf
    n_evals = 0
    history: list[float] = []
    stop = "max_evals"
    mapper = map_fn if map_fn is not None else map

    gen = 0
    while n_evals + lam <= cfg.max_evals:  # the budget is a hard cap
        gen += 1
        evals, eigvecs = np.linalg.eigh(C)
        # relative floor keeps C invertible once the search collapses onto a
        # noise floor or a subspace
        D = np.sqrt(np.maximum(evals, 1e-14 * max(float(evals.max()), 1e-300)))
        xs = np.empty((lam, n))
        for i in range(lam):
            for _ in range(RESAMPLE_TRIES):
                z = rng.standard_normal(n)
                x = mean + sigma * (eigvecs @ (D * z))
                if np.all(x >= lo) and np.all(x <= hi):
                    break
            xs[i] = np.clip(x, lo, hi)
        losses = np.fromiter(mapper(loss, list(xs)), dtype=float, count=lam)
        if np.any(np.isnan(losses)):
            raise ValueError("loss returned NaN; wrap divergence in a finite sentinel")
        n_evals += lam

        order = np.argsort(losses, kind="stable")
        if losses[order[0]] < best_loss:
            best_loss = float(losses[order[0]])
            best_x = xs[order[0]].copy()
        history.append(best_loss)
        if cfg.target_loss is not None and best_loss <= cfg.target_loss:
            stop = "target_loss"
            break

        selected = xs[order[:mu]]
        y_sel = (selected - mean) / sigma
        y_mean = weights @ y_sel
        mean = mean + sigma * y_mean

        inv_sqrt_c = eigvecs @ ((eigvecs / D).T)
        ps = (1.0 - cs) * ps + math.sqrt(cs * (2.0 - cs) * mueff) * (inv_sqrt_c @ y_mean)
        ps_norm = float(np.linalg.norm(ps))
        hsig = ps_norm / math.sqrt(1.0 - (1.0 - cs) ** (2 * gen)) / chi_n < 1.4 + 2.0 / (n + 1.0)
        pc = (1.0 - cc) * pc + (math.sqrt(cc * (2.0 - cc) * mueff) * y_mean if hsig else 0.0)

        rank_mu = (y_sel.T * weights) @ y_sel
        C = (
            (1.0 - c1 - cmu) * C
            + c1 * (np.outer(pc, pc) + (0.0 if hsig else cc * (2.0 - cc)) * C)
            + cmu * rank_mu
        )
        C = 0.5 * (C + C.T)
        # exponent cap is the standard divergence guard
        sigma *= math.exp(min(1.0, (cs / damps) * (ps_norm / chi_n - 1.0)))
        if sigma < SIGMA_COLLAPSE:
            stop = "sigma_collapse"
            break

    return CmaesResult(
        x=best_x,
        loss=best_loss,
        n_evals=n_evals,
        generations=gen,
        history=history,
        stop=stop,
    )
