"""NSGA-II operators over integer gene vectors."""

from __future__ import annotations

import numpy as np

from .pareto import crowding_distance, non_dominated_sort


def rank_and_crowding(objectives: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    objectives = np.asarray(objectives, dtype=float)
    n = len(objectives)
    rank = np.zeros(n, dtype=int)
    crowd = np.zeros(n)
    for r, front in enumerate(non_dominated_sort(objectives)):
        rank[front] = r
        crowd[front] = crowding_distance(objectives[front])
    return rank, crowd


def better(i: int, j: int, rank: np.ndarray, crowd: np.ndarray) -> bool:
    """Crowded-comparison operator; ties go to the lower index."""
    if rank[i] != rank[j]:
        return rank[i] < rank[j]
    if crowd[i] != crowd[j]:
        return crowd[i] > crowd[j]
    return i < j


def tournament(rng: np.random.Generator, rank, crowd) -> int:
    i, j = rng.integers(0, len(rank), size=2)
    return int(i) if better(int(i), int(j), rank, crowd) else int(j)


def uniform_crossover(rng: np.random.Generator, a: np.ndarray, b: np.ndarray, p: float = 0.9):
    if rng.random() >= p:
        return a.copy(), b.copy()
    mask = rng.random(len(a)) < 0.5
    return np.where(mask, a, b), np.where(mask, b, a)


def mutate(rng: np.random.Generator, genes: np.ndarray, sizes: np.ndarray, p: float | None = None) -> np.ndarray:
    """Resample each gene with probability ``p`` (default 1/d) to a different value."""
    p = 1.0 / len(genes) if p is None else p
    out = genes.copy()
    for g in range(len(genes)):
        if sizes[g] > 1 and rng.random() < p:
            v = int(rng.integers(0, sizes[g] - 1))
            out[g] = v if v < genes[g] else v + 1
    return out


def select_survivors(objectives: np.ndarray, n: int) -> list[int]:
    """Indices of the ``n`` best rows by front rank, then crowding distance."""
    objectives = np.asarray(objectives, dtype=float)
    chosen: list[int] = []
    for front in non_dominated_sort(objectives):
        if len(chosen) + len(front) <= n:
            chosen.extend(front)
            continue
        crowd = crowding_distance(objectives[front])
        order = sorted(range(len(front)), key=lambda k: (-crowd[k], front[k]))
        chosen.extend(front[k] for k in order[: n - len(chosen)])
        break
    return chosen


__all__ = ["better", "mutate", "rank_and_crowding", "select_survivors", "tournament", "uniform_crossover"]
