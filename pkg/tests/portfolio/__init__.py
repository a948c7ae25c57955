import math

import numpy as np

from ecitarget.effort import Candidate, EffortMatrix


def random_effort(rng: np.random.Generator, n_candidates: int,
                  location: str = 'c') -> EffortMatrix:
    """
    A random effort matrix with a few unreachable candidates and, rarely,
    free ones.
    """

    n_baseline = int(rng.integers(1, 6))
    baseline = {f"b{i}": float(rng.normal(0.0, 1.0))
                for i in range(n_baseline)}
    candidates = []
    for i in range(n_candidates):
        draw = rng.random()
        if draw < 0.05:
            w = math.inf
        elif draw < 0.08:
            w = 0.0
        else:
            w = float(rng.exponential(1.0))
        candidates.append(Candidate(f"p{i:02d}", w,
                                    float(rng.normal(0.3, 1.0)),
                                    omega=float(rng.random()),
                                    omega_rel=float(rng.normal(0.0, 0.1))))

    return EffortMatrix.build(location, candidates, baseline)


def effort_of(candidates, baseline_pci, location='c'):
    """
    Builds an effort matrix from (id, w, pci) or (id, w, pci, omega)
    tuples.
    """

    built = [Candidate(c[0], c[1], c[2],
                       omega=c[3] if len(c) > 3 else 0.0)
             for c in candidates]
    baseline = {f"base{i}": pci for i, pci in enumerate(baseline_pci)}
    return EffortMatrix.build(location, built, baseline)
