"""
Seed Derivation Module untuk SCALE-I
====================================
Modul ini berisi turunan seed. Semua randomness berasal dari satu root seed
yang dipecah per counter (root, trial, stage) lewat
``numpy.random.SeedSequence``. Tidak ada modul yang menyentuh state
generator global.
"""

import numpy as np

# COUNTER STAGE

STAGE_GRAPH = 0
STAGE_SCM = 1
STAGE_MIXING = 2
STAGE_ENVIRONMENTS = 3
STAGE_SAMPLES = 4
STAGE_AUDIT = 5
STAGE_REFINE = 6


def derive_seed(root: int, *keys: int) -> int:
    """
    Turunkan child seed 32-bit dari root seed dan counter integer.

    Args:
        root: root seed
        *keys: counter seperti (trial, stage) atau (stage, environment)

    Returns:
        Seed integer non-negatif, stabil di semua platform
    """
    sequence = np.random.SeedSequence([int(root), *(int(k) for k in keys)])
    return int(sequence.generate_state(1, dtype=np.uint32)[0])


def make_rng(root: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(root), *(int(k) for k in keys)]))
