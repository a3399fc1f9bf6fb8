"""Deterministic random streams.

Every random draw in the package comes from a Philox counter-based generator
keyed by ``(seed, stream, *indices)``. Work is split into fixed-size chunks,
each with its own substream, so results do not depend on how many workers
process the chunks or in which order they finish.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

# Stream tags keep unrelated consumers of one user seed independent.
SPHERE = 1
SUBLEVEL = 2
F_INTEGRAL = 3
DOUBLE_INTEGRAL = 4
REARRANGE = 5
PERTURB_U = 6
PERTURB_TRIAL = 7
FAMILY_LAMBDA = 8
RANDOM_MAPS = 9

CHUNK = 1 << 16


def substream(seed, *keys):
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, *(int(k) for k in keys)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def derive_seed(seed, *keys):
    """A 63-bit integer seed derived from a parent seed and keys."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, *(int(k) for k in keys)]
    hi, lo = np.random.SeedSequence(entropy).generate_state(2)
    return ((int(hi) << 32) | int(lo)) & 0x7FFFFFFFFFFFFFFF


def chunk_sizes(total, chunk=CHUNK):
    full, rest = divmod(int(total), chunk)
    return [chunk] * full + ([rest] if rest else [])


def map_chunks(fn, seed, stream, total, workers=1, chunk=CHUNK):
    """Apply ``fn(rng, size, index)`` to every chunk; results in chunk order."""
    sizes = chunk_sizes(total, chunk)
    jobs = [(substream(seed, stream, i), m, i) for i, m in enumerate(sizes)]
    if workers is None or workers <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))
