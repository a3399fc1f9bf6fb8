import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from radonlike import rng as streams


def test_substreams_are_reproducible_and_distinct():
    a = streams.substream(7, streams.SUBLEVEL, 0).random(8)
    b = streams.substream(7, streams.SUBLEVEL, 0).random(8)
    c = streams.substream(7, streams.SUBLEVEL, 1).random(8)
    d = streams.substream(8, streams.SUBLEVEL, 0).random(8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c) and not np.array_equal(a, d)


@given(st.integers(0, 300_000), st.integers(1, 1 << 17))
def test_chunk_sizes_cover_total(total, chunk):
    sizes = streams.chunk_sizes(total, chunk)
    assert sum(sizes) == total
    assert all(0 < s <= chunk for s in sizes)


def test_results_do_not_depend_on_workers():
    fn = lambda gen, size, i: (i, gen.standard_normal(size).sum())
    one = streams.map_chunks(fn, 3, streams.SUBLEVEL, 200_000, workers=1)
    many = streams.map_chunks(fn, 3, streams.SUBLEVEL, 200_000, workers=4)
    assert one == many


def test_derived_seeds_fit_63_bits():
    seeds = {streams.derive_seed(0, streams.PERTURB_TRIAL, i) for i in range(100)}
    assert len(seeds) == 100
    assert all(0 <= s < 2**63 for s in seeds)
