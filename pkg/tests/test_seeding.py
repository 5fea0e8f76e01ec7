import pytest

from app.lab.seeding import mix, replicate_seed, rng_for


class TestMix:
    def test_matches_splitmix64_stream(self):
        # first two outputs of splitmix64 started from state 0
        assert mix(0, 0) == 0xE220A8397B1DCDAF
        assert mix(0, 1) == 0x6E789E6AA1B965F4

    def test_fits_in_64_bits(self):
        for r in range(100):
            assert 0 <= mix(2**64 - 1, r) < 2**64

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            mix(-1, 0)


def test_replicate_seeds_are_distinct():
    seeds = {replicate_seed(7, n, r) for n in (100, 200, 400, 800) for r in range(50)}
    assert len(seeds) == 200


def test_streams_are_independent_of_the_plain_generator():
    plain = rng_for(11).standard_normal(5)
    again = rng_for(11).standard_normal(5)
    other = rng_for(11, stream=3).standard_normal(5)
    assert (plain == again).all()
    assert not (plain == other).any()
