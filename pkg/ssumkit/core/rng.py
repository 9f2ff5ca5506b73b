from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RngStream:
    """
    A reproducible random stream identified by (seed, stream id).

    Streams are derived with numpy's SeedSequence spawn keys and drawn with
    PCG64, so identical (seed, stream) pairs give identical sequences on every
    platform. Children of a stream never overlap with each other or with it.
    """

    seed: int
    stream: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError(
                f"seed must be an unsigned 64-bit integer, got {self.seed}"
            )

    def child(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, self.stream + (int(stream_id),))

    def children(self, n: int) -> list["RngStream"]:
        return [self.child(i) for i in range(n)]

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.stream)
        return np.random.Generator(np.random.PCG64(seq))


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an RngStream or an integer seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return RngStream(int(rng)).generator()
