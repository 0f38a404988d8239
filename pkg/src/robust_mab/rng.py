"""Seeded random substreams.

Every random draw in a simulation comes from a generator derived from the
master seed by a fixed mixing rule::

    SeedSequence(master_seed, spawn_key=(trial, purpose, stream, agent))

``purpose`` separates the different kinds of randomness (arm means, sticky
sets, rewards, protocol choices, peer sampling, malicious strategies).
``stream`` separates algorithm variants that must not share protocol
randomness; trial-level draws shared across variants (arm means, sticky sets)
use ``stream = SHARED``. ``agent`` is the agent id, or 0 for trial-level draws.

Because a generator depends only on its key, results do not depend on the
order in which trials or agents are processed.
"""

import numpy as np

# purposes
ARMS = 0
STICKY = 1
REWARD = 2
PROTOCOL = 3
GOSSIP = 4
MALICIOUS = 5

SHARED = 0

# stream ids for the built-in variants; custom streams should use ids >= 100
VARIANT_STREAMS = {
    "blocking": 1,
    "no-blocking": 2,
    "no-communication": 3,
    "oracle": 4,
}


def substream(master_seed: int, trial: int, purpose: int, stream: int = SHARED, agent: int = 0) -> np.random.Generator:
    """Return the generator for one (trial, purpose, stream, agent) key."""
    ss = np.random.SeedSequence(int(master_seed) % 2**64, spawn_key=(int(trial), int(purpose), int(stream), int(agent)))
    return np.random.Generator(np.random.PCG64(ss))
