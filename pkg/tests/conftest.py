"""Shared generators for randomized-instance tests."""

import numpy as np

from dispersal import CongestionPolicy, GameInstance, Strategy, ValueProfile


def log_uniform_profile(rng, sites, low=0.05, high=1.0):
    values = np.exp(rng.uniform(np.log(low), np.log(high), sites))
    return ValueProfile(tuple(values))


def random_exclusive_instance(rng, max_sites=20, max_players=8, low=0.05):
    sites = int(rng.integers(1, max_sites + 1))
    players = int(rng.integers(2, max_players + 1))
    profile = log_uniform_profile(rng, sites, low=low)
    return GameInstance(profile, players, CongestionPolicy.exclusive())


def random_strategy(rng, sites):
    return Strategy.from_array(rng.dirichlet(np.ones(sites)))


def random_nonexclusive_table(rng, players):
    """Non-increasing congestion table with a non-zero collision weight."""
    entries = [1.0, float(rng.uniform(0.2, 0.9))]
    for _ in range(players - 2):
        entries.append(entries[-1] - float(rng.uniform(0.0, 0.3)))
    return CongestionPolicy.from_table(entries[:players])
