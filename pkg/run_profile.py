#!/usr/bin/env python

from cProfile import Profile
import pstats

import numpy as np

from ihgnn.graph import Dataset, Graph
from ihgnn.harness import make_folds, train_fold
from ihgnn.model import IHGNNConfig

N = 200

rng = np.random.default_rng(0)
graphs = [Graph.random(int(rng.integers(10, 30)), 0.2, 4, rng) for _ in range(N)]
d = Dataset("RANDOM", graphs, [i % 2 for i in range(N)], label_alphabet=range(4))

config = IHGNNConfig(epochs=1)
# config = config.replace(deterministic=True)
plan = make_folds(d, config.seed)

with Profile() as pr:
    train_fold(d, plan, 0, config)

stats = pstats.Stats(pr)
stats.sort_stats(pstats.SortKey.TIME)
stats.print_stats(20)
stats.dump_stats(filename="profile.prof")
