"""SGD on a linear objective with true and forward gradients.

Prints the mean per-step objective gain and mean squared step norm of each
oracle, with standard errors: the gains agree while forward steps are about
n times longer.
"""
import argparse
import math

import numpy as np

from fwdgrad.bench import run_path
from fwdgrad.estimators import GradientOracle
from fwdgrad.optimizers import OptimizerConfig
from fwdgrad.problems import linear_objective
from fwdgrad.rng import SeededRng

if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dim", type=int, default=100)
    parser.add_argument("--steps", type=int, default=10_000)
    parser.add_argument("--lr", type=float, default=0.01)
    parser.add_argument("--seed", type=int, default=7)
    a = parser.parse_args()
    mu = SeededRng(a.seed).signs(a.dim)
    problem = linear_objective(mu)
    print("oracle,mean_gain,se_gain,mean_sq_step,se_sq_step")
    for i, (label, oracle) in enumerate((("true", GradientOracle.true()), ("forward", GradientOracle.forward()))):
        values, thetas = run_path(problem, OptimizerConfig("sgd", lr=a.lr), oracle, np.zeros(a.dim), a.steps,
                                  SeededRng(a.seed, i + 1))
        gain = np.diff(values)
        sq = np.sum(np.diff(thetas, axis=0) ** 2, axis=1)
        se = lambda x: float(x.std(ddof=1) / math.sqrt(len(x)))  # noqa: E731
        print(f"{label},{float(gain.mean())!r},{se(gain)!r},{float(sq.mean())!r},{se(sq)!r}")
