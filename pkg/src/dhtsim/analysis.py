"""Numerical studies of reputation gaming.

Two attacker families are modeled.  An oscillation attacker alternates
honest and malicious behavior against a score tracker, trying to farm
reputation between attacks; the expected-value recursion below follows
one attacker and one honest contact competing in a single bucket.  A
use-based attacker misbehaves only toward the knuckles that route the
most lookups through it, then relies on the well-served majority to
shout down the victims' reports in the shared-score exchange.
"""

import math
import random

from .adversary import oscillation_decision
from .reputation import ewma_update, selection_prob
from .sharedrep import aggregate

DEFAULT_HONEST_SCORE = 0.90
DEFAULT_LOOKUPS = 20000


class OscillationModel:
    """One attacker and one honest contact in a single bucket.

    The honest contact's score s_h stays fixed; the attacker starts at
    s0 and is re-scored by an exponentially weighted average whenever
    it is selected.  alpha_ewma sets how fast history decays, beta_bias
    how sharply selection favors the higher score.  No churn: the
    attacker's only lever is its own behavior.
    """

    def __init__(self, alpha_ewma, beta_bias, s_h=DEFAULT_HONEST_SCORE,
                 s0=1.0, lookups=DEFAULT_LOOKUPS):
        if lookups < 1:
            raise ValueError("need at least one lookup")
        if not 0.0 < s_h <= 1.0 or not 0.0 < s0 <= 1.0:
            raise ValueError("scores outside (0, 1]")
        self.alpha_ewma = alpha_ewma
        self.beta_bias = beta_bias
        self.s_h = s_h
        self.s0 = s0
        self.lookups = lookups


def simulate_oscillation(model, strategy, rng=None):
    """Expected attacks and the (score, Pr[A], p) trajectory.

    Each lookup selects the attacker with probability
    Pr[A] = s**beta / (s**beta + s_h**beta); the strategy turns that
    into an attack probability p, and the attacked total accumulates
    Pr[A] * p.  The attacker's result is honest (1) exactly when it is
    not attacking, so its score moves by the EWMA rule toward 1 - p,
    weighted by the chance it was selected and observed at all.  By
    default the recursion is deterministic in expectation; passing an
    rng samples selection and attack outcomes instead, for
    cross-checking the recursion.
    """
    s = model.s0
    total = 0.0
    trajectory = []
    for _ in range(model.lookups):
        pra = selection_prob([s, model.s_h], model.beta_bias)[0]
        p = oscillation_decision(strategy, pra)
        trajectory.append((s, pra, p))
        if rng is None:
            total += pra * p
            s += pra * (ewma_update(s, 1.0 - p, model.alpha_ewma) - s)
        else:
            if rng.random() < pra:
                attacked = rng.random() < p
                total += attacked
                s = ewma_update(s, 0.0 if attacked else 1.0,
                                model.alpha_ewma)
    return total, trajectory


def attacked_fraction(model, strategy, rng=None):
    total, _ = simulate_oscillation(model, strategy, rng)
    return total / model.lookups


def sweep(strategy_family, grid, model):
    """Attacked fraction per grid point.

    Each point constructs a fresh strategy from its parameter tuple, so
    stateful families restart cleanly.  Returns (params, fraction)
    pairs in grid order.
    """
    out = []
    for params in grid:
        strategy = strategy_family(*params)
        total, _ = simulate_oscillation(model, strategy)
        out.append((params, total / model.lookups))
    return out


def tau_grid(step=0.05, start=0.05, stop=0.95):
    """Threshold values start..stop inclusive, as one-tuples."""
    count = int(round((stop - start) / step))
    return [(round(start + i * step, 10),) for i in range(count + 1)]


def threshold_pair_grid(step=0.05, start=0.05, stop=0.95):
    """All ordered (tau1, tau2) pairs with tau1 < tau2."""
    taus = [t for (t,) in tau_grid(step, start, stop)]
    return [(t1, t2) for t1 in taus for t2 in taus if t1 < t2]


def probabilistic_grid(slopes=None, offsets=None):
    """(slope, offset) pairs for the linear attack policy."""
    if slopes is None:
        slopes = [round(0.25 * i, 10) for i in range(9)]
    if offsets is None:
        offsets = [round(0.1 * i, 10) for i in range(11)]
    return [(rho, c) for rho in slopes for c in offsets]


def use_based_sim(n, lookups, m, s, f, method="dropoff", seed=0,
                  victim_presence=0.75):
    """Share of trials, in percent, where a victim of a use-based
    attacker still computes the non-victim consensus score for it.

    The attacker is a finger of about log2(n) knuckles and misbehaves
    toward the m that use it most.  Those victims score it 1 - f first
    hand while the rest score it s.  Each trial rebuilds one victim's
    shared score from its joint knuckles' reports: the k - m well
    served knuckles keep using the attacker, so they always have a
    fresh score to broadcast, while fellow victims have mostly stopped
    routing through it and report only with probability
    victim_presence.  A trial counts when the aggregate lands within
    0.01 of the consensus value s.
    """
    k = int(math.log2(n))
    if not 1 <= m <= k:
        raise ValueError("m outside 1..log2(n)")
    if lookups < 1:
        raise ValueError("need at least one trial")
    rng = random.Random(seed)
    own = 1.0 - f
    hits = 0
    for _ in range(lookups):
        received = [s] * (k - m)
        received += [own] * sum(rng.random() < victim_presence
                                for _ in range(m - 1))
        if abs(aggregate(method, own, received, rng) - s) < 0.01:
            hits += 1
    return 100.0 * hits / lookups
