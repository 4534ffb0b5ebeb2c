"""Likelihood-ratio engines for the rare type match.

Three routes to an evidential weight for a suspect/trace match absent
from the reference database of size n:

* ``lr_empirical_bayes`` - the plug-in (n + 1 + theta_hat)/(1 - alpha_hat).
* ``lr_frequentist`` - the benchmark 1/p_x when the matching type's
  population proportion is known.
* ``lr_true_mh`` / ``exact_true_lr`` - the ratio available when the whole
  ranked population vector is known: s1 divided by the posterior mean of
  the total frequency of singleton-class types, taken over the latent
  assignment of population ranks to observed size classes.

The assignment space is explored by a swap-proposal Metropolis chain:
propose a uniformly random pair of ranks carrying different classes,
reject outright if the swap would let a rank be observed more often than
its population count supports, otherwise accept with probability
min(1, R) where R is the likelihood ratio of the proposed to the current
assignment under p(a, r | chi, p) proportional to prod_i p_i^{a_{chi_i}}.
Swapping two zero-class ranks is a no-op and is never proposed (zero-zero
pairs carry equal classes). Class counts are conserved by construction,
so the chain never leaves the constraint set it starts in.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np
from scipy.special import logsumexp

from .partitions import IntegerPartition, SetPartition, to_integer_partition
from .pitman import PdParams, PopulationVector
from .rng import SeedLike, as_generator

__all__ = [
    "InfeasibleAssignmentError",
    "EnumerationCapExceededError",
    "AssignmentVector",
    "MhConfig",
    "TrueLrEstimate",
    "LrReport",
    "lr_empirical_bayes",
    "lr_posterior_form",
    "lr_frequentist",
    "chi_init",
    "mh_ratio",
    "lr_true_mh",
    "exact_true_lr",
    "diff_metrics",
]

_LOG10 = math.log(10.0)


class InfeasibleAssignmentError(RuntimeError):
    """No assignment satisfies the class-count and support constraints."""


class EnumerationCapExceededError(RuntimeError):
    """Exact enumeration refused: the assignment space is too large."""


def lr_empirical_bayes(n: int, params: PdParams) -> float:
    """Plug-in likelihood ratio (n + 1 + theta)/(1 - alpha), database size n."""
    if n < 1:
        raise ValueError("database size must be >= 1")
    return (n + 1.0 + params.theta) / (1.0 - params.alpha)


def lr_posterior_form(phi_posterior_mean: float, n: int) -> float:
    """LR = n / E[phi]; with the plug-in point for E[phi] this equals
    ``lr_empirical_bayes`` exactly."""
    if n < 1:
        raise ValueError("database size must be >= 1")
    upper = n / (n + 1.0)
    if not 0.0 < phi_posterior_mean <= upper + 1e-12:
        raise ValueError(
            f"posterior mean of phi must lie in (0, {upper:.6g}], got {phi_posterior_mean}"
        )
    return n / phi_posterior_mean


def lr_frequentist(p: PopulationVector, matched_rank: int) -> float:
    """Benchmark 1/p_x for the matching type at 1-based population rank."""
    if not 1 <= matched_rank <= p.m:
        raise ValueError(f"matched_rank must lie in 1..{p.m}, got {matched_rank}")
    return 1.0 / p.probs[matched_rank - 1]


def _as_integer_partition(pi: Union[IntegerPartition, SetPartition]) -> IntegerPartition:
    return pi if isinstance(pi, IntegerPartition) else to_integer_partition(pi)


def _support_caps(p: PopulationVector, strict: bool) -> np.ndarray:
    """Largest class size each rank can carry under the census constraint.

    Default rule: the rounded population count round(N p_i) must be at
    least the observed count. The strict variant demands N p_i strictly
    above it, which forbids observing a type exactly as often as it
    occurs; it is kept for sensitivity analysis.
    """
    if p.pop_size is None:
        raise ValueError("population needs pop_size for assignment-space computations")
    scaled = p.pop_size * p.as_array()
    if strict:
        caps = np.ceil(scaled - 1e-9) - 1.0
    else:
        caps = np.rint(scaled)
    return caps.astype(np.int64)


@dataclass(frozen=True)
class AssignmentVector:
    """Map from population ranks to observed size classes.

    chi[i] = j > 0 puts rank i+1 (1-based) in the class observed a_j
    times; 0 marks an unobserved rank. Exactly r_j ranks carry class j,
    and an assigned rank's population count must support its class size.
    """

    chi: tuple[int, ...]
    partition: IntegerPartition
    population: PopulationVector
    strict_support: bool = False

    def __post_init__(self) -> None:
        part, pop = self.partition, self.population
        if len(self.chi) != pop.m:
            raise ValueError(f"chi must have one entry per population rank ({pop.m})")
        J = part.num_size_classes
        counts = [0] * (J + 1)
        for c in self.chi:
            if not 0 <= c <= J:
                raise ValueError(f"class labels must lie in 0..{J}, got {c}")
            counts[c] += 1
        if tuple(counts[1:]) != part.r:
            raise ValueError(f"class counts {tuple(counts[1:])} must equal r={part.r}")
        caps = _support_caps(pop, self.strict_support)
        for i, c in enumerate(self.chi):
            if c > 0 and caps[i] < part.a[c - 1]:
                raise InfeasibleAssignmentError(
                    f"rank {i + 1} cannot carry block size {part.a[c - 1]} "
                    f"(supported count {caps[i]})"
                )

    def singleton_mass(self) -> float:
        """Total frequency of ranks assigned to the singleton class."""
        if self.partition.a[0] != 1:
            return 0.0
        return math.fsum(p for p, c in zip(self.population.probs, self.chi) if c == 1)


def chi_init(
    pi: Union[IntegerPartition, SetPartition],
    p: PopulationVector,
    strict_support: bool = False,
) -> AssignmentVector:
    """Greedy feasible start: largest classes grab the most frequent
    supportable ranks.

    Ranks are scanned in frequency order; because the support caps are
    nonincreasing in rank, eligibility for each class is a prefix, and
    filling classes in decreasing block size preserves feasibility
    whenever any feasible assignment exists.
    """
    part = _as_integer_partition(pi)
    caps = _support_caps(p, strict_support)
    chi = [0] * p.m
    cursor = 0
    for a_j, r_j, j in sorted(zip(part.a, part.r, range(1, part.num_size_classes + 1)), reverse=True):
        placed = 0
        while placed < r_j:
            if cursor >= p.m or caps[cursor] < a_j:
                raise InfeasibleAssignmentError(
                    f"class of block size {a_j} needs {r_j} ranks with supported "
                    f"count >= {a_j}; only {placed} available"
                )
            chi[cursor] = j
            cursor += 1
            placed += 1
    return AssignmentVector(
        chi=tuple(chi), partition=part, population=p, strict_support=strict_support
    )


def mh_ratio(chi: AssignmentVector, i: int, j: int, p: Optional[PopulationVector] = None) -> float:
    """Acceptance probability for swapping the classes of ranks i and j
    (1-based): min(1, R) with R the proposed/current likelihood ratio,
    computed in log space."""
    pop = p if p is not None else chi.population
    if i == j:
        raise ValueError("swap needs two distinct ranks")
    if not (1 <= i <= pop.m and 1 <= j <= pop.m):
        raise ValueError(f"ranks must lie in 1..{pop.m}")
    a_ext = (0,) + chi.partition.a
    ai = a_ext[chi.chi[i - 1]]
    aj = a_ext[chi.chi[j - 1]]
    log_r = (ai - aj) * (math.log(pop.probs[j - 1]) - math.log(pop.probs[i - 1]))
    return 1.0 if log_r >= 0.0 else math.exp(log_r)


@dataclass(frozen=True)
class MhConfig:
    """Chain schedule; defaults: 1e5 sweeps, burn-in 2e4, thinning 1e3."""

    iterations: int = 100_000
    burn_in: int = 20_000
    thinning: int = 1_000
    seed: SeedLike = None

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must lie in [0, iterations)")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")

    @property
    def n_retained(self) -> int:
        return (self.iterations - self.burn_in) // self.thinning


@dataclass(frozen=True)
class TrueLrEstimate:
    """Monte-Carlo estimate of the known-population LR with its error bar."""

    lr: float
    stderr: float
    log10_lr: float
    log10_stderr: float
    mean_singleton_mass: float
    acceptance_rate: float
    n_retained: int
    trace: tuple[tuple[int, float], ...]

    def to_dict(self) -> dict:
        return {
            "lr": self.lr,
            "stderr": self.stderr,
            "log10_lr": self.log10_lr,
            "log10_stderr": self.log10_stderr,
            "mean_singleton_mass": self.mean_singleton_mass,
            "acceptance_rate": self.acceptance_rate,
            "n_retained": self.n_retained,
        }


class _Buffered:
    """Block-buffered draws from one generator; consumption order is fixed,
    so results are reproducible for a given seed."""

    __slots__ = ("_rng", "_m", "_ints", "_unis", "_ii", "_ui")
    _BLOCK = 8192

    def __init__(self, rng: np.random.Generator, m: int):
        self._rng = rng
        self._m = m
        self._ints: list[int] = []
        self._unis: list[float] = []
        self._ii = 0
        self._ui = 0

    def next_rank(self) -> int:
        if self._ii == len(self._ints):
            self._ints = self._rng.integers(0, self._m, size=self._BLOCK).tolist()
            self._ii = 0
        v = self._ints[self._ii]
        self._ii += 1
        return v

    def next_uniform(self) -> float:
        if self._ui == len(self._unis):
            self._unis = self._rng.random(size=self._BLOCK).tolist()
            self._ui = 0
        v = self._unis[self._ui]
        self._ui += 1
        return v


def _run_swap_chain(start: AssignmentVector, cfg: MhConfig):
    """Drive the swap chain; returns (trace of retained (step, singleton
    mass), acceptance rate)."""
    part, pop = start.partition, start.population
    probs = pop.as_array()
    log_probs = np.log(probs).tolist()
    caps = _support_caps(pop, start.strict_support).tolist()
    a_ext = [0] + list(part.a)
    chi = list(start.chi)
    m = len(chi)

    def singleton_mass() -> float:
        return float(probs[np.asarray(chi) == 1].sum())

    # with every rank in the same class there is nothing to swap; the
    # single state is the whole constraint set
    distinct = len(set(chi)) > 1
    rng = as_generator(cfg.seed)
    draws = _Buffered(rng, m)

    trace: list[tuple[int, float]] = []
    accepted = 0
    for t in range(1, cfg.iterations + 1):
        if distinct:
            while True:
                i = draws.next_rank()
                j = draws.next_rank()
                if i == j:
                    continue
                ci = chi[i]
                cj = chi[j]
                if ci != cj:
                    break
            u = draws.next_uniform()
            ai = a_ext[ci]
            aj = a_ext[cj]
            # census support is enforced by rejecting the proposal outright
            if caps[i] >= aj and caps[j] >= ai:
                log_r = (ai - aj) * (log_probs[j] - log_probs[i])
                if log_r >= 0.0 or u < math.exp(log_r):
                    chi[i] = cj
                    chi[j] = ci
                    accepted += 1
        if t > cfg.burn_in and (t - cfg.burn_in) % cfg.thinning == 0:
            trace.append((t, singleton_mass()))
    # swaps conserve class counts and rejected proposals never land, so the
    # final state must still satisfy every constraint; constructing the
    # AssignmentVector re-checks that
    AssignmentVector(
        chi=tuple(chi),
        partition=part,
        population=pop,
        strict_support=start.strict_support,
    )
    return trace, accepted / cfg.iterations


def _batch_means_stderr(values: np.ndarray, n_batches: int = 20) -> float:
    """Standard error of the mean by batch means (20 batches by default)."""
    n = values.size
    if n < 2:
        return float("nan")
    b = max(1, n // n_batches)
    usable = (n // b) * b
    batches = values[:usable].reshape(-1, b).mean(axis=1)
    if batches.size < 2:
        return float(values.std(ddof=1) / math.sqrt(n))
    return float(batches.std(ddof=1) / math.sqrt(batches.size))


def lr_true_mh(
    pi_db_plus: Union[IntegerPartition, SetPartition],
    p: PopulationVector,
    cfg: MhConfig = MhConfig(),
    *,
    strict_support: bool = False,
) -> TrueLrEstimate:
    """Estimate the LR given the full population vector.

    ``pi_db_plus`` is the suspect-augmented partition (the suspect's type
    is one of its singletons). The chain targets p(chi | a, r, p); the
    estimate is s1 over the average total frequency of singleton-class
    ranks across retained states.
    """
    part = _as_integer_partition(pi_db_plus)
    if part.s1 < 1:
        raise ValueError("rare-type partition needs at least one singleton block")
    if p.pop_size is None:
        raise ValueError("population needs pop_size for the assignment-space oracle")
    if p.pop_size < p.m:
        raise ValueError("pop_size below the number of listed types")
    start = chi_init(part, p, strict_support=strict_support)
    trace, acceptance = _run_swap_chain(start, cfg)
    if not trace:
        raise ValueError(
            "no retained samples: lower burn_in/thinning or raise iterations "
            f"(schedule keeps {cfg.n_retained})"
        )
    masses = np.array([s for _, s in trace])
    mean_mass = float(masses.mean())
    se_mass = _batch_means_stderr(masses)
    lr = part.s1 / mean_mass
    se_lr = part.s1 * se_mass / mean_mass**2
    return TrueLrEstimate(
        lr=lr,
        stderr=se_lr,
        log10_lr=math.log10(lr),
        log10_stderr=se_lr / (lr * _LOG10),
        mean_singleton_mass=mean_mass,
        acceptance_rate=acceptance,
        n_retained=len(trace),
        trace=tuple(trace),
    )


def _assignment_count(m: int, r: tuple[int, ...]) -> int:
    total = 1
    left = m
    for r_j in r:
        total *= math.comb(left, r_j)
        left -= r_j
    return total


def exact_true_lr(
    pi_db_plus: Union[IntegerPartition, SetPartition],
    p: PopulationVector,
    *,
    strict_support: bool = False,
    cap: int = 2_000_000,
) -> float:
    """Exact known-population LR by enumerating every valid assignment.

    Weighted by the assignment likelihood prod_i p_i^{a_{chi_i}}; refuses
    (with a pointer to ``lr_true_mh``) when the candidate count exceeds
    ``cap``.
    """
    part = _as_integer_partition(pi_db_plus)
    if part.s1 < 1:
        raise ValueError("rare-type partition needs at least one singleton block")
    if p.pop_size is None:
        raise ValueError("population needs pop_size for the assignment-space oracle")
    if p.pop_size < p.m:
        raise ValueError("pop_size below the number of listed types")
    count = _assignment_count(p.m, part.r)
    if count > cap:
        raise EnumerationCapExceededError(
            f"{count} candidate assignments exceed the cap {cap}; use lr_true_mh"
        )
    caps = _support_caps(p, strict_support)
    log_p = np.log(p.as_array())
    classes = sorted(
        zip(part.a, part.r, range(1, part.num_size_classes + 1)), reverse=True
    )
    log_weights: list[float] = []
    masses: list[float] = []

    def rec(idx: int, available: tuple[int, ...], logw: float, mass: float) -> None:
        if idx == len(classes):
            log_weights.append(logw)
            masses.append(mass)
            return
        a_j, r_j, label = classes[idx]
        eligible = [i for i in available if caps[i] >= a_j]
        for combo in itertools.combinations(eligible, r_j):
            taken = set(combo)
            w = logw + a_j * float(sum(log_p[i] for i in combo))
            extra = float(sum(p.probs[i] for i in combo)) if a_j == 1 else 0.0
            rec(idx + 1, tuple(i for i in available if i not in taken), w, mass + extra)

    rec(0, tuple(range(p.m)), 0.0, 0.0)
    if not log_weights:
        raise InfeasibleAssignmentError("no assignment satisfies the support constraint")
    lw = np.array(log_weights)
    mass_arr = np.array(masses)
    log_norm = logsumexp(lw)
    expected_mass = float(np.exp(logsumexp(lw, b=mass_arr) - log_norm))
    return part.s1 / expected_mass


@dataclass(frozen=True)
class LrReport:
    """log10-scale LR bundle; diffs compare the plug-in against the
    known-population and frequentist references."""

    log10_lr_eb: Optional[float] = None
    log10_lr_true: Optional[float] = None
    log10_lr_true_se: Optional[float] = None
    log10_lr_freq: Optional[float] = None
    diff1: Optional[float] = None
    diff2: Optional[float] = None
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "log10_lr_eb": self.log10_lr_eb,
            "log10_lr_true": self.log10_lr_true,
            "log10_lr_true_se": self.log10_lr_true_se,
            "log10_lr_freq": self.log10_lr_freq,
            "diff1": self.diff1,
            "diff2": self.diff2,
            "notes": list(self.notes),
        }


def diff_metrics(report: LrReport) -> LrReport:
    """Fill diff1 = eb - true and diff2 = eb - freq where operands exist;
    missing operands leave the field empty and add a note."""
    notes = report.notes
    diff1 = report.diff1
    diff2 = report.diff2
    if report.log10_lr_eb is not None and report.log10_lr_true is not None:
        diff1 = report.log10_lr_eb - report.log10_lr_true
    else:
        notes += ("diff1 unavailable: needs both plug-in and known-population LRs",)
    if report.log10_lr_eb is not None and report.log10_lr_freq is not None:
        diff2 = report.log10_lr_eb - report.log10_lr_freq
    else:
        notes += ("diff2 unavailable: needs both plug-in and frequentist LRs",)
    return replace(report, diff1=diff1, diff2=diff2, notes=notes)
