"""Differential evolution over real-valued genomes, strategy rand/1/bin.

One generation is a fixed pipeline per population slot: draw three distinct
donor indices, build the mutant ``x_r1 + F * (x_r2 - x_r3)``, binomial-cross
it with the target, then keep whichever of target and trial has the better
(lower) fitness.  All randomness flows through an explicit generator argument
so that runs are reproducible and resumable; nothing here touches global RNG
state.  Fitness values are minimized.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .genome import GeneBounds, random_genome


@dataclass(frozen=True)
class DEConfig:
    """Evolution parameters.

    ``population_size`` must be at least 4: mutation needs three donors
    distinct from each other and from the target.
    """

    population_size: int = 12
    F: float = 0.5
    Cr: float = 0.9
    D: int = 48
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 4:
            raise ValueError(
                f"population_size must be >= 4, got {self.population_size}"
            )
        if not 0.0 < self.F <= 2.0:
            raise ValueError(f"F must lie in (0, 2], got {self.F}")
        if not 0.0 <= self.Cr <= 1.0:
            raise ValueError(f"Cr must lie in [0, 1], got {self.Cr}")
        if self.D < 1:
            raise ValueError(f"D must be >= 1, got {self.D}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")


@dataclass(frozen=True)
class Population:
    """A generation's genomes plus whatever fitness is known per slot."""

    generation: int
    members: np.ndarray  # shape (population_size, D), float64
    fitness: tuple[float | None, ...]

    def __post_init__(self):
        m = np.asarray(self.members, dtype=np.float64)
        if m.ndim != 2:
            raise ValueError("members must be a 2-d array (slots x genes)")
        if len(self.fitness) != m.shape[0]:
            raise ValueError("one fitness entry required per slot")
        object.__setattr__(self, "members", m)
        object.__setattr__(self, "fitness", tuple(self.fitness))

    @property
    def size(self) -> int:
        return self.members.shape[0]

    @property
    def dims(self) -> int:
        return self.members.shape[1]

    def with_fitness(self, fitness) -> "Population":
        return replace(self, fitness=tuple(fitness))

    def best_index(self) -> int:
        scored = [(f, i) for i, f in enumerate(self.fitness) if f is not None]
        if not scored:
            raise ValueError("population has no scored members")
        return min(scored)[1]


@dataclass(frozen=True)
class MutationDraw:
    """Donor indices for one mutation; pairwise distinct, none the target."""

    r1: int
    r2: int
    r3: int


@dataclass(frozen=True)
class TrialCandidate:
    """A crossover product competing against the population slot it targets."""

    target_index: int
    trial: np.ndarray
    fitness: float | None = None

    def scored(self, value: float) -> "TrialCandidate":
        return replace(self, fitness=float(value))


def derive_stream(seed: int, index: int, namespace: int = 0) -> np.random.Generator:
    """Child generator number ``index`` of the run-wide seed.

    Streams are independent per (namespace, index), so a resumed run only
    needs to know how many streams were consumed, not how many individual
    draws.  Namespace 0 is the evolution sequence (stream 0 initializes the
    population, stream k proposes the k-th trial round); other namespaces
    are free for auxiliary draws.
    """
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(namespace, index))
    return np.random.Generator(np.random.PCG64(ss))


def init_population(cfg: DEConfig, bounds: GeneBounds, rng) -> Population:
    """Fill generation 0 with uniform random genomes, one rng draw per slot."""
    if bounds.dims != cfg.D:
        raise ValueError(f"bounds cover {bounds.dims} dims, config says {cfg.D}")
    members = np.stack(
        [random_genome(rng, bounds) for _ in range(cfg.population_size)]
    )
    return Population(
        generation=0,
        members=members,
        fitness=(None,) * cfg.population_size,
    )


def draw_indices(rng, pop_size: int, target: int) -> MutationDraw:
    """Three distinct donor indices, uniform over valid triples, skipping the
    target.  Uses rejection sampling; draw order is part of the contract."""
    if pop_size < 4:
        raise ValueError("need at least 4 slots to draw three distinct donors")
    r1 = target
    while r1 == target:
        r1 = int(rng.integers(0, pop_size))
    r2 = target
    while r2 == target or r2 == r1:
        r2 = int(rng.integers(0, pop_size))
    r3 = target
    while r3 == target or r3 == r1 or r3 == r2:
        r3 = int(rng.integers(0, pop_size))
    return MutationDraw(r1=r1, r2=r2, r3=r3)


def mutate(pop: Population, target: int, draw: MutationDraw, F: float) -> np.ndarray:
    """Mutant vector: donor r1 plus the F-scaled difference of r2 and r3.

    No clamping happens here; out-of-range components are legal and get
    projected only when the genome is decoded.
    """
    if len({draw.r1, draw.r2, draw.r3, target}) != 4:
        raise ValueError(f"donor indices must be distinct from each other and slot {target}")
    m = pop.members
    return m[draw.r1] + F * (m[draw.r2] - m[draw.r3])


def crossover(target: np.ndarray, mutant: np.ndarray, Cr: float, rng) -> np.ndarray:
    """Binomial crossover: component j comes from the mutant when the j-th
    uniform draw is <= Cr, from the target otherwise.

    One forced index (drawn after the uniforms) always takes the mutant
    component, so a trial can never be an exact copy of its target by
    crossover alone.
    """
    if target.shape != mutant.shape:
        raise ValueError(
            f"target/mutant length mismatch: {target.shape} vs {mutant.shape}"
        )
    d = target.shape[0]
    rand = np.asarray(rng.random(d))
    j_rand = int(rng.integers(0, d))
    trial = np.where(rand <= Cr, mutant, target)
    trial[j_rand] = mutant[j_rand]
    return trial


def select(
    target: np.ndarray,
    target_fitness: float | None,
    trial: TrialCandidate,
) -> tuple[np.ndarray, float]:
    """Deterministic survivor pick: the trial wins on better-or-equal fitness.

    Ties go to the trial, which keeps the population drifting across flat
    fitness plateaus instead of freezing.
    """
    if target_fitness is None or trial.fitness is None:
        raise ValueError("cannot select with unscored candidates")
    if not (np.isfinite(target_fitness) and np.isfinite(trial.fitness)):
        raise ValueError("fitness values must be finite")
    if trial.fitness <= target_fitness:
        return trial.trial, trial.fitness
    return target, target_fitness


def propose_trials(pop: Population, cfg: DEConfig, rng) -> list[TrialCandidate]:
    """One trial per slot via draw -> mutate -> crossover, in slot order."""
    trials = []
    for i in range(pop.size):
        draw = draw_indices(rng, pop.size, i)
        mutant = mutate(pop, i, draw, cfg.F)
        trial = crossover(pop.members[i], mutant, cfg.Cr, rng)
        trials.append(TrialCandidate(target_index=i, trial=trial))
    return trials


def step_generation(
    pop: Population, trials: list[TrialCandidate], cfg: DEConfig
) -> Population:
    """Advance one generation by applying selection slot by slot.

    Requires exactly one scored trial per slot; survivors carry their fitness
    forward so unchanged genomes are never re-evaluated.
    """
    if sorted(t.target_index for t in trials) != list(range(pop.size)):
        raise ValueError("need exactly one trial per population slot")
    unscored = [t.target_index for t in trials if t.fitness is None]
    if unscored:
        raise ValueError(f"cannot advance with unscored trials for slots {unscored}")
    by_slot = {t.target_index: t for t in trials}
    members = np.empty_like(pop.members)
    fitness = []
    for i in range(pop.size):
        genes, f = select(pop.members[i], pop.fitness[i], by_slot[i])
        members[i] = genes
        fitness.append(f)
    return Population(
        generation=pop.generation + 1, members=members, fitness=tuple(fitness)
    )
