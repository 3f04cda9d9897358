"""Speciated evolutionary engine with tournament breeding.

The engine is generic over genomes: anything with ``crossover(other,
rng)`` and ``mutate(rng, rate)`` works. Individuals carry one of three
species labels; breeding partners must share the parent's species, a
species with a single member sits a generation out, and offspring can
defect to another species with a small probability. One elite per
non-empty species survives truncation, which keeps the global best
monotone across generations.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .errors import ShapeError, SpeciesViolation
from .seeds import derive_seed

log = logging.getLogger(__name__)

SPECIES = ("A", "B", "C")


@dataclass
class TopologyGenome:
    """Hidden-layer sizes for a feed-forward network: 1-3 layers, 1-100 neurons."""

    layers: list[int]

    MAX_LAYERS = 3
    MAX_NEURONS = 100

    def __post_init__(self):
        self.layers = [int(x) for x in self.layers]
        if not 1 <= len(self.layers) <= self.MAX_LAYERS:
            raise ShapeError(f"topology must have 1-{self.MAX_LAYERS} layers")
        if any(not 1 <= x <= self.MAX_NEURONS for x in self.layers):
            raise ShapeError(f"neuron counts must be in [1, {self.MAX_NEURONS}]")

    def copy(self) -> "TopologyGenome":
        return TopologyGenome(list(self.layers))

    def crossover(self, other: "TopologyGenome", rng) -> "TopologyGenome":
        cut = int(rng.integers(0, min(len(self.layers), len(other.layers)) + 1))
        child = self.layers[:cut] + other.layers[cut:]
        return TopologyGenome(child[: self.MAX_LAYERS] or [self.layers[0]])

    def mutate(self, rng, rate: float) -> "TopologyGenome":
        layers = list(self.layers)
        for i in range(len(layers)):
            if rng.random() < rate:
                step = int(rng.integers(1, 11)) * (1 if rng.random() < 0.5 else -1)
                layers[i] = int(np.clip(layers[i] + step, 1, self.MAX_NEURONS))
        if rng.random() < rate and len(layers) < self.MAX_LAYERS:
            layers.insert(int(rng.integers(0, len(layers) + 1)),
                          int(rng.integers(1, self.MAX_NEURONS + 1)))
        if rng.random() < rate and len(layers) > 1:
            del layers[int(rng.integers(0, len(layers)))]
        return TopologyGenome(layers)

    def to_json(self):
        return list(self.layers)

    @classmethod
    def sample(cls, rng) -> "TopologyGenome":
        depth = int(rng.integers(1, cls.MAX_LAYERS + 1))
        return cls([int(rng.integers(1, cls.MAX_NEURONS + 1)) for _ in range(depth)])


@dataclass
class Individual:
    genome: Any
    species: str
    fitness: float | None = None
    birth_gen: int = 0
    uid: int = 0

    @property
    def evaluated(self) -> bool:
        return self.fitness is not None


@dataclass
class EvoConfig:
    population: int = 20
    generations: int = 20
    tournament_size: int = 3
    mutation_rate: float = 0.05
    species_switch_rate: float = 0.05
    elitism: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.population < 2:
            raise ShapeError("population must be >= 2")
        for name in ("mutation_rate", "species_switch_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ShapeError(f"{name} must be in [0, 1]")
        if self.tournament_size < 1:
            raise ShapeError("tournament_size must be >= 1")
        if self.generations < 0:
            raise ShapeError("generations must be >= 0")
        if self.elitism < 0:
            raise ShapeError("elitism must be >= 0")


@dataclass
class GenerationRecord:
    generation: int
    best_fitness: float
    best_genome: Any
    species_sizes: dict[str, int]


@dataclass
class BreedingEvent:
    generation: int
    parent1_species: str
    parent2_species: str


@dataclass
class EvoTrace:
    """Per-generation global bests plus the breeding audit log."""

    records: list[GenerationRecord] = field(default_factory=list)
    breeding_log: list[BreedingEvent] = field(default_factory=list)

    @property
    def best(self) -> GenerationRecord:
        return self.records[-1]

    def best_fitnesses(self) -> list[float]:
        return [r.best_fitness for r in self.records]

    def to_json(self) -> dict:
        def genome_json(g):
            return g.to_json() if hasattr(g, "to_json") else g

        return {
            "generations": [
                {
                    "generation": r.generation,
                    "best_fitness": r.best_fitness,
                    "best_genome": genome_json(r.best_genome),
                    "species_sizes": dict(r.species_sizes),
                }
                for r in self.records
            ],
            "breeding_events": len(self.breeding_log),
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2), encoding="utf-8")


def init_population(config: EvoConfig, genome_sampler: Callable, rng=None) -> list[Individual]:
    """Fresh unevaluated population with uniformly random species labels."""
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    population = []
    for i in range(config.population):
        genome = genome_sampler(rng)
        species = SPECIES[int(rng.integers(0, len(SPECIES)))]
        population.append(Individual(genome=genome, species=species, uid=i))
    return population


def tournament_select(pool: list[Individual], k: int, rng) -> Individual:
    """Fittest of k members sampled uniformly with replacement."""
    if not pool:
        raise ShapeError("tournament pool is empty")
    draws = rng.integers(0, len(pool), size=k)
    best = pool[int(draws[0])]
    for d in draws[1:]:
        candidate = pool[int(d)]
        if candidate.fitness > best.fitness:
            best = candidate
    return best


def breed(parent1: Individual, parent2: Individual, rng, mutation_rate: float = 0.0,
          species_switch_rate: float = 0.0) -> Individual:
    """Crossover + mutation within one species; offspring may defect."""
    if parent1.species != parent2.species:
        raise SpeciesViolation(
            f"cannot pair species {parent1.species} with {parent2.species}"
        )
    genome = parent1.genome.crossover(parent2.genome, rng)
    if mutation_rate > 0:
        genome = genome.mutate(rng, mutation_rate)
    species = parent1.species
    if rng.random() < species_switch_rate:
        others = [s for s in SPECIES if s != species]
        species = others[int(rng.integers(0, len(others)))]
    return Individual(genome=genome, species=species)


def _rank_key(ind: Individual):
    return (-ind.fitness, ind.birth_gen, ind.uid)


def _survivors(merged: list[Individual], config: EvoConfig) -> list[Individual]:
    """Top `population` by fitness with per-species elites; ties break by age."""
    by_species: dict[str, list[Individual]] = {}
    for ind in merged:
        by_species.setdefault(ind.species, []).append(ind)
    # species allocated in order of their best member so the global best
    # always lands an elite slot, even when population < species count
    species_order = sorted(by_species, key=lambda s: _rank_key(min(by_species[s], key=_rank_key)))
    chosen: list[Individual] = []
    chosen_ids: set[int] = set()
    for sp in species_order:
        for elite in sorted(by_species[sp], key=_rank_key)[: config.elitism]:
            if len(chosen) < config.population:
                chosen.append(elite)
                chosen_ids.add(id(elite))
    rest = sorted((i for i in merged if id(i) not in chosen_ids), key=_rank_key)
    for ind in rest:
        if len(chosen) >= config.population:
            break
        chosen.append(ind)
    return sorted(chosen, key=_rank_key)


def _evaluate(members: list[Individual], fitness_fn, run_seed: int, generation: int) -> None:
    for index, ind in enumerate(members):
        if ind.evaluated:
            continue
        try:
            ind.fitness = float(fitness_fn(ind.genome, derive_seed(run_seed, generation, index)))
        except Exception as exc:  # noqa: BLE001 - a bad genome must not kill the run
            log.warning("fitness evaluation failed (gen %d, idx %d): %s", generation, index, exc)
            ind.fitness = float("-inf")


def evolve(config: EvoConfig, genome_sampler: Callable,
           fitness_fn: Callable[[Any, int], float]) -> EvoTrace:
    """Run the speciated generational loop and record the trace.

    ``fitness_fn(genome, seed)`` must be deterministic for a given pair;
    the seed is derived from (run seed, generation, individual index) so
    results do not depend on evaluation order.
    """
    rng = np.random.default_rng(config.seed)
    next_uid = config.population
    population = init_population(config, genome_sampler, rng)
    _evaluate(population, fitness_fn, config.seed, 0)
    trace = EvoTrace()

    def record(generation: int) -> None:
        best = min(population, key=_rank_key)
        sizes = {s: 0 for s in SPECIES}
        for ind in population:
            sizes[ind.species] += 1
        genome = best.genome.copy() if hasattr(best.genome, "copy") else best.genome
        trace.records.append(GenerationRecord(generation, best.fitness, genome, sizes))

    record(0)
    for generation in range(1, config.generations + 1):
        census: dict[str, int] = {}
        for ind in population:
            census[ind.species] = census.get(ind.species, 0) + 1
        breedable = [ind for ind in population if census[ind.species] >= 2]
        offspring: list[Individual] = []
        if breedable:
            for _ in range(config.population):
                parent1 = tournament_select(breedable, config.tournament_size, rng)
                mates = [m for m in population if m.species == parent1.species]
                parent2 = tournament_select(mates, config.tournament_size, rng)
                child = breed(parent1, parent2, rng,
                              mutation_rate=config.mutation_rate,
                              species_switch_rate=config.species_switch_rate)
                child.birth_gen = generation
                child.uid = next_uid
                next_uid += 1
                trace.breeding_log.append(
                    BreedingEvent(generation, parent1.species, parent2.species)
                )
                offspring.append(child)
        _evaluate(offspring, fitness_fn, config.seed, generation)
        population = _survivors(population + offspring, config)
        record(generation)
    return trace
