"""One-index attacks on VQ-compressed images.

The adversary controls exactly one block position (x, y) of the index
tensor and the replacement index for each channel at that position.
Fitness is the oracle probability of the true class after decoding, so
lower is better and an attack succeeds when the decoded image is no
longer assigned the true label.

Search runs in a continuous genotype space (x, y, v_1 .. v_C); candidate
phenotypes are obtained by clamping to bounds and rounding half up.
"""

from dataclasses import dataclass, field

import numpy as np

from .codec import Codebook, IndexTensor, decode
from .oracle import Oracle


class AttackError(Exception):
    """Base class for attack failures."""


class BudgetExhaustedError(AttackError):
    """Raised when an evaluation is requested beyond the context budget."""


@dataclass(frozen=True)
class Perturbation:
    """Replacement of the codeword indices at a single block position."""

    x: int
    y: int
    values: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "x", int(self.x))
        object.__setattr__(self, "y", int(self.y))
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        if len(self.values) == 0:
            raise ValueError("perturbation needs at least one channel value")


@dataclass
class DEConfig:
    """Differential evolution hyperparameters."""

    population_size: int = 50
    generations: int = 50
    scale_factor: float = 0.5
    early_stop: bool = False

    def __post_init__(self):
        if self.population_size < 4:
            raise ValueError("population must hold an individual plus three donors")
        if self.generations < 0:
            raise ValueError("generations must be non-negative")
        if not self.scale_factor > 0:
            raise ValueError("scale factor must be positive")


@dataclass
class AttackResult:
    """Outcome of a single attack run."""

    success: bool
    perturbation: Perturbation
    fitness: float
    predicted_label: int
    probs: np.ndarray
    trajectory: np.ndarray
    evaluations: int
    oracle_queries: int
    generations_completed: int
    early_stopped: bool = False


def apply_perturbation(indices: IndexTensor, perturbation: Perturbation) -> IndexTensor:
    """Return a copy of `indices` with one block position rewritten."""
    s, t, c = indices.s, indices.t, indices.channels
    if not (0 <= perturbation.x < s and 0 <= perturbation.y < t):
        raise ValueError(
            f"position ({perturbation.x}, {perturbation.y}) outside {s}x{t} grid"
        )
    if len(perturbation.values) != c:
        raise ValueError(
            f"perturbation has {len(perturbation.values)} values for {c} channels"
        )
    for v in perturbation.values:
        if not 0 <= v < indices.codebook_length:
            raise ValueError(f"index {v} outside codebook of {indices.codebook_length}")
    new = np.array(indices.indices, copy=True)
    new[perturbation.x, perturbation.y, :] = perturbation.values
    return IndexTensor(
        indices=new,
        codebook_length=indices.codebook_length,
        codebook_id=indices.codebook_id,
    )


def round_half_up(values: np.ndarray) -> np.ndarray:
    """Round to nearest integer with .5 going up, elementwise."""
    return np.floor(np.asarray(values, dtype=np.float64) + 0.5).astype(np.int64)


def genotype_to_perturbation(genotype: np.ndarray, s: int, t: int,
                             channels: int, codebook_length: int) -> Perturbation:
    """Clamp a continuous genotype to bounds and round to a phenotype."""
    g = np.asarray(genotype, dtype=np.float64)
    if g.shape != (2 + channels,):
        raise ValueError(f"genotype must have {2 + channels} coordinates, got {g.shape}")
    hi = np.array([s - 1, t - 1] + [codebook_length - 1] * channels, dtype=np.float64)
    g = np.clip(g, 0.0, hi)
    ints = round_half_up(g)
    return Perturbation(ints[0], ints[1], tuple(ints[2:]))


class AttackContext:
    """Everything one attack needs: target, oracle, budget, and caching.

    `evaluations` counts fitness evaluation sites for budget accounting.
    `oracle_queries` counts actual oracle round trips; repeat candidates
    are answered from a per-context cache without a new query.
    """

    def __init__(self, oracle: Oracle, codebook: Codebook, indices: IndexTensor,
                 true_label: int, budget: int | None = None, candidate_hook=None):
        if not 0 <= true_label < oracle.num_classes:
            raise ValueError(f"label {true_label} outside {oracle.num_classes} classes")
        if budget is not None and budget < 0:
            raise ValueError("budget must be non-negative")
        self.oracle = oracle
        self.codebook = codebook
        self.indices = indices
        self.true_label = int(true_label)
        self.budget = budget
        self.candidate_hook = candidate_hook
        self._cache: dict[tuple, np.ndarray] = {}
        self._evaluations = 0
        self._oracle_queries = 0

    @property
    def evaluations(self) -> int:
        return self._evaluations

    @property
    def oracle_queries(self) -> int:
        return self._oracle_queries

    def evaluate(self, perturbation: Perturbation) -> np.ndarray:
        """Probability vector for the perturbed image; counts one evaluation."""
        if self.budget is not None and self._evaluations >= self.budget:
            raise BudgetExhaustedError(f"budget of {self.budget} evaluations exhausted")
        if self.candidate_hook is not None:
            self.candidate_hook(perturbation)
        self._evaluations += 1
        key = (perturbation.x, perturbation.y, perturbation.values)
        probs = self._cache.get(key)
        if probs is None:
            tensor = apply_perturbation(self.indices, perturbation)
            probs = self.oracle.classify(decode(tensor, self.codebook))
            self._cache[key] = probs
            self._oracle_queries += 1
        return probs

    def fitness(self, perturbation: Perturbation) -> float:
        return float(self.evaluate(perturbation)[self.true_label])


def fitness(context: AttackContext, perturbation: Perturbation) -> float:
    """True-class probability of the perturbed, decoded image."""
    return context.fitness(perturbation)


class _BestTracker:
    """Keeps the strictly best candidate seen; ties keep the earlier one."""

    def __init__(self, true_label: int):
        self.true_label = true_label
        self.fitness = np.inf
        self.perturbation = None
        self.probs = None

    def update(self, perturbation: Perturbation, probs: np.ndarray) -> None:
        fit = float(probs[self.true_label])
        if fit < self.fitness:
            self.fitness = fit
            self.perturbation = perturbation
            self.probs = probs

    @property
    def misclassified(self) -> bool:
        return self.probs is not None and int(np.argmax(self.probs)) != self.true_label

    def result(self, trajectory, evaluations, oracle_queries,
               generations_completed, early_stopped=False) -> AttackResult:
        if self.perturbation is None:
            raise BudgetExhaustedError("budget exhausted before any evaluation")
        return AttackResult(
            success=self.misclassified,
            perturbation=self.perturbation,
            fitness=self.fitness,
            predicted_label=int(np.argmax(self.probs)),
            probs=self.probs,
            trajectory=np.asarray(trajectory, dtype=np.float64),
            evaluations=evaluations,
            oracle_queries=oracle_queries,
            generations_completed=generations_completed,
            early_stopped=early_stopped,
        )


def de_attack(context: AttackContext, config: DEConfig | None = None,
              rng: np.random.Generator | None = None) -> AttackResult:
    """Differential evolution over one-index perturbations.

    Mutation is donor + F * (donor - donor) with three distinct donors
    drawn per individual from the previous generation, no crossover.
    A trial replaces its parent only on strictly smaller fitness, and the
    whole population advances synchronously, so the per-generation best
    fitness never increases. If the budget runs out mid-generation the
    attack finishes with the evaluations made so far.
    """
    if config is None:
        config = DEConfig()
    if rng is None:
        rng = np.random.default_rng()
    s, t, c = context.indices.s, context.indices.t, context.indices.channels
    length = context.codebook.length
    n = config.population_size
    lo = np.zeros(2 + c, dtype=np.float64)
    hi = np.array([s - 1, t - 1] + [length - 1] * c, dtype=np.float64)

    eval_start = context.evaluations
    query_start = context.oracle_queries
    best = _BestTracker(context.true_label)
    trajectory: list[float] = []

    def finalize(completed: int, stopped: bool = False) -> AttackResult:
        return best.result(
            trajectory,
            context.evaluations - eval_start,
            context.oracle_queries - query_start,
            completed,
            stopped,
        )

    pop = lo + rng.random((n, 2 + c)) * (hi - lo)
    pop_fit = np.empty(n, dtype=np.float64)
    for i in range(n):
        pert = genotype_to_perturbation(pop[i], s, t, c, length)
        try:
            probs = context.evaluate(pert)
        except BudgetExhaustedError:
            return finalize(0)
        pop_fit[i] = probs[context.true_label]
        best.update(pert, probs)
    trajectory.append(float(pop_fit.min()))
    if config.early_stop and best.misclassified:
        return finalize(0, stopped=True)

    indices = np.arange(n)
    for gen in range(1, config.generations + 1):
        prev_pop = pop.copy()
        prev_fit = pop_fit.copy()
        trial_pop = np.empty_like(pop)
        trial_fit = np.empty(n, dtype=np.float64)
        for i in range(n):
            others = np.delete(indices, i)
            xi, phi, eta = rng.choice(others, size=3, replace=False)
            mutant = prev_pop[xi] + config.scale_factor * (prev_pop[phi] - prev_pop[eta])
            mutant = np.clip(mutant, lo, hi)
            pert = genotype_to_perturbation(mutant, s, t, c, length)
            try:
                probs = context.evaluate(pert)
            except BudgetExhaustedError:
                return finalize(gen - 1)
            trial_pop[i] = mutant
            trial_fit[i] = probs[context.true_label]
            best.update(pert, probs)
        # synchronous selection: strictly better trials replace their parents
        improved = trial_fit < prev_fit
        pop = np.where(improved[:, None], trial_pop, prev_pop)
        pop_fit = np.where(improved, trial_fit, prev_fit)
        trajectory.append(float(pop_fit.min()))
        if config.early_stop and best.misclassified:
            return finalize(gen, stopped=True)

    return finalize(config.generations)


def random_search_attack(context: AttackContext, n_evaluations: int = 2500,
                         rng: np.random.Generator | None = None) -> AttackResult:
    """Uniform random one-index perturbations as a search baseline.

    The reported best is the lowest-fitness misclassifying draw when one
    exists, otherwise the lowest-fitness draw overall, so `success` always
    means the reported perturbation defeats the oracle.
    """
    if n_evaluations < 1:
        raise ValueError("need at least one evaluation")
    if rng is None:
        rng = np.random.default_rng()
    s, t, c = context.indices.s, context.indices.t, context.indices.channels
    length = context.codebook.length

    eval_start = context.evaluations
    query_start = context.oracle_queries
    best_any = _BestTracker(context.true_label)
    best_mis = _BestTracker(context.true_label)
    trajectory: list[float] = []

    for _ in range(n_evaluations):
        x = int(rng.integers(0, s))
        y = int(rng.integers(0, t))
        values = tuple(int(v) for v in rng.integers(0, length, size=c))
        pert = Perturbation(x, y, values)
        try:
            probs = context.evaluate(pert)
        except BudgetExhaustedError:
            break
        best_any.update(pert, probs)
        if int(np.argmax(probs)) != context.true_label:
            best_mis.update(pert, probs)
        trajectory.append(best_any.fitness)

    chosen = best_mis if best_mis.perturbation is not None else best_any
    return chosen.result(
        trajectory,
        context.evaluations - eval_start,
        context.oracle_queries - query_start,
        0,
    )
