"""Successive halving and Hyperband over training-epoch budgets.

Successive halving trains a cohort of configurations in rounds: every round
the survivors continue (from checkpointed state, never from scratch) to the
round's cumulative budget, then the best ceil(count/eta) by validation loss
survive. Hyperband runs several such cohorts under different
count-versus-budget trade-offs and recommends the configuration with the
globally lowest recorded validation loss.

The budget unit is training epochs, capped at R per configuration.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

import numpy as np

from iqautoml.hyperspace import HyperConfig, HyperSpace, sample_config

_SEED_MASK = (1 << 64) - 1

STATUS_ALIVE = "alive"
STATUS_ELIMINATED = "eliminated"
STATUS_FAILED = "failed"
STATUS_COMPLETE = "complete"


class TrialFailure(Exception):
    """An evaluator could not produce a finite validation loss for a trial."""


class AllTrialsFailedError(RuntimeError):
    """Every trial in a round failed; the bracket cannot continue."""


@dataclass
class EvalOutcome:
    """What an evaluator returns: the trial's validation loss after training
    to the requested cumulative budget, its resume state, and the total epochs
    the trainer actually consumed (early stopping may keep it below budget)."""

    loss: float
    state: Any
    epochs_total: int


# evaluator(config, cumulative_budget_epochs, resume_state) -> EvalOutcome
Evaluator = Callable[[HyperConfig, int, Any], EvalOutcome]


@dataclass
class RungResult:
    rung: int
    budget: int
    loss: float
    epochs_total: int


@dataclass
class TrialRecord:
    config_id: int
    config: HyperConfig
    rungs: list[RungResult] = field(default_factory=list)
    status: str = STATUS_ALIVE
    state: Any = None
    diagnostics: str | None = None
    bracket: int | None = None

    @property
    def final_loss(self) -> float:
        return self.rungs[-1].loss if self.rungs else math.inf

    @property
    def epochs_consumed(self) -> int:
        return self.rungs[-1].epochs_total if self.rungs else 0


@dataclass(frozen=True)
class Bracket:
    s: int
    num_configs: int
    initial_budget: int
    eta: int

    def rung_table(self, R: int) -> list[tuple[int, int]]:
        """(survivor count, cumulative budget) per round, mirroring the run loop."""
        table = []
        count = self.num_configs
        k = 0
        while True:
            budget = min(self.initial_budget * self.eta**k, R)
            table.append((count, budget))
            if count == 1 or budget >= R:
                return table
            count = math.ceil(count / self.eta)
            k += 1


class TrialLogger:
    """Append-only newline-delimited JSON trial log.

    Canonical records drop the wall-time field so that two runs with the same
    seeds compare equal.
    """

    def __init__(self, path: str | Path | None = None):
        self.records: list[dict] = []
        self._fh = open(path, "w") if path is not None else None

    def log(self, **record) -> None:
        self.records.append(record)
        if self._fh is not None:
            self._fh.write(json.dumps(record, sort_keys=True) + "\n")
            self._fh.flush()

    def canonical_records(self) -> list[dict]:
        return [{k: v for k, v in rec.items() if k != "wall_time_s"} for rec in self.records]

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def successive_halving(
    configs: list[HyperConfig],
    r0: int,
    eta: int,
    R: int,
    evaluator: Evaluator,
    *,
    first_id: int = 0,
    bracket_s: int | None = None,
    logger: TrialLogger | None = None,
) -> list[TrialRecord]:
    """Run one successive-halving cohort; returns records ranked best-first.

    Round k trains all survivors to cumulative budget min(r0 * eta^k, R) and
    keeps the best ceil(count/eta) by validation loss, ties toward the lower
    config id. Rounds stop once one survivor remains or the budget cap R is
    reached. Failed trials are eliminated but keep their consumed budget.
    """
    if not configs:
        raise ValueError("successive halving needs at least one configuration")
    if r0 < 1 or R < 1:
        raise ValueError("budgets must be >= 1")
    if eta < 2:
        raise ValueError(f"eta must be >= 2, got {eta}")

    records = [
        TrialRecord(config_id=first_id + i, config=c, bracket=bracket_s)
        for i, c in enumerate(configs)
    ]
    alive = list(records)
    k = 0
    while True:
        budget = min(r0 * eta**k, R)
        for rec in alive:
            started = time.perf_counter()
            try:
                outcome = evaluator(rec.config, budget, rec.state)
                if not np.isfinite(outcome.loss):
                    raise TrialFailure(f"non-finite loss {outcome.loss}")
                rec.state = outcome.state
                rec.rungs.append(RungResult(k, budget, outcome.loss, outcome.epochs_total))
            except TrialFailure as exc:
                rec.status = STATUS_FAILED
                rec.diagnostics = str(exc)
            if logger is not None:
                logger.log(
                    config_id=rec.config_id,
                    bracket=bracket_s,
                    rung=k,
                    budget=budget,
                    cumulative_epochs=rec.epochs_consumed,
                    valid_loss=rec.rungs[-1].loss if rec.status != STATUS_FAILED else None,
                    status=rec.status,
                    wall_time_s=time.perf_counter() - started,
                    config=rec.config.to_dict(),
                )

        alive = [r for r in alive if r.status != STATUS_FAILED]
        if not alive:
            raise AllTrialsFailedError(
                f"all trials failed in rung {k}"
                + (f" of bracket {bracket_s}" if bracket_s is not None else "")
            )
        alive.sort(key=lambda r: (r.final_loss, r.config_id))
        if len(alive) == 1 or budget >= R:
            for rec in alive:
                rec.status = STATUS_COMPLETE
            break
        keep = math.ceil(len(alive) / eta)
        for rec in alive[keep:]:
            rec.status = STATUS_ELIMINATED
        alive = alive[:keep]
        k += 1

    def rank_key(rec: TrialRecord):
        return (rec.status == STATUS_FAILED, rec.final_loss, rec.config_id)

    return sorted(records, key=rank_key)


def compute_brackets(R: int, eta: int) -> list[Bracket]:
    """The bracket schedule: s from s_max down to 0 with the canonical
    n_s = ceil((s_max+1)/(s+1) * eta^s) and r_s = max(1, floor(R / eta^s))."""
    if R < 1:
        raise ValueError(f"R must be >= 1, got {R}")
    if eta < 2:
        raise ValueError(f"eta must be >= 2, got {eta}")
    s_max = 0
    while eta ** (s_max + 1) <= R:
        s_max += 1
    brackets = []
    for s in range(s_max, -1, -1):
        n_s = math.ceil(Fraction((s_max + 1) * eta**s, s + 1))
        r_s = max(1, R // eta**s)
        brackets.append(Bracket(s=s, num_configs=n_s, initial_budget=r_s, eta=eta))
    return brackets


@dataclass
class HyperbandResult:
    best_config: HyperConfig
    best_record: TrialRecord
    records: list[TrialRecord]
    brackets: list[Bracket]
    total_epochs: int
    sampling_stats: dict

    @property
    def best_loss(self) -> float:
        return self.best_record.final_loss


def hyperband(
    space: HyperSpace,
    R: int,
    eta: int,
    evaluator: Evaluator,
    seed: int = 0,
    *,
    logger: TrialLogger | None = None,
) -> HyperbandResult:
    """Run every bracket and return the global validation-loss argmin.

    Configurations are sampled fresh per bracket from one seeded stream;
    config ids increase globally so tie-breaks are stable. A bracket whose
    trials all fail is logged and skipped.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed & _SEED_MASK, 0xB0]))
    brackets = compute_brackets(R, eta)
    sampling_stats: dict = {}
    records: list[TrialRecord] = []
    next_id = 0
    for bracket in brackets:
        configs = [
            sample_config(space, rng, stats=sampling_stats)
            for _ in range(bracket.num_configs)
        ]
        try:
            ranked = successive_halving(
                configs,
                bracket.initial_budget,
                eta,
                R,
                evaluator,
                first_id=next_id,
                bracket_s=bracket.s,
                logger=logger,
            )
        except AllTrialsFailedError as exc:
            if logger is not None:
                logger.log(event="bracket_failed", bracket=bracket.s, error=str(exc))
            next_id += bracket.num_configs
            continue
        records.extend(ranked)
        next_id += bracket.num_configs

    evaluated = [r for r in records if r.rungs]
    if not evaluated:
        raise AllTrialsFailedError("no bracket produced a completed trial")
    best = min(evaluated, key=lambda r: (r.final_loss, r.config_id))
    return HyperbandResult(
        best_config=best.config,
        best_record=best,
        records=records,
        brackets=brackets,
        total_epochs=sum(r.epochs_consumed for r in records),
        sampling_stats=sampling_stats,
    )


@dataclass
class RandomSearchResult:
    best_config: HyperConfig
    best_record: TrialRecord
    records: list[TrialRecord]
    total_epochs: int

    @property
    def best_loss(self) -> float:
        return self.best_record.final_loss


def random_search_baseline(
    space: HyperSpace,
    trial_count: int,
    budget_each: int,
    evaluator: Evaluator,
    seed: int = 0,
    *,
    logger: TrialLogger | None = None,
) -> RandomSearchResult:
    """Flat baseline: trial_count independent samples, each trained to budget_each."""
    if trial_count < 1:
        raise ValueError("trial_count must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([seed & _SEED_MASK, 0xB1]))
    records = []
    for i in range(trial_count):
        config = sample_config(space, rng)
        rec = TrialRecord(config_id=i, config=config)
        started = time.perf_counter()
        try:
            outcome = evaluator(config, budget_each, None)
            if not np.isfinite(outcome.loss):
                raise TrialFailure(f"non-finite loss {outcome.loss}")
            rec.state = outcome.state
            rec.rungs.append(RungResult(0, budget_each, outcome.loss, outcome.epochs_total))
            rec.status = STATUS_COMPLETE
        except TrialFailure as exc:
            rec.status = STATUS_FAILED
            rec.diagnostics = str(exc)
        if logger is not None:
            logger.log(
                config_id=rec.config_id,
                bracket=None,
                rung=0,
                budget=budget_each,
                cumulative_epochs=rec.epochs_consumed,
                valid_loss=rec.rungs[-1].loss if rec.rungs else None,
                status=rec.status,
                wall_time_s=time.perf_counter() - started,
                config=config.to_dict(),
            )
        records.append(rec)
    evaluated = [r for r in records if r.rungs]
    if not evaluated:
        raise AllTrialsFailedError("every random-search trial failed")
    best = min(evaluated, key=lambda r: (r.final_loss, r.config_id))
    return RandomSearchResult(
        best_config=best.config,
        best_record=best,
        records=records,
        total_epochs=sum(r.epochs_consumed for r in records),
    )


def write_recommendation(
    path: str | Path,
    result: HyperbandResult,
    *,
    seed: int,
    R: int,
    eta: int,
) -> Path:
    """Standalone JSON document with the winning config and provenance."""
    path = Path(path)
    doc = {
        "winner": result.best_config.to_dict(),
        "valid_loss": result.best_record.final_loss,
        "config_id": result.best_record.config_id,
        "provenance": {
            "seed": seed,
            "R": R,
            "eta": eta,
            "total_epochs": result.total_epochs,
            "brackets": [
                {"s": b.s, "num_configs": b.num_configs, "initial_budget": b.initial_budget}
                for b in result.brackets
            ],
            "sampling": result.sampling_stats,
        },
    }
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return path
