"""
GRPO module - group-relative advantages, the clipped KL-regularised
objective with its analytic gradient, and the training loop.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.core.actions import Action, ActionType
from app.core.errors import DimensionMismatchError, NonFiniteError, SnapshotMismatchError
from app.core.policy import Distribution, PolicyParams, PolicySample
from app.core.reward import RewardBreakdown, RewardConfig, score_on_map
from app.core.windowing import EntropyMap, Rect

logger = logging.getLogger(__name__)


class TrainConfig(BaseModel):
    """
    GRPO hyperparameters. G, clip ranges and beta follow the published
    defaults; the learning rate is sized for the desk-scale policy.
    """

    model_config = ConfigDict(frozen=True)

    group_size: int = Field(default=16, ge=2)
    clip_low: float = Field(default=0.2, gt=0, lt=1)
    clip_high: float = Field(default=0.28, gt=0)
    kl_beta: float = Field(default=1e-4, ge=0)
    learning_rate: float = Field(default=1e-2, gt=0)
    iterations: int = Field(default=300, ge=0)
    states_per_iter: int = Field(default=32, ge=1)
    std_floor: float = Field(default=1e-8, gt=0)
    seed: int = 0
    checkpoint_every: int = Field(default=50, ge=1)
    action_types: Tuple[str, ...] = ("click", "scroll")

    @field_validator("action_types")
    @classmethod
    def _distinct_types(cls, v: Tuple[str, ...]) -> Tuple[str, ...]:
        if not v:
            raise ValueError("action_types must not be empty")
        labels = [ActionType.parse(t).label for t in v]
        if len(set(labels)) != len(labels):
            raise ValueError("action_types must be distinct")
        return tuple(labels)

    def parsed_action_types(self) -> Tuple[ActionType, ...]:
        return tuple(ActionType.parse(t) for t in self.action_types)


@dataclass(frozen=True)
class TrainingState:
    """One state s_t of the task source: its entropy map and ground-truth action."""

    state_id: str
    emap: EntropyMap
    target: Action
    target_rect: Optional[Rect] = None


@dataclass(frozen=True)
class GroupEntry:
    action: PolicySample
    reward: RewardBreakdown
    old_log_prob: float
    ref_log_prob: float


@dataclass(frozen=True)
class GroupSample:
    state_id: str
    entries: Tuple[GroupEntry, ...]
    advantages: np.ndarray
    old_digest: str

    @property
    def rewards(self) -> np.ndarray:
        return np.array([e.reward.combined for e in self.entries])


def advantages(rewards: Sequence[float], std_floor: float = 1e-8) -> np.ndarray:
    """(r - mean) / population std; a group flatter than std_floor gets all zeros."""
    r = np.asarray(rewards, dtype=np.float64)
    if r.size < 2:
        raise ValueError(f"group size must be at least 2, got {r.size}")
    std = float(r.std())
    if std < std_floor:
        return np.zeros_like(r)
    return (r - r.mean()) / max(std, std_floor)


def kl_estimate(ref_log_prob: float, cur_log_prob: float) -> float:
    """rho - ln rho - 1 with rho = pi_ref / pi_theta; never negative."""
    d = ref_log_prob - cur_log_prob
    with np.errstate(over="ignore"):
        value = float(np.expm1(d)) - d
    return max(0.0, value)


def clipped_surrogate(ratio: float, advantage: float, clip_low: float, clip_high: float) -> float:
    """min(rho A, clip(rho, 1 - eps_low, 1 + eps_high) A)."""
    clipped = min(max(ratio, 1.0 - clip_low), 1.0 + clip_high)
    return min(ratio * advantage, clipped * advantage)


def surrogate_weight(ratio: float, advantage: float, clip_low: float, clip_high: float) -> float:
    """
    d surrogate / d log pi_theta. Zero where the clipped branch is active and
    binding, rho * A elsewhere.
    """
    if advantage > 0 and ratio > 1.0 + clip_high:
        return 0.0
    if advantage < 0 and ratio < 1.0 - clip_low:
        return 0.0
    return ratio * advantage


def objective(
    group: GroupSample,
    params: PolicyParams,
    emap: EntropyMap,
    cfg: TrainConfig,
    old_params: Optional[PolicyParams] = None,
) -> Tuple[float, PolicyParams]:
    """
    Group objective J = mean_g [surrogate_g - kl_beta * kl_g] and its gradient
    with respect to the current params.
    """
    if old_params is not None and old_params.digest() != group.old_digest:
        raise SnapshotMismatchError(
            f"group {group.state_id} was sampled under {group.old_digest[:12]}, "
            f"old policy is {old_params.digest()[:12]}"
        )

    dist = Distribution(params, emap)
    terms: List[float] = []
    weights: List[float] = []
    outcomes = []
    for entry, adv in zip(group.entries, group.advantages):
        adv = float(adv)
        cur = dist.log_prob(entry.action.outcome)
        with np.errstate(over="ignore"):
            ratio = float(np.exp(cur - entry.old_log_prob))
            rho_ref = float(np.exp(entry.ref_log_prob - cur))

        surrogate = clipped_surrogate(ratio, adv, cfg.clip_low, cfg.clip_high)
        terms.append(surrogate - cfg.kl_beta * kl_estimate(entry.ref_log_prob, cur))
        # d/dcur of -beta * (rho_ref - ln rho_ref - 1) is -beta * (1 - rho_ref)
        weights.append(surrogate_weight(ratio, adv, cfg.clip_low, cfg.clip_high) - cfg.kl_beta * (1.0 - rho_ref))
        outcomes.append(entry.action.outcome)

    g = len(terms)
    value = math.fsum(terms) / g
    grad = dist.weighted_grad(outcomes, [w / g for w in weights])
    return value, grad


def sample_group(
    state: TrainingState,
    old_params: PolicyParams,
    ref_params: PolicyParams,
    reward_cfg: RewardConfig,
    group_size: int,
    rng: np.random.Generator,
    std_floor: float = 1e-8,
) -> GroupSample:
    """Draw G actions from pi_old for one state, score them and standardise the rewards."""
    old_dist = Distribution(old_params, state.emap)
    ref_dist = Distribution(ref_params, state.emap)

    entries = []
    for draw in old_dist.draw(rng, group_size):
        reward = score_on_map(state.emap, draw.to_action(), state.target, reward_cfg)
        entries.append(
            GroupEntry(
                action=draw,
                reward=reward,
                old_log_prob=draw.log_prob,
                ref_log_prob=ref_dist.log_prob(draw.outcome),
            )
        )
    adv = advantages([e.reward.combined for e in entries], std_floor)
    return GroupSample(state.state_id, tuple(entries), adv, old_params.digest())


def expected_reward(
    params: PolicyParams,
    emap: EntropyMap,
    target: Action,
    reward_cfg: RewardConfig,
) -> float:
    """Exact E_pi[r] by enumerating every (type, cell) outcome."""
    dist = Distribution(params, emap)
    n_types, rows, cols = params.shape
    terms = []
    for a in range(n_types):
        for i in range(1, rows + 1):
            for j in range(1, cols + 1):
                action = Action(kind=params.action_types[a], points=(emap.cell_center(i, j),))
                r = score_on_map(emap, action, target, reward_cfg).combined
                terms.append(float(dist.probs[a, i - 1, j - 1]) * r)
    return math.fsum(terms)


def _mean(values: List[float]) -> Optional[float]:
    return math.fsum(values) / len(values) if values else None


def _pick_states(env: Sequence[TrainingState], count: int, rng: np.random.Generator) -> List[TrainingState]:
    if count >= len(env):
        return list(env)
    chosen = np.sort(rng.choice(len(env), size=count, replace=False))
    return [env[int(k)] for k in chosen]


def train(
    env: Sequence[TrainingState],
    cfg: TrainConfig,
    reward_cfg: RewardConfig,
    init_params: Optional[PolicyParams] = None,
    start_iteration: int = 0,
    on_iteration: Optional[Callable[[int, PolicyParams, dict], None]] = None,
) -> Tuple[PolicyParams, List[dict]]:
    """
    Plain gradient ascent on the summed group objective.

    Each iteration snapshots pi_old, samples one group per state, and takes a
    single step (one inner update per snapshot). Iteration randomness comes
    from default_rng([seed, iteration]), so a run resumed at `start_iteration`
    continues exactly like the uninterrupted one.
    """
    if not env:
        raise ValueError("empty task source")

    rows, cols = env[0].emap.rows, env[0].emap.cols
    for state in env:
        if (state.emap.rows, state.emap.cols) != (rows, cols):
            raise DimensionMismatchError(
                f"state {state.state_id} has a {state.emap.rows}x{state.emap.cols} grid, expected {rows}x{cols}"
            )

    action_types = cfg.parsed_action_types()
    ref = PolicyParams.zeros(action_types, rows, cols)
    params = init_params if init_params is not None else ref
    if (params.rows, params.cols) != (rows, cols) or params.action_types != action_types:
        raise DimensionMismatchError(
            f"initial params {params.shape} do not match {len(action_types)} types x {rows}x{cols} grid"
        )

    metrics: List[dict] = []
    for it in range(start_iteration, cfg.iterations):
        rng = np.random.default_rng([cfg.seed, it])
        old = params
        grad_total = PolicyParams.zeros(action_types, rows, cols)

        objectives, rewards, r_ws, r_ds, distances, kls, matches = [], [], [], [], [], [], []
        for state in _pick_states(env, cfg.states_per_iter, rng):
            group = sample_group(state, old, ref, reward_cfg, cfg.group_size, rng, cfg.std_floor)
            value, grad = objective(group, params, state.emap, cfg, old_params=old)
            grad_total = grad_total.scaled_add(grad, 1.0)
            objectives.append(value)

            for entry in group.entries:
                rewards.append(entry.reward.combined)
                r_ws.append(entry.reward.r_w)
                r_ds.append(entry.reward.r_d)
                matches.append(1.0 if entry.reward.type_matched else 0.0)
                kls.append(kl_estimate(entry.ref_log_prob, entry.old_log_prob))
                if entry.reward.distance_px is not None:
                    distances.append(entry.reward.distance_px)
            logger.debug(f"iter {it} state {state.state_id}: J={value:.6f}")

        record = {
            "iter": it,
            "mean_reward": _mean(rewards),
            "mean_r_w": _mean(r_ws),
            "mean_r_d": _mean(r_ds),
            "mean_distance_px": _mean(distances),
            "kl": _mean(kls),
            "objective": _mean(objectives),
            "grad_norm": grad_total.norm(),
            "type_match_rate": _mean(matches),
        }

        if not (math.isfinite(record["objective"]) and grad_total.is_finite()):
            raise NonFiniteError(f"non-finite objective or gradient at iteration {it}", record)

        params = params.scaled_add(grad_total, cfg.learning_rate)
        metrics.append(record)
        if on_iteration is not None:
            on_iteration(it, params, record)
        logger.info(
            f"iter {it}: reward={record['mean_reward']:.4f} "
            f"dist={record['mean_distance_px'] or 0.0:.1f}px grad_norm={record['grad_norm']:.4f}"
        )

    return params, metrics
