"""
Policy module - a desk-scale softmax policy over (action type, grid cell) pairs.

    logit(a, i, j) = alpha[a] + beta * h_norm[i, j] + gamma[i, j]

where h_norm is the entropy map normalised by (max H + eps). Outcomes are
addressed as (type_index, i, j): type_index is 0-based into
`params.action_types`, (i, j) is the 1-indexed grid cell.
"""

import hashlib
import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from app.core.actions import Action, ActionType
from app.core.errors import DimensionMismatchError
from app.core.windowing import EntropyMap

logger = logging.getLogger(__name__)

FEATURE_EPSILON = 1e-6

Outcome = Tuple[int, int, int]


@dataclass(frozen=True, eq=False)
class PolicyParams:
    """
    Policy parameters. Also used as the container for gradients, which share
    the same shape. Arrays are stored read-only.
    """

    action_types: Tuple[ActionType, ...]
    alpha: np.ndarray
    beta: float
    gamma: np.ndarray

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=np.float64)
        gamma = np.array(self.gamma, dtype=np.float64)
        if alpha.shape != (len(self.action_types),):
            raise DimensionMismatchError(
                f"alpha has shape {alpha.shape}, expected ({len(self.action_types)},)"
            )
        if gamma.ndim != 2 or min(gamma.shape) < 1:
            raise DimensionMismatchError(f"gamma must be a non-empty 2-D array, got {gamma.shape}")
        alpha.flags.writeable = False
        gamma.flags.writeable = False
        object.__setattr__(self, "action_types", tuple(self.action_types))
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "beta", float(self.beta))

    @classmethod
    def zeros(cls, action_types: Sequence[ActionType], rows: int, cols: int) -> "PolicyParams":
        """Uniform policy; the deterministic starting point and reference snapshot."""
        return cls(tuple(action_types), np.zeros(len(action_types)), 0.0, np.zeros((rows, cols)))

    @property
    def rows(self) -> int:
        return self.gamma.shape[0]

    @property
    def cols(self) -> int:
        return self.gamma.shape[1]

    @property
    def shape(self) -> Tuple[int, int, int]:
        return len(self.action_types), self.rows, self.cols

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.alpha)) and math.isfinite(self.beta) and np.all(np.isfinite(self.gamma)))

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(",".join(t.label for t in self.action_types).encode("utf-8"))
        h.update(self.alpha.tobytes())
        h.update(np.float64(self.beta).tobytes())
        h.update(self.gamma.tobytes())
        return h.hexdigest()

    def scaled_add(self, other: "PolicyParams", step: float) -> "PolicyParams":
        """self + step * other."""
        return PolicyParams(
            self.action_types,
            self.alpha + step * other.alpha,
            self.beta + step * other.beta,
            self.gamma + step * other.gamma,
        )

    def norm(self) -> float:
        return math.sqrt(float(np.dot(self.alpha, self.alpha)) + self.beta ** 2 + float(np.sum(self.gamma ** 2)))

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.alpha, [self.beta], self.gamma.ravel()])

    def from_vector(self, v: np.ndarray) -> "PolicyParams":
        """Params of this shape filled from a flat vector (see to_vector)."""
        a = len(self.action_types)
        return PolicyParams(self.action_types, v[:a], v[a], np.reshape(v[a + 1:], self.gamma.shape))


@dataclass(frozen=True)
class PolicySample:
    kind: ActionType
    type_index: int
    cell: Tuple[int, int]
    point: Tuple[float, float]
    log_prob: float

    @property
    def outcome(self) -> Outcome:
        return self.type_index, self.cell[0], self.cell[1]

    def to_action(self) -> Action:
        return Action(kind=self.kind, points=(self.point,))


class Distribution:
    """The policy's joint distribution on one entropy map, computed once and reused."""

    def __init__(self, params: PolicyParams, emap: EntropyMap):
        if (params.rows, params.cols) != (emap.rows, emap.cols):
            raise DimensionMismatchError(
                f"policy grid {params.rows}x{params.cols} does not match map {emap.rows}x{emap.cols}"
            )
        self.params = params
        self.emap = emap
        self.features = emap.normalized(FEATURE_EPSILON)
        self.logits = params.alpha[:, None, None] + params.beta * self.features[None] + params.gamma[None]

        shifted = self.logits - self.logits.max()
        self.log_probs = shifted - math.log(float(np.exp(shifted).sum()))
        self.probs = np.exp(self.log_probs)
        self.cell_marginal = self.probs.sum(axis=0)
        self.type_marginal = self.probs.sum(axis=(1, 2))
        self.mean_feature = float((self.cell_marginal * self.features).sum())

    def _check(self, chosen: Outcome) -> Tuple[int, int, int]:
        a, i, j = chosen
        n_types, rows, cols = self.params.shape
        if not (0 <= a < n_types and 1 <= i <= rows and 1 <= j <= cols):
            raise IndexError(f"outcome {chosen} outside {n_types} types x {rows}x{cols} grid")
        return a, i - 1, j - 1

    def log_prob(self, chosen: Outcome) -> float:
        a, r, c = self._check(chosen)
        return float(self.log_probs[a, r, c])

    def grad_log_prob(self, chosen: Outcome) -> PolicyParams:
        return self.weighted_grad([chosen], [1.0])

    def weighted_grad(self, chosen: Sequence[Outcome], weights: Sequence[float]) -> PolicyParams:
        """sum_g w_g * grad log pi(o_g), using grad log pi(o) = onehot(o) - E_pi[onehot]."""
        g_alpha = np.zeros(len(self.params.action_types))
        g_gamma = np.zeros((self.params.rows, self.params.cols))
        g_beta = 0.0
        total = 0.0
        for outcome, w in zip(chosen, weights):
            a, r, c = self._check(outcome)
            g_alpha[a] += w
            g_gamma[r, c] += w
            g_beta += w * self.features[r, c]
            total += w
        return PolicyParams(
            self.params.action_types,
            g_alpha - total * self.type_marginal,
            g_beta - total * self.mean_feature,
            g_gamma - total * self.cell_marginal,
        )

    def draw(self, rng: np.random.Generator, count: int = 1) -> List[PolicySample]:
        """Inverse-CDF sampling over the flattened (type, row, col) outcomes."""
        flat = self.probs.ravel()
        cdf = np.cumsum(flat)
        u = rng.random(count) * cdf[-1]
        indices = np.minimum(np.searchsorted(cdf, u, side="right"), flat.size - 1)

        samples = []
        _, rows, cols = self.params.shape
        for idx in indices:
            a, rem = divmod(int(idx), rows * cols)
            r, c = divmod(rem, cols)
            samples.append(
                PolicySample(
                    kind=self.params.action_types[a],
                    type_index=a,
                    cell=(r + 1, c + 1),
                    point=self.emap.cell_center(r + 1, c + 1),
                    log_prob=float(self.log_probs[a, r, c]),
                )
            )
        return samples


def logits(params: PolicyParams, emap: EntropyMap) -> np.ndarray:
    """|A| x M x N logit array."""
    return Distribution(params, emap).logits


def probabilities(params: PolicyParams, emap: EntropyMap) -> np.ndarray:
    return Distribution(params, emap).probs


def sample(params: PolicyParams, emap: EntropyMap, rng: np.random.Generator) -> PolicySample:
    """One joint-softmax draw; the point is the chosen cell's center."""
    return Distribution(params, emap).draw(rng, 1)[0]


def log_prob(params: PolicyParams, emap: EntropyMap, chosen: Outcome) -> float:
    return Distribution(params, emap).log_prob(chosen)


def log_prob_grad(params: PolicyParams, emap: EntropyMap, chosen: Outcome) -> PolicyParams:
    """Closed-form gradient of log pi(chosen) with respect to (alpha, beta, gamma)."""
    return Distribution(params, emap).grad_log_prob(chosen)
