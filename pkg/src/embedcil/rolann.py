"""Closed-form regularized one-layer classifier (ROLANN).

One sigmoid output neuron per class, trained without iteration: each neuron
keeps a *knowledge triple* -- a moment vector plus the economy-SVD factors of
the slope-weighted, bias-augmented design matrix -- from which its weight
vector is re-solved in closed form after every batch.  Because knowledge
triples combine exactly (moments add, SVD factors concatenate and re-factor),
training over a stream of batches yields the same weights as training once on
their union, and two independently trained classifiers can be merged without
revisiting any data.

All matrices use column-per-sample orientation: ``X`` is ``(input_dim, n)``.
Knowledge and solves are kept in float64 regardless of how embeddings are
stored on disk.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from .errors import NotTrainedError, NumericalError

# Singular values below max(S) * RANK_TOLERANCE are dropped together with
# their basis columns after every factorization; bounds rank growth across
# merges without touching full-rank solves (the moment vector stays inside
# the retained column space).
RANK_TOLERANCE = 1e-10

# closest float64 neighbours of 0 and 1 inside the open unit interval;
# sigmoid outputs are clipped here so they stay strictly inside (0, 1)
# and their logit stays finite even for saturating pre-activations
_UNIT_OPEN_LO = np.nextafter(0.0, 1.0)
_UNIT_OPEN_HI = np.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class LogisticActivation:
    """Logistic-sigmoid output activation with target clamping.

    Binary targets {0, 1} have an infinite pre-activation under the inverse
    sigmoid, so targets are clamped to ``[clamp_epsilon, 1 - clamp_epsilon]``
    before inversion.  ``clamp_epsilon = 0.5`` is the degenerate symmetry
    point (both classes map to 0.5) and is allowed but useless for learning.
    """

    clamp_epsilon: float = 0.05
    kind: str = "logistic"

    def __post_init__(self) -> None:
        if self.kind != "logistic":
            raise ValueError(f"unsupported activation kind: {self.kind!r}")
        if not (0.0 < self.clamp_epsilon <= 0.5):
            raise ValueError(
                f"clamp_epsilon must be in (0, 0.5], got {self.clamp_epsilon}"
            )

    def forward(self, x):
        """Map pre-activations to the open interval (0, 1)."""
        return np.clip(expit(x), _UNIT_OPEN_LO, _UNIT_OPEN_HI)

    def inverse(self, y):
        """Map outputs in (0, 1) back to pre-activations (the logit)."""
        return logit(y)

    def derivative(self, x):
        """Slope of the activation at pre-activation ``x``; always positive."""
        s = self.forward(x)
        return s * (1.0 - s)


@dataclass
class NeuronKnowledge:
    """Accumulated sufficient statistics of one output neuron.

    ``basis`` has orthonormal columns, ``singular`` the matching singular
    values in descending order, and ``moment`` the slope-weighted target
    moment vector.  Together they determine the neuron's ridge weights for
    any regularization strength.  The all-zero state with
    ``sample_count == 0`` is the valid initial (empty) state.
    """

    moment: np.ndarray  # (d_aug,)
    basis: np.ndarray  # (d_aug, r), orthonormal columns
    singular: np.ndarray  # (r,), descending, nonnegative
    sample_count: int = 0

    @classmethod
    def empty(cls, d_aug: int) -> "NeuronKnowledge":
        return cls(
            moment=np.zeros(d_aug),
            basis=np.zeros((d_aug, 0)),
            singular=np.zeros(0),
            sample_count=0,
        )

    @property
    def is_empty(self) -> bool:
        return self.sample_count == 0

    @property
    def rank(self) -> int:
        return self.singular.size

    def copy(self) -> "NeuronKnowledge":
        return NeuronKnowledge(
            moment=self.moment.copy(),
            basis=self.basis.copy(),
            singular=self.singular.copy(),
            sample_count=self.sample_count,
        )


def _economy_svd(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Left factors of the economy SVD, truncated at RANK_TOLERANCE."""
    try:
        u, s, _ = np.linalg.svd(matrix, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed to converge: {exc}") from exc
    if s.size == 0 or s[0] <= 0.0:
        return u[:, :0], s[:0]
    keep = s > s[0] * RANK_TOLERANCE
    return u[:, keep], s[keep]


def augment_bias(X: np.ndarray) -> np.ndarray:
    """Prepend an all-ones bias row to a ``(d, n)`` sample matrix."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {X.shape}")
    if X.shape[1] < 1:
        raise ValueError("need at least one sample column")
    return np.vstack([np.ones((1, X.shape[1])), X])


def encode_targets(
    labels: np.ndarray,
    target_class: int,
    activation: LogisticActivation,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One-vs-rest targets for a single output neuron.

    Returns ``(y, pre_activation, slope)`` where ``y`` is the clamped binary
    target (1 - eps for the neuron's own class, eps otherwise),
    ``pre_activation`` its inverse activation, and ``slope`` the activation
    derivative ``y * (1 - y)`` evaluated there.
    """
    labels = np.asarray(labels)
    eps = activation.clamp_epsilon
    y = np.where(labels == target_class, 1.0 - eps, eps)
    return y, activation.inverse(y), y * (1.0 - y)


def train_neuron(
    knowledge: NeuronKnowledge,
    X_aug: np.ndarray,
    pre_activation: np.ndarray,
    slope: np.ndarray,
) -> NeuronKnowledge:
    """Absorb one batch into a neuron's knowledge, returning the new triple.

    The batch contributes its own moment vector and economy-SVD factors of
    the slope-weighted design matrix; existing factors are combined by
    factoring the horizontal concatenation of both scaled bases, so the
    result is identical (up to rounding) to a single factorization of all
    data seen so far.
    """
    X_aug = np.asarray(X_aug, dtype=np.float64)
    pre_activation = np.asarray(pre_activation, dtype=np.float64)
    slope = np.asarray(slope, dtype=np.float64)
    n = X_aug.shape[1]
    if pre_activation.shape != (n,) or slope.shape != (n,):
        raise ValueError(
            f"batch size mismatch: X_aug has {n} columns, targets have "
            f"shapes {pre_activation.shape} and {slope.shape}"
        )
    if not knowledge.is_empty and X_aug.shape[0] != knowledge.moment.shape[0]:
        raise ValueError(
            f"dimension mismatch: knowledge is {knowledge.moment.shape[0]}-d, "
            f"batch is {X_aug.shape[0]}-d"
        )
    if np.any(slope <= 0.0):
        raise ValueError("activation slopes must be strictly positive")

    batch_moment = X_aug @ (slope * slope * pre_activation)
    batch_basis, batch_singular = _economy_svd(X_aug * slope[None, :])

    if knowledge.is_empty:
        basis, singular = batch_basis, batch_singular
        moment = knowledge.moment + batch_moment
    else:
        moment = knowledge.moment + batch_moment
        scaled = np.hstack(
            [
                knowledge.basis * knowledge.singular[None, :],
                batch_basis * batch_singular[None, :],
            ]
        )
        basis, singular = _economy_svd(scaled)

    return NeuronKnowledge(
        moment=moment,
        basis=basis,
        singular=singular,
        sample_count=knowledge.sample_count + n,
    )


def merge_knowledge(a: NeuronKnowledge, b: NeuronKnowledge) -> NeuronKnowledge:
    """Combine two knowledge triples of the same neuron without retraining."""
    if a.is_empty:
        return b.copy()
    if b.is_empty:
        return a.copy()
    if a.moment.shape != b.moment.shape:
        raise ValueError(
            f"dimension mismatch: {a.moment.shape[0]} vs {b.moment.shape[0]}"
        )
    scaled = np.hstack(
        [a.basis * a.singular[None, :], b.basis * b.singular[None, :]]
    )
    basis, singular = _economy_svd(scaled)
    return NeuronKnowledge(
        moment=a.moment + b.moment,
        basis=basis,
        singular=singular,
        sample_count=a.sample_count + b.sample_count,
    )


def solve_weights(knowledge: NeuronKnowledge, regularization: float) -> np.ndarray:
    """Closed-form ridge weights for one neuron.

    Computes ``basis @ diag(1 / (singular^2 + reg)) @ basis.T @ moment``
    through the diagonal reciprocal; no dense matrix is ever inverted.
    """
    if regularization <= 0.0:
        raise ValueError(f"regularization must be positive, got {regularization}")
    if knowledge.is_empty:
        raise NotTrainedError("cannot solve weights of an empty neuron")
    if knowledge.rank == 0:
        return np.zeros_like(knowledge.moment)
    projected = knowledge.basis.T @ knowledge.moment
    return knowledge.basis @ (projected / (knowledge.singular**2 + regularization))


class ROLANNClassifier:
    """Expandable one-layer classifier with per-class knowledge triples.

    Classes are added over time; insertion order defines the output-neuron
    order and breaks prediction ties (earliest inserted wins).  Every
    training batch updates *all* output neurons: samples of other classes
    act as negatives.  Not safe for concurrent training calls; prediction
    is read-only and safe once training has returned.

    Parameters
    ----------
    input_dim : int
        Embedding dimensionality D (without the bias coordinate).
    regularization : float
        Ridge strength shared by all neurons.
    activation : LogisticActivation, optional
        Output activation; defaults to a logistic sigmoid with 0.05 clamping.
    """

    def __init__(
        self,
        input_dim: int,
        regularization: float = 0.01,
        activation: LogisticActivation | None = None,
    ):
        if input_dim < 1:
            raise ValueError(f"input_dim must be positive, got {input_dim}")
        if regularization <= 0.0:
            raise ValueError(
                f"regularization must be positive, got {regularization}"
            )
        self.input_dim = int(input_dim)
        self.regularization = float(regularization)
        self.activation = activation or LogisticActivation()
        self._knowledge: dict[int, NeuronKnowledge] = {}
        self._weights: dict[int, np.ndarray] = {}
        # frugality counters, deterministic given the training sequence
        self.svd_calls = 0
        self.samples_absorbed = 0

    # -- introspection ----------------------------------------------------

    @property
    def classes(self) -> list[int]:
        """Class ids in insertion (output-neuron) order."""
        return list(self._knowledge)

    @property
    def num_classes(self) -> int:
        return len(self._knowledge)

    def knowledge(self, class_id: int) -> NeuronKnowledge:
        return self._knowledge[class_id]

    def weights(self, class_id: int) -> np.ndarray:
        """Bias-augmented weight vector; index 0 is the bias."""
        return self._weights[class_id]

    # -- construction -----------------------------------------------------

    def add_classes(self, class_ids) -> "ROLANNClassifier":
        """Add output neurons for new classes, with no prior knowledge."""
        incoming = [int(c) for c in class_ids]
        if len(set(incoming)) != len(incoming):
            raise ValueError(f"duplicate class ids in {incoming}")
        collisions = [c for c in incoming if c in self._knowledge]
        if collisions:
            raise ValueError(f"classes already present: {collisions}")
        for c in incoming:
            self._knowledge[c] = NeuronKnowledge.empty(self.input_dim + 1)
            self._weights[c] = np.zeros(self.input_dim + 1)
        return self

    # -- training ---------------------------------------------------------

    def partial_fit(self, X: np.ndarray, labels: np.ndarray) -> "ROLANNClassifier":
        """Absorb a batch; columns of ``X`` are samples.

        Every output neuron is updated, whether or not its class occurs in
        ``labels``, and its weights are re-solved afterwards.  An empty
        batch is a no-op.  All labels must already be known classes.
        """
        X = np.asarray(X, dtype=np.float64)
        labels = np.asarray(labels)
        if X.ndim != 2 or X.shape[0] != self.input_dim:
            raise ValueError(
                f"expected X of shape ({self.input_dim}, n), got {X.shape}"
            )
        if labels.shape != (X.shape[1],):
            raise ValueError(
                f"labels shape {labels.shape} does not match {X.shape[1]} samples"
            )
        if X.shape[1] == 0:
            return self
        unknown = sorted(set(labels.tolist()) - set(self._knowledge))
        if unknown:
            raise ValueError(f"labels reference unknown classes: {unknown}")

        X_aug = augment_bias(X)
        for class_id, knowledge in self._knowledge.items():
            _, pre_activation, slope = encode_targets(
                labels, class_id, self.activation
            )
            self.svd_calls += 1 if knowledge.is_empty else 2
            updated = train_neuron(knowledge, X_aug, pre_activation, slope)
            self._knowledge[class_id] = updated
            self._weights[class_id] = solve_weights(updated, self.regularization)
        self.samples_absorbed += X.shape[1]
        return self

    # -- inference --------------------------------------------------------

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Per-class sigmoid activations, shape ``(num_classes, n)``.

        Rows follow class insertion order (see ``classes``).
        """
        if not self._knowledge:
            raise NotTrainedError("classifier has no classes")
        untrained = [c for c, k in self._knowledge.items() if k.is_empty]
        if untrained:
            raise NotTrainedError(f"classes never trained: {untrained}")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] != self.input_dim:
            raise ValueError(
                f"expected X of shape ({self.input_dim}, n), got {X.shape}"
            )
        X_aug = augment_bias(X) if X.shape[1] else np.zeros((self.input_dim + 1, 0))
        weight_matrix = np.stack([self._weights[c] for c in self._knowledge])
        return self.activation.forward(weight_matrix @ X_aug)

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Most probable class per sample; ties go to the earliest class."""
        probabilities = self.predict_proba(X)
        class_ids = np.array(self.classes)
        return class_ids[np.argmax(probabilities, axis=0)]

    # -- maintenance ------------------------------------------------------

    def copy(self) -> "ROLANNClassifier":
        clone = ROLANNClassifier(
            self.input_dim, self.regularization, self.activation
        )
        clone._knowledge = {c: k.copy() for c, k in self._knowledge.items()}
        clone._weights = {c: w.copy() for c, w in self._weights.items()}
        clone.svd_calls = self.svd_calls
        clone.samples_absorbed = self.samples_absorbed
        return clone


def merge_classifiers(
    a: ROLANNClassifier, b: ROLANNClassifier
) -> ROLANNClassifier:
    """Fuse two compatible classifiers into a new one.

    Shared classes get their knowledge triples combined and weights
    re-solved; classes present on one side only are copied.  Merging with
    an empty classifier returns a copy of the other side.  Training data is
    never revisited, so two classifiers trained on disjoint data streams
    merge into the classifier that training on the union would produce
    (for classes both sides know about).
    """
    if a.input_dim != b.input_dim:
        raise ValueError(
            f"input_dim mismatch: {a.input_dim} vs {b.input_dim}"
        )
    if a.regularization != b.regularization:
        raise ValueError(
            f"regularization mismatch: {a.regularization} vs {b.regularization}"
        )
    if a.activation != b.activation:
        raise ValueError(f"activation mismatch: {a.activation} vs {b.activation}")

    merged = ROLANNClassifier(a.input_dim, a.regularization, a.activation)
    merged.svd_calls = a.svd_calls + b.svd_calls
    merged.samples_absorbed = a.samples_absorbed + b.samples_absorbed
    for class_id in list(a.classes) + [c for c in b.classes if c not in a._knowledge]:
        in_a, in_b = class_id in a._knowledge, class_id in b._knowledge
        if in_a and in_b:
            knowledge = merge_knowledge(a.knowledge(class_id), b.knowledge(class_id))
            if not (a.knowledge(class_id).is_empty or b.knowledge(class_id).is_empty):
                merged.svd_calls += 1
            weights = (
                solve_weights(knowledge, merged.regularization)
                if not knowledge.is_empty
                else np.zeros(merged.input_dim + 1)
            )
        else:
            source = a if in_a else b
            knowledge = source.knowledge(class_id).copy()
            weights = source.weights(class_id).copy()
        merged._knowledge[class_id] = knowledge
        merged._weights[class_id] = weights
    return merged
