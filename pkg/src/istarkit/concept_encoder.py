"""Toy pre-action encoder producing object- and action-centric concepts.

Stands in for a frozen backbone slice: instruction token embeddings are
mean-pooled, concatenated with the current observation embedding and the
previous action concept, pushed through one tanh hidden layer, and read out
by two linear heads. The action head feeds back autoregressively, so a
rollout over T observations yields 2T concept nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractError, DimensionError
from .numerics import ComputationRecord, Tensor, glorot
from .numerics.params import named_tensors

OBJECT = "object"
ACTION = "action"


@dataclass
class ConceptNode:
    """One object- or action-centric embedding at a timestep (1-based)."""

    embedding: Tensor
    kind: str
    timestep: int

    def __post_init__(self):
        if self.kind not in (OBJECT, ACTION):
            raise ContractError(f"unknown node kind {self.kind!r}")
        if self.timestep < 1:
            raise ContractError(f"timestep must be >= 1, got {self.timestep}")

    @property
    def key(self) -> tuple[int, str]:
        return (self.timestep, self.kind)


@dataclass
class ConceptSet:
    """Ordered collection of concept nodes sharing one embedding dimension."""

    nodes: list[ConceptNode] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self) -> Iterable[ConceptNode]:
        return iter(self.nodes)

    @property
    def keys(self) -> tuple[tuple[int, str], ...]:
        return tuple(n.key for n in self.nodes)

    def stack(self, record: ComputationRecord) -> Tensor:
        """Node embeddings as an (N, d) tensor on the given record."""
        if not self.nodes:
            raise ContractError("empty concept set")
        return record.stack_rows([n.embedding for n in self.nodes])


@dataclass
class EncoderInputs:
    """Instruction token embeddings (m, d), observation (d,), previous action (d,)."""

    instruction_embedding: Tensor
    observation_embedding: Tensor
    prev_action_embedding: Tensor

    def __post_init__(self):
        m = self.instruction_embedding
        if m.ndim != 2 or m.shape[0] < 1:
            raise DimensionError(f"instruction embedding shape {m.shape}")
        d = m.shape[1]
        if self.observation_embedding.shape != (d,):
            raise DimensionError(
                f"observation shape {self.observation_embedding.shape} != ({d},)")
        if self.prev_action_embedding.shape != (d,):
            raise DimensionError(
                f"previous action shape {self.prev_action_embedding.shape} != ({d},)")


@dataclass
class EncoderParams:
    """Pool-concat-hidden trunk with two linear readout heads."""

    w_hidden: Tensor
    b_hidden: Tensor
    w_obj: Tensor
    b_obj: Tensor
    w_act: Tensor
    b_act: Tensor
    trainable: bool = True

    @classmethod
    def init(cls, d: int, rng: np.random.Generator, trainable: bool = True) -> "EncoderParams":
        return cls(
            w_hidden=glorot(rng, (3 * d, d)),
            b_hidden=Tensor(np.zeros(d)),
            w_obj=glorot(rng, (d, d)),
            b_obj=Tensor(np.zeros(d)),
            w_act=glorot(rng, (d, d)),
            b_act=Tensor(np.zeros(d)),
            trainable=trainable,
        )

    @property
    def dim(self) -> int:
        return self.w_hidden.shape[1]

    def register(self, record: ComputationRecord, prefix: str = "encoder") -> None:
        """Expose tensors as trainable parameters (no-op when frozen)."""
        if self.trainable:
            record.register(named_tensors(self, prefix))


def encode_step(record: ComputationRecord, inputs: EncoderInputs,
                params: EncoderParams) -> tuple[Tensor, Tensor]:
    """One encode step: (object concept, action concept), both shape (d,)."""
    d = params.dim
    if inputs.instruction_embedding.shape[1] != d:
        raise DimensionError(
            f"instruction dim {inputs.instruction_embedding.shape[1]} != encoder dim {d}")
    pooled = record.mean_axis0(inputs.instruction_embedding)
    stacked = record.concat([pooled, inputs.observation_embedding,
                             inputs.prev_action_embedding])
    x = record.reshape(stacked, (1, 3 * d))
    hidden = record.tanh(record.linear(x, params.w_hidden, params.b_hidden))
    v_obj = record.reshape(record.linear(hidden, params.w_obj, params.b_obj), (d,))
    v_act = record.reshape(record.linear(hidden, params.w_act, params.b_act), (d,))
    return v_obj, v_act


def rollout_concepts(record: ComputationRecord,
                     instruction_embedding: Tensor,
                     observations: Sequence[Tensor],
                     params: EncoderParams) -> ConceptSet:
    """Autoregressive rollout: the step-t action concept is step t+1's input.

    The previous-action input is the zero vector at t=1. Returns 2T nodes
    ordered (object, action) per timestep, timesteps 1..T.
    """
    if len(observations) < 1:
        raise ContractError("rollout requires at least one observation")
    d = params.dim
    prev_action: Tensor = Tensor(np.zeros(d))
    nodes: list[ConceptNode] = []
    for t, obs in enumerate(observations, start=1):
        inputs = EncoderInputs(instruction_embedding, obs, prev_action)
        v_obj, v_act = encode_step(record, inputs, params)
        nodes.append(ConceptNode(v_obj, OBJECT, t))
        nodes.append(ConceptNode(v_act, ACTION, t))
        prev_action = v_act
    return ConceptSet(nodes)
