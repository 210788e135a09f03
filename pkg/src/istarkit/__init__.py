"""istarkit: structured task-reasoning building blocks.

Subpackages:

* ``numerics`` -- checked autodiff core (tensors, tape, gradient oracle)
* ``concept_encoder`` -- toy instruction/observation encoder with an
  autoregressive concept rollout
* ``concept_graph`` -- gated dynamic concept-graph block and its
  structure-learning objective
* ``subprompt_projector`` -- slot-wise and autoregressive prompt projectors
  with distillation supervision
* ``policy_sim`` -- synthetic long-horizon environment comparing structured
  and end-to-end policies under matched budgets
* ``distill_pipeline`` -- gripper-event segmentation, keyframes, repeated
  voting, and review flagging
"""

__version__ = "0.1.0"
