"""Geometric-fabric arm-hand control substrate with a desk-scale grasp sim.

Subsystems:
  kinematics  articulated chain model, FK, Jacobians
  fabric      geometric fabric controller (resolve, limits, RK2 integration)
  actions     11-D action decoding and the 5-D PCA hand subspace
  reward      four-term grasp reward
  adr         automatic domain randomization schedule
  toysim      kinematic grasp environment
  distill     KL action loss, DAgger loop, stereo attention mask
  runtime     multi-rate scheduler, bin-pack state machine, metrics, server
"""

__version__ = "0.1.0"
