"""Bright matter-wave soliton collisions at desk scale.

Mean-field split-step dynamics (`solsim.gpe`), an exact fixed-number
two-mode engine (`solsim.twomode`), closed-form fragmentation and collision
kinematics (`solsim.analysis`), and a scenario runner (`solsim.scenarios`,
`solsim.cli`) on shared units and grids (`solsim.core`).
"""

__version__ = "0.1.0"
