"""foldlab: a deterministic cloth-folding demonstration workbench.

Subsystems:

- ``cloth``: particle cloth model, deterministic stepping, top-down masks
- ``fold``: top-down pick-and-place fold trajectories and execution
- ``session``: marker/preview/undo state machine with demonstration logs
- ``scoring``: HSV segmentation, IoU, translation alignment, trial scores
- ``goals``: built-in fold targets and goal mask rendering
- ``analysis``: summary stats and 2x2 repeated-measures ANOVA
- ``service`` / ``cli``: WebSocket message service and command line
"""

__version__ = "0.1.0"
