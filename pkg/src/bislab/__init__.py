"""Desk-scale lab for class-imbalanced semi-supervised learning.

Synthetic long-tailed Gaussian data, a tiny numpy MLP trained FixMatch-style,
class-sampling strategies with blended decay schedules, and a CLI that runs
seeded experiment grids into CSV summaries.
"""

__version__ = "0.1.0"
