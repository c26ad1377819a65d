"""Guideline-driven incidental findings engine for abdominal CT volumes.

Guideline decision trees are compiled into validated inspection plans, the
plans are executed against voxel volumes with deterministic measurement
functions and an embedding-based labeler, and predictions are scored against
oracle decision paths.
"""

__version__ = "0.1.0"
