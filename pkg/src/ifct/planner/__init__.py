"""Plan synthesis, validation and refinement over the base-function registry."""

from .core import (
    DEFAULT_MAX_ITER,
    HTTPPlannerClient,
    PlanIssue,
    ValidationReport,
    external_plan,
    plan_loop,
    producer_step,
    refine_plan,
    synthesize_plan,
    validate_plan,
)
from .plan import Plan, Step, make_plan, read_plan, serialize_plan, write_plan
from .registry import FunctionRegistry, FunctionSpec, default_registry

__all__ = [name for name in dir() if not name.startswith("_")]
