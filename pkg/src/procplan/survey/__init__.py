"""Pairwise plan comparison survey: store, HTTP app, and client."""

from .app import create_app
from .client import SurveyClient, SurveyClientError
from .store import (
    Assignment,
    Comparison,
    DuplicateSubmission,
    IncompleteAspects,
    PlanSide,
    StepView,
    Subject,
    SurveyError,
    SurveyStore,
    UnknownAssignment,
    UnknownSubject,
    dump_comparisons,
    load_comparisons,
    plan_side_from_goal,
)

__all__ = [
    "Assignment",
    "Comparison",
    "DuplicateSubmission",
    "IncompleteAspects",
    "PlanSide",
    "StepView",
    "Subject",
    "SurveyClient",
    "SurveyClientError",
    "SurveyError",
    "SurveyStore",
    "UnknownAssignment",
    "UnknownSubject",
    "create_app",
    "dump_comparisons",
    "load_comparisons",
    "plan_side_from_goal",
]
