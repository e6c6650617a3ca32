"""Shared exception types."""


class MalformedMatchingError(ValueError):
    """A matching is structurally inconsistent with its instance."""


class SizeCapError(ValueError):
    """An exhaustive routine was asked to run beyond its hard size cap."""


class UnmatchedAgentError(LookupError):
    """A per-pair quantity was requested for an agent with no partner."""
