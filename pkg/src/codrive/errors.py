class ContractViolation(Exception):
    """A caller broke an operation's precondition (bad shapes, missing actions, ...)."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


class TrainingHalted(RuntimeError):
    """A learner produced a non-finite loss or gradient."""
