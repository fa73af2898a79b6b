class ParameterError(ValueError):
    """Invalid generator or scenario parameters."""


class GenerationError(RuntimeError):
    """Campaign generation could not satisfy its constraints."""


class ConsistencyError(ValueError):
    """Campaign data references something that does not exist."""


class ContractError(ValueError):
    """An operation was called outside its documented domain."""
