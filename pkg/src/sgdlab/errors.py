"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A constructor argument is outside its admissible range."""


class ContractError(RuntimeError):
    """A stateful object was driven outside its calling protocol."""


class ValidationError(ValueError):
    """An experiment configuration references something unresolvable."""
