class ClothFieldError(Exception):
    """Base class for every error raised by the toolkit."""


class ValidationError(ClothFieldError, ValueError):
    pass


class ConfigError(ClothFieldError):
    pass


class MissingInputError(ClothFieldError, FileNotFoundError):
    pass


class DegenerateInputError(ClothFieldError, ValueError):
    pass


class FiniteDifferenceError(ClothFieldError, ArithmeticError):
    def __init__(self, component: int, value: float):
        super().__init__(f"non-finite objective at perturbed component {component}: {value!r}")
        self.component = component
        self.value = value
