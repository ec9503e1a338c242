"""Exception hierarchy shared by all modules."""


class GeophaseError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(GeophaseError, ValueError):
    """Input violates a precondition (shape, Hermiticity, normalization, ...)."""


class SchemaError(ValidationError):
    """A configuration document does not match the schema.

    ``field`` is a dotted path into the document and ``line`` the source line
    when it is known.
    """

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class PhysicsError(ValidationError):
    """Structurally valid input that is not a legal physical object."""


class DomainError(ValidationError):
    """Argument outside the domain of a closed-form expression."""


class SingularConfigurationError(GeophaseError, ArithmeticError):
    """A closed-form expression hits a vanishing denominator."""
