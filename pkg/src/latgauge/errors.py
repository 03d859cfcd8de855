"""Exception hierarchy shared by all latgauge modules."""


class LatGaugeError(Exception):
    """Base class for all errors raised by latgauge."""


class SingularInput(LatGaugeError, ValueError):
    pass


class SideTooLong(LatGaugeError, ValueError):
    pass


class InsufficientSamples(LatGaugeError):
    pass


class NoCenter(LatGaugeError):
    """The group has trivial center, so the one-point vanishing argument is void."""


class UnsupportedFamily(LatGaugeError, ValueError):
    pass


class StepTooLarge(LatGaugeError, ValueError):
    pass


class NonPositiveMagnitude(LatGaugeError, ValueError):
    pass


class ParseError(LatGaugeError):
    def __init__(self, message, line=None, column=None, field=None):
        self.line = line
        self.column = column
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class ValidationError(LatGaugeError):
    """Raised with the full list of violated constraints."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid config:\n  " + "\n  ".join(self.problems))
