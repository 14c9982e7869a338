"""Exception types shared across the package.

Domain errors carry enough structure for the CLI to map them onto
exit code 1; usage errors are argparse's business (exit code 2).
"""


class DomainError(Exception):
    """Base class for all expected, domain-level failures."""


class XmlError(DomainError):
    """Malformed XML input (BPMN or XES)."""


class UnitError(DomainError):
    """A series or reading carries a unit other than the one required."""


class UnknownIdError(DomainError, KeyError):
    """A query referenced an identifier the model does not contain."""

    def __str__(self) -> str:  # KeyError quotes its args; keep the message readable
        return Exception.__str__(self)
