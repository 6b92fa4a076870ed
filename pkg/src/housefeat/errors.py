"""Exception types shared across the package."""


class HousefeatError(Exception):
    """Base class for all package errors."""


class DomainError(HousefeatError, ValueError):
    """Input lies outside the domain of an operation."""


class ParameterError(HousefeatError, ValueError):
    """An operation parameter is invalid."""


class SchemaError(HousefeatError, ValueError):
    """A file or table does not match the expected column schema."""


class FormatError(HousefeatError, ValueError):
    """A file is malformed."""


class AssetError(HousefeatError, ValueError):
    """An image asset cannot be resolved or decoded."""


class AssemblyError(HousefeatError, ValueError):
    """Feature records cannot be merged into a table."""


class SpecError(HousefeatError, ValueError):
    """An experiment specification references unknown features."""
