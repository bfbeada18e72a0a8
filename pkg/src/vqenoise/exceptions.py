"""Error taxonomy shared across the package.

The command-line layer maps these onto process exit codes; library users
catch them like any other exception. Everything derives from
:class:`VqeNoiseError` so callers can catch the whole family at once.
"""


class VqeNoiseError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(VqeNoiseError):
    """Operands live on different registers or have incompatible shapes."""


class ConfigError(VqeNoiseError):
    """Invalid configuration, command-line input, or input-file contents."""


class FcidumpError(ConfigError):
    """Malformed FCIDUMP text; message carries the offending line number."""


class StalledError(VqeNoiseError):
    """An iterative procedure can make no further progress."""


class ResourceLimitError(VqeNoiseError):
    """A configured size or iteration budget was exceeded."""


class NumericIntegrityError(VqeNoiseError):
    """A quantity violated a numerical sanity bound (Hermiticity, trace,
    imaginary residue), indicating corrupted state rather than bad input."""
