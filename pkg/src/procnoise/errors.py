"""Exception types shared across the toolkit."""


class ProcNoiseError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(ProcNoiseError, ValueError):
    """A caller supplied an invalid parameter (bad dimension, shape, range...)."""


class FormatError(ProcNoiseError):
    """An input file or stream does not match its declared format."""


class ClassifierError(ProcNoiseError):
    """Failures while talking to a classifier backend."""


class HandshakeError(ClassifierError):
    """The classifier subprocess did not complete a valid handshake."""


class ProtocolError(ClassifierError):
    """A classifier response violated the wire protocol."""
