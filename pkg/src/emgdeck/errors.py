"""Exception hierarchy.

Grouping matters for the CLI: ``DataError`` maps to exit code 2,
``ExperimentError`` to exit code 3; anything else is a bug.
"""


class EmgDeckError(Exception):
    """Base class for all emgdeck errors."""


class DataError(EmgDeckError):
    """A file, stream, or dataset is malformed or inconsistent."""


class ExperimentError(EmgDeckError):
    """An experiment precondition or internal consistency check failed."""


# -- dataset / acoustic file formats -----------------------------------------

class BadMagicError(DataError):
    """File does not start with the expected magic bytes."""


class UnsupportedVersionError(DataError):
    """File or packet carries a format version this code does not speak."""


class TruncatedPayloadError(DataError):
    """File ends before the payload its header promises."""


class ManifestMismatchError(DataError):
    """Manifest and on-disk files disagree (missing file, duplicate id, ...)."""


class ChannelSelectionError(DataError):
    """Requested channel indices are out of range or duplicated."""


class PairingError(DataError):
    """A dataset and an acoustic feature set do not describe the same corpus."""


# -- device packet codec ------------------------------------------------------

class PacketError(DataError):
    """Base class for packet encode/decode failures."""


class ShortBufferError(PacketError):
    """Buffer is shorter than a minimal packet or than its own header promises."""


class PacketMagicError(PacketError):
    """Frame does not start with the packet magic word."""


class PacketCrcError(PacketError):
    """CRC-16 over the frame body does not match the trailing checksum."""


class PacketVersionError(PacketError):
    """Packet version byte is not a version this codec speaks."""


class PacketLengthError(PacketError):
    """Header-declared payload size disagrees with the frame length."""


class PacketPayloadError(PacketError):
    """Payload bits are structurally invalid (e.g. stray trigger flag)."""


class StreamFormatError(PacketError):
    """Packet stream changed shape mid-flight (channel count / frames per packet)."""


# -- session ------------------------------------------------------------------

class SessionError(DataError):
    """Base class for recording-session failures."""


class StreamEndedEarlyError(SessionError):
    """Device stream ran out before the session script finished."""


class TriggerMismatchError(SessionError):
    """Trigger events in the stream disagree with the session schedule."""


class IllegalTransitionError(SessionError):
    """Session state machine was asked to make a transition it cannot."""


# -- learning -----------------------------------------------------------------

class UndefinedCorrelationError(ExperimentError):
    """Pearson correlation is undefined because one input has zero variance."""


class StratificationError(ExperimentError):
    """A (word, speaker) cell is too small for the requested train fraction."""
