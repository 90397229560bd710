"""Exception hierarchy shared across the stack.

Every error carries a stable machine-readable ``code`` that survives the
HTTP boundary unchanged (the API serializes it as ``{"code": ..., "message":
...}`` and the CLI prints it verbatim). Codes are part of the wire contract;
see docs/error-codes.md.
"""

from __future__ import annotations


class TuneVaultError(Exception):
    """Base class; ``code`` is the machine-readable identifier."""

    code = "INTERNAL"


# --- channel database -------------------------------------------------------

class DuplicateName(TuneVaultError):
    code = "DUPLICATE_NAME"


class MalformedName(TuneVaultError):
    code = "MALFORMED_NAME"


class UnknownChannel(TuneVaultError):
    code = "UNKNOWN_CHANNEL"


class TypeMismatch(TuneVaultError):
    code = "TYPE_MISMATCH"


class SubscriberOverflow(TuneVaultError):
    code = "SUBSCRIBER_OVERFLOW"


class SubscriptionClosed(TuneVaultError):
    code = "SUBSCRIPTION_CLOSED"


class MalformedPattern(TuneVaultError):
    code = "MALFORMED_PATTERN"


# --- catalog / simulator ----------------------------------------------------

class ParseError(TuneVaultError):
    code = "PARSE_ERROR"


class DuplicateAddress(TuneVaultError):
    code = "DUPLICATE_ADDRESS"


class LimitOrderError(TuneVaultError):
    code = "LIMIT_ORDER"


class UnknownDevice(TuneVaultError):
    code = "UNKNOWN_DEVICE"


class UnknownPreset(TuneVaultError):
    code = "UNKNOWN_PRESET"


# --- archive store ----------------------------------------------------------

class UnknownTable(TuneVaultError):
    code = "UNKNOWN_TABLE"


class SchemaMismatch(TuneVaultError):
    code = "SCHEMA_MISMATCH"


class StorageFailure(TuneVaultError):
    code = "STORAGE_FAILURE"


class UnknownTune(TuneVaultError):
    code = "UNKNOWN_TUNE"


class UnknownSnapshot(TuneVaultError):
    code = "UNKNOWN_SNAPSHOT"


# --- tune engine ------------------------------------------------------------

class InvalidBeam(TuneVaultError):
    code = "INVALID_BEAM"


class RestoreBusy(TuneVaultError):
    code = "RESTORE_BUSY"


# --- query engine -----------------------------------------------------------

class UnknownColumn(TuneVaultError):
    code = "UNKNOWN_COLUMN"


class BadOperator(TuneVaultError):
    code = "BAD_OPERATOR"


class InvalidLimit(TuneVaultError):
    code = "INVALID_LIMIT"


# --- HTTP edge --------------------------------------------------------------

class LimitExceeded(TuneVaultError):
    """Setpoint write outside the device's configured limits."""

    code = "LIMIT_EXCEEDED"


class UnknownPage(TuneVaultError):
    code = "UNKNOWN_PAGE"
