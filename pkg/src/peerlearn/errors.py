"""Error types shared across the engine.

Every engine error carries a stable ``code`` string so the HTTP layer can map
it to a JSON body without string-matching messages.
"""

from __future__ import annotations


class PlatformError(Exception):
    """Base class for all engine errors."""

    code = "error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code


class ValidationFailed(PlatformError):
    """One or more validation rules were violated; ``errors`` lists all of them."""

    code = "validation_failed"

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


class UnknownTag(PlatformError):
    code = "unknown_tag"


class UnknownCourse(PlatformError):
    code = "unknown_course"


class UnknownReference(PlatformError):
    code = "unknown_reference"


class StorageFailure(PlatformError):
    code = "storage_failure"


class UnknownQuestion(PlatformError):
    code = "unknown_question"


class AlreadyDeleted(PlatformError):
    code = "already_deleted"


class DeletedQuestion(PlatformError):
    code = "deleted_question"


class Forbidden(PlatformError):
    code = "forbidden"


class EmptyMatrix(PlatformError):
    code = "empty_matrix"


class IndexOutOfRange(PlatformError):
    code = "index_out_of_range"


class DimensionMismatch(PlatformError):
    code = "dimension_mismatch"


class OutOfRange(PlatformError):
    code = "out_of_range"


class EmptyCohort(PlatformError):
    code = "empty_cohort"


class NotEligible(PlatformError):
    code = "not_eligible"


class NoCommonSlot(PlatformError):
    code = "no_common_slot"


class NoAvailabilitySet(PlatformError):
    code = "no_availability_set"


class SlotNotCommon(PlatformError):
    code = "slot_not_common"


class NotRecipient(PlatformError):
    code = "not_recipient"


class AlreadyResponded(PlatformError):
    code = "already_responded"
