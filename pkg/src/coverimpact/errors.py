"""Exception hierarchy.

Every error carries a short machine-readable ``code`` that the CLI prints as
``error: <code>: <detail>``.
"""


class CoverImpactError(Exception):
    code = "error"


class ParameterError(CoverImpactError, ValueError):
    code = "parameter"


class DecodeError(CoverImpactError):
    code = "decode"


class SpecError(CoverImpactError, ValueError):
    code = "spec"


class DegeneracyError(CoverImpactError):
    """A segment has zero variance where a variance MLE is required."""

    code = "degenerate"

    def __init__(self, start, end, message=None):
        self.start = start
        self.end = end
        super().__init__(
            message or f"zero variance in segment [{start}, {end})"
        )


class ConditioningError(CoverImpactError):
    """Non-positive innovation variance in the Kalman recursion."""

    code = "conditioning"

    def __init__(self, t, value):
        self.t = t
        self.value = value
        super().__init__(f"innovation variance F={value!r} <= 0 at t={t}")


class ImpactError(CoverImpactError):
    code = "impact"


class FormatError(CoverImpactError):
    """Malformed CSV/JSON/config input; ``line`` is 1-based when known."""

    code = "format"

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class EpochError(CoverImpactError):
    code = "epoch"


class DuplicateEpochError(CoverImpactError):
    code = "duplicate-epoch"


class NoMatchError(CoverImpactError):
    code = "no-match"


class MismatchError(CoverImpactError):
    code = "mismatch"
