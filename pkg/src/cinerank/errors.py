"""Exception types shared across the package.

Every error raised by cinerank code derives from CinerankError so callers
can catch the whole family at service/CLI boundaries.
"""


class CinerankError(Exception):
    pass


# --- dataset loading ---

class MissingFile(CinerankError):
    pass


class MalformedRow(CinerankError):
    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class DanglingReference(CinerankError):
    pass


# --- matrix factorization ---

class EmptyDataset(CinerankError):
    pass


# --- metadata enrichment ---

class ProviderUnavailable(CinerankError):
    """Transient provider failure; the lookup may be retried."""


class GenerationFailed(CinerankError):
    pass


# --- LLM gateway ---

class NoNumberFound(CinerankError):
    pass


class OutOfRange(CinerankError):
    def __init__(self, value: float):
        super().__init__(f"score {value} outside [-1.0, 1.0]")
        self.value = value


class TransportError(CinerankError):
    pass


# --- preference profiles ---

class NoRatings(CinerankError):
    pass


class InvalidRange(CinerankError):
    pass


class EmptyProfile(CinerankError):
    pass


# --- re-ranking ---

class InvalidSpec(CinerankError):
    pass


class NoCandidates(CinerankError):
    pass


# --- evaluation ---

class MissingUser(CinerankError):
    pass


class EmptyFilteredSet(CinerankError):
    pass


class KeyMismatch(CinerankError):
    pass


# --- CLI ---

class UsageError(CinerankError):
    pass
