"""Exception hierarchy shared by all isodub modules."""


class DubbingError(Exception):
    """Base class for every error raised by isodub."""


class ContractError(DubbingError, ValueError):
    """A caller violated an operation's precondition."""


class SrtParseError(DubbingError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyTrackError(SrtParseError):
    pass


class SrtValidationError(DubbingError, ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class WavFormatError(DubbingError, ValueError):
    """Unsupported WAV encoding (non-PCM, wrong bit depth, bad rate)."""


class WavCorruptionError(DubbingError, ValueError):
    """WAV container is truncated or structurally broken."""


class AudioTooShortError(ContractError):
    pass


class TaggingError(DubbingError, ValueError):
    """A token carries a tag outside the rule set's inventory."""


class RuleFileError(DubbingError, ValueError):
    pass


class PlaceholderError(DubbingError):
    def __init__(self, message: str, ids):
        self.ids = sorted(ids, key=_placeholder_sort_key)
        super().__init__(f"{message}: {', '.join(self.ids)}")


class PlaceholderIntegrityError(PlaceholderError):
    """Placeholders from the side table are missing (or unknown ones appeared)."""


class PlaceholderDuplicationError(PlaceholderError):
    """A placeholder occurs more than once in translated text."""


class AdapterError(DubbingError):
    """An engine adapter (MT, TTS, tagger...) failed."""


class StageError(DubbingError):
    def __init__(self, cue_index: int, stage: str, cause: BaseException):
        self.cue_index = cue_index
        self.stage = stage
        self.cause = cause
        super().__init__(f"cue {cue_index}: stage '{stage}' failed: {cause}")


class ConfigError(DubbingError, ValueError):
    pass


def _placeholder_sort_key(pid: str):
    digits = "".join(ch for ch in pid if ch.isdigit())
    return (int(digits) if digits else -1, pid)
