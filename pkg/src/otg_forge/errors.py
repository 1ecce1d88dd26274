"""Exception hierarchy. Every error raised by the library derives from OTGError."""


class OTGError(Exception):
    pass


class MalformedRecord(OTGError):
    def __init__(self, path, line, reason):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {reason}")


class MissingLabel(OTGError):
    pass


class DuplicateId(OTGError):
    pass


class EmptyLexicon(OTGError):
    pass


class NonHateInput(OTGError):
    pass


class EmptyTrainingData(OTGError):
    pass


class NoPositiveTags(OTGError):
    pass


class EmptyTargetLexicon(OTGError):
    pass


class EmptyInput(OTGError):
    pass


class SingleClassCorpus(OTGError):
    pass


class EmptyCorpus(OTGError):
    pass


class MalformedScore(OTGError):
    pass


class OutOfRange(OTGError):
    pass


class NoPositives(OTGError):
    pass


class SingleClass(OTGError):
    pass


class InconsistentCounts(OTGError):
    pass


class CheckpointError(OTGError):
    pass


class ConfigError(OTGError):
    pass


class StageError(OTGError):
    """Wraps a failure inside a pipeline stage and names the stage."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")
