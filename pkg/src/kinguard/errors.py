"""Exception hierarchy shared across the package."""


class KinguardError(Exception):
    """Base class for all domain errors."""


class DataError(KinguardError):
    """Malformed or inconsistent input data."""


class ConfigError(KinguardError):
    """Invalid configuration or parameter combination."""


# -- dataset ingestion ------------------------------------------------------

class EmptyInput(DataError):
    pass


class NonGenotypeValue(DataError):
    pass


class RaggedRow(DataError):
    pass


class DuplicateSampleId(DataError):
    pass


class DuplicateSnpId(DataError):
    pass


# -- statistics -------------------------------------------------------------

class IndexOutOfRange(DataError):
    pass


class SameSnp(DataError):
    pass


class LengthMismatch(DataError):
    pass


class BadFrequency(DataError):
    pass


class UnknownParent(DataError):
    pass


# -- protocol ---------------------------------------------------------------

class PanelTooLarge(ConfigError):
    pass


class MissingPanelSnp(DataError):
    pass


# -- server -----------------------------------------------------------------

class ColumnCountMismatch(DataError):
    pass


class MissingTruth(DataError):
    pass


# -- adversary --------------------------------------------------------------

class KnowledgeIncomplete(DataError):
    pass


class DegenerateSets(ConfigError):
    pass
