"""Exception types shared across the toolkit."""


class ForgeError(Exception):
    """Base class for all toolkit errors."""


class CorpusError(ForgeError):
    pass


class RecipeError(ForgeError):
    pass


class DiffError(ForgeError):
    pass


class BackendError(ForgeError):
    pass
