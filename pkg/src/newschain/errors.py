"""Exception hierarchy shared by every module."""


class NewsChainError(Exception):
    """Base class. ``rule`` names the failed check when one applies."""

    rule = None

    def __init__(self, message="", rule=None):
        super().__init__(message)
        if rule is not None:
            self.rule = rule


class InvalidArgument(NewsChainError, ValueError):
    pass


class ConfigError(InvalidArgument):
    pass


class VerificationFailed(NewsChainError):
    pass


class AlreadyEnrolled(NewsChainError):
    pass


class NoSuchPublisher(NewsChainError, KeyError):
    pass


class RevokedError(NewsChainError):
    pass


class IdentityMismatch(NewsChainError):
    pass


class NotOnChain(NewsChainError, KeyError):
    pass


class ChainForkError(NewsChainError):
    pass


class InvalidBlock(NewsChainError):
    pass


class ChainFormatError(NewsChainError, ValueError):
    pass


class MiningExhausted(NewsChainError):
    pass
