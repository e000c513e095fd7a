"""Exception hierarchy shared by every layer of the simulator.

Each exception's class name doubles as the outcome code written into
scenario reports, so names are part of the public surface.
"""


class EscapeSimError(Exception):
    """Base class for all simulator errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


# encoding / trie
class MalformedRlp(EscapeSimError):
    pass


class WrongKeyLength(EscapeSimError):
    pass


class InvalidProof(EscapeSimError):
    pass


# L2 ledger
class InsufficientBalance(EscapeSimError):
    pass


class AlreadyMinted(EscapeSimError):
    pass


class NotOwner(EscapeSimError):
    pass


class UnknownContract(EscapeSimError):
    pass


# L1 contracts
class NonMonotoneTimestamp(EscapeSimError):
    pass


class NoValidRoot(EscapeSimError):
    pass


class EscapeNotEnabled(EscapeSimError):
    pass


class StaleRoot(EscapeSimError):
    pass


class NullifierUsed(EscapeSimError):
    pass


class NothingToEscape(EscapeSimError):
    pass


class EscrowInsufficient(EscapeSimError):
    pass


class NoResolver(EscapeSimError):
    pass


class UnknownResolver(EscapeSimError):
    pass


class ResolverNotYetActive(EscapeSimError):
    pass


class MissingSlotProof(EscapeSimError):
    pass


class NotViaMessenger(EscapeSimError):
    pass


class L2AlreadyFailed(EscapeSimError):
    pass


class DeployerMismatch(EscapeSimError):
    pass


class LiveResolverExists(EscapeSimError):
    pass


class ZeroSupply(EscapeSimError):
    pass


# scenario harness
class ParseError(EscapeSimError):
    pass


class SchemaViolation(EscapeSimError):
    pass
