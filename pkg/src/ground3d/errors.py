"""Exception hierarchy for the grounding pipeline.

Every error raised by this package derives from :class:`GroundingError`,
so callers (the CLI in particular) can distinguish pipeline failures from
programming errors.
"""

from __future__ import annotations


class GroundingError(Exception):
    """Base class for all errors raised by ground3d."""


class SceneParseError(GroundingError):
    """Scene or statement file could not be decoded."""


class SceneValidationError(GroundingError):
    """Scene content violates an invariant (duplicate id, bad extent, ...)."""


class MissingGridError(SceneValidationError):
    """Scene file omits the free-space grid."""


class UnknownObjectError(GroundingError):
    """An object id does not exist in the scene."""

    def __init__(self, ids):
        self.ids = sorted(ids) if not isinstance(ids, int) else [ids]
        super().__init__(f"unknown object id(s): {self.ids}")


class OutOfGrammarError(GroundingError):
    """Utterance is not covered by the template grammar.

    ``position`` is the character offset of the longest successfully
    parsed prefix; callers use the error as the signal to route the
    statement to an external reasoner.
    """

    def __init__(self, utterance: str, position: int, reason: str = ""):
        self.utterance = utterance
        self.position = position
        self.reason = reason
        msg = f"out of grammar at position {position}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class ArityError(GroundingError):
    """Relation got the wrong number of anchors."""


class EmptyCandidatesError(GroundingError):
    """No candidate object survives class/attribute matching."""


class AnchorNotFoundError(EmptyCandidatesError):
    """A relation anchor descriptor matches no scene object."""


class OrdinalRangeError(GroundingError):
    """ordinal k exceeds the candidate count."""


class NoFeasibleViewpointError(GroundingError):
    """No traversable cell satisfies the viewpoint constraints."""


class NoTraversableCellError(GroundingError):
    """Free-space grid has no traversable cell."""


class PlacementError(GroundingError):
    """Scene generator could not place objects within the retry budget."""


class NoUnambiguousStatementError(GroundingError):
    """Statement generator found no statement meeting the ambiguity margin."""


class InfeasibleMixError(GroundingError):
    """Requested split mix cannot be produced with the enabled relations."""


class ExternalReasonerError(GroundingError):
    """Base class for failures of the external-reasoner protocol."""


class EndpointError(ExternalReasonerError):
    """External endpoint unreachable or returned a transport error."""


class MalformedToolCallError(ExternalReasonerError):
    """Reply was not valid tool-call JSON after one reprompt."""


class RoundLimitError(ExternalReasonerError):
    """Conversation exceeded the configured tool-call round budget."""


class AnswerIdError(ExternalReasonerError):
    """External reasoner answered with an id absent from the scene."""


class ConfigError(GroundingError):
    """Invalid or missing configuration."""
