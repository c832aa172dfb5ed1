"""Exception types shared across the package."""


class CrewsimError(Exception):
    """Base class for all crewsim errors."""


class MapSyntaxError(CrewsimError):
    """Map document is malformed: bad JSON, wrong types, unknown keys."""


class MapValidationError(CrewsimError):
    """Map document violates a semantic invariant (names the offending entity)."""


class UnknownLocation(CrewsimError):
    """No map entity matches the requested name."""


class NoPath(CrewsimError):
    """Start and goal lie in disconnected components of the road graph."""


class OffNetwork(CrewsimError):
    """Ground start or goal is farther than the snap distance from every waypoint."""


class NotAirborne(CrewsimError):
    """Horizontal motion requested for a landed aerial robot."""


class UnsupportedCapability(CrewsimError):
    """Robot cannot perform the requested action."""


class UnknownEntity(CrewsimError):
    """A referenced robot or map entity does not exist."""


class AlreadyTerminal(CrewsimError):
    """State machine was ticked or preempted after reaching a terminal outcome."""


class TbsValidationError(CrewsimError):
    """Command message violates a protocol rule; message names the field."""

    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field


class DecodeError(CrewsimError):
    """Wire line could not be decoded; message names the field or position."""


class IllegalPhaseTransition(CrewsimError):
    """Status phase is not a legal successor of the task's last phase."""


class UnknownRobotName(CrewsimError):
    """Vocative prefix names a robot that is not in the roster."""


class ConfigError(CrewsimError):
    """Session configuration is missing or invalid."""


class MalformedLog(CrewsimError):
    """Session log is missing required records or has broken lines."""


class VersionMismatch(CrewsimError):
    """Log was produced by an incompatible protocol version."""


class NotInWizardMode(CrewsimError):
    """Wizard submission received while the session runs the automatic DM."""


class NoWizardConnected(CrewsimError):
    """Cannot switch to wizard mode without a connected wizard client."""


class BindError(CrewsimError):
    """Server could not bind the requested port."""
