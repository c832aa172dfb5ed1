"""crewsim: chat-operated multi-robot simulation platform.

An operator types instructions; a retrieval NLU classifies them, resolves the
addressed robot, and compiles them into tactical behavior commands that run
as outcome-typed state machines inside a deterministic 2D simulation. Robot
feedback flows back to the operator as chat turns.
"""

from .behavior import Outcome, StateMachine, compile_task, follow_step, preempt, tick
from .dialogue import (
    DialogueContext,
    DialogueManager,
    DialogueTurn,
    DmOutput,
    TfidfScorer,
    TrainingPair,
    extract_slots,
    load_corpus,
    normalize,
    resolve_addressee,
    score,
)
from .orchestrator import (
    LogRecord,
    Metrics,
    Session,
    SessionConfig,
    compute_metrics,
    read_log,
    replay,
    run_headless,
    write_log,
)
from .sim import (
    Detection,
    RobotState,
    SimConfig,
    SimEvent,
    SimState,
    build_state,
    sense,
    set_motion,
    snapshot,
    step,
)
from .tbs import (
    ACTIONS,
    Modifiers,
    TaskTracker,
    TbsMessage,
    TbsStatus,
    decode,
    decode_status,
    encode,
    encode_status,
    validate,
)
from .world import (
    Building,
    LocationRef,
    Path,
    Route,
    Waypoint,
    WorldMap,
    line_of_sight,
    load_map,
    load_map_file,
    plan_path,
    resolve_location,
)

__version__ = "0.1.0"
