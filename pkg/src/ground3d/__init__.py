"""Referential object grounding in 3D scenes.

Resolve natural-language referring expressions ("the chair closest to the
closet door") to object ids using a heuristic spatial-relation toolbox,
and turn grounded objects into navigation waypoints. Template statements
run through a deterministic parser/reasoner; free-form language can be
delegated to an external LLM backend over a strict-JSON tool-call
protocol.
"""

from .errors import GroundingError, OutOfGrammarError
from .generator import GeneratorConfig, SceneAnnotations, generate_scene
from .navigation import NavAction, make_action, object_to_waypoint
from .parser import (
    ObjectDescriptor,
    Relation,
    RelationProgram,
    RelationTerm,
    format_program,
    parse,
)
from .reasoner import (
    ExternalReasonerConfig,
    GroundingResult,
    build_prompt,
    resolve,
    run_external,
)
from .relevance import FilterReport, extract_mentions, filter_scene
from .scene import (
    FreeSpaceGrid,
    ObjectAttributes,
    Scene,
    SceneObject,
    attach_captions,
    load_scene,
    parse_caption_attributes,
    save_scene,
)
from .statements import Statement, StatementConfig, build_statement_suite, generate_statement
from .toolbox import RankedCandidates, ToolboxConfig, Viewpoint, compose

__version__ = "0.1.0"

__all__ = [
    "ExternalReasonerConfig",
    "FilterReport",
    "FreeSpaceGrid",
    "GeneratorConfig",
    "GroundingError",
    "GroundingResult",
    "NavAction",
    "ObjectAttributes",
    "ObjectDescriptor",
    "OutOfGrammarError",
    "RankedCandidates",
    "Relation",
    "RelationProgram",
    "RelationTerm",
    "Scene",
    "SceneAnnotations",
    "SceneObject",
    "Statement",
    "StatementConfig",
    "ToolboxConfig",
    "Viewpoint",
    "attach_captions",
    "build_prompt",
    "build_statement_suite",
    "compose",
    "extract_mentions",
    "filter_scene",
    "format_program",
    "generate_scene",
    "generate_statement",
    "load_scene",
    "make_action",
    "object_to_waypoint",
    "parse",
    "parse_caption_attributes",
    "resolve",
    "run_external",
    "save_scene",
    "__version__",
]
