from .protocol import TOOLS, ToolCall, ToolResult, Turn, token_estimate
from .providers import HttpInformal, HttpProvider, ScriptedInformal, ScriptedProvider, TransportError
from .references import IngestError, ReferenceDoc, ingest_reference, read_reference
from .search import StatementIndex, search_library, term_frequency
from .session import Budget, SessionRecord, build_context, run_session
from .skills import SkillDoc, load_skills
from .tools import PLAN, REVIEW, ROLE_TOOLS, WORKER, ToolContext, dispatch_tool

__all__ = [
    "TOOLS", "ToolCall", "ToolResult", "Turn", "token_estimate",
    "HttpInformal", "HttpProvider", "ScriptedInformal", "ScriptedProvider", "TransportError",
    "IngestError", "ReferenceDoc", "ingest_reference", "read_reference",
    "StatementIndex", "search_library", "term_frequency",
    "Budget", "SessionRecord", "build_context", "run_session",
    "SkillDoc", "load_skills",
    "PLAN", "REVIEW", "ROLE_TOOLS", "WORKER", "ToolContext", "dispatch_tool",
]
