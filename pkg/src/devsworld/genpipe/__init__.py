"""Natural-language to DEVS generation: plan a model tree, then build it bottom-up."""
from .builder import Assembly, construct, module_name, summarize
from .client import ChatClient, ChatError, HttpChatClient, MockClient, MockExhaustedError, RecordingClient, prompt_digest
from .pipeline import GenerationResult, generate
from .planner import PipelineError, Session, classify, formulate, plan, split, validate_plan
from .schemas import (
    CodeArtifact,
    LogContent,
    LogEntity,
    LogEntry,
    ModelSpecification,
    PlanNode,
    PortEntity,
    ProtocolSpec,
    TypedEntity,
)
