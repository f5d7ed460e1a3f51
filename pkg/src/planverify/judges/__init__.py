"""Judge backends and the prompts they render."""

from .backends import (
    JudgeBackend,
    LLMJudge,
    ScriptBook,
    ScriptJudge,
    llm_judge_evaluate,
    load_script_file,
    rebind,
    script_judge_evaluate,
)
from .chat import ChatClient, ChatRequest, ChatResponse, HttpTransport, ResponseCache, RetryPolicy, chat_complete
from .prompts import (
    JUDGE_TEMPLATE,
    PLANNER_TEMPLATE,
    PromptTemplate,
    extract_goal,
    render_judge_prompt,
    render_planner_goal_prompt,
)
from .rules import RuleJudge, rule_counts, rule_hits, rule_judge_evaluate

__all__ = [
    "ChatClient",
    "ChatRequest",
    "ChatResponse",
    "HttpTransport",
    "JUDGE_TEMPLATE",
    "JudgeBackend",
    "LLMJudge",
    "PLANNER_TEMPLATE",
    "PromptTemplate",
    "ResponseCache",
    "RetryPolicy",
    "RuleJudge",
    "ScriptBook",
    "ScriptJudge",
    "chat_complete",
    "extract_goal",
    "llm_judge_evaluate",
    "load_script_file",
    "rebind",
    "render_judge_prompt",
    "render_planner_goal_prompt",
    "rule_counts",
    "rule_hits",
    "rule_judge_evaluate",
    "script_judge_evaluate",
]
