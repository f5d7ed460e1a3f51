"""Prompt templates for the judge, the goal-inference step and the inserter."""

from __future__ import annotations

import string
from dataclasses import dataclass

from ..errors import GoalExtractionError, TemplateError
from ..plan_model import Plan


@dataclass(frozen=True)
class PromptTemplate:
    """A role preamble (system message) plus a task body with ``{name}`` slots."""

    preamble: str
    body: str

    @property
    def placeholders(self) -> set[str]:
        names = set()
        for text in (self.preamble, self.body):
            for _, name, _, _ in string.Formatter().parse(text):
                if name is not None:
                    names.add(name)
        return names

    def _fill(self, text: str, values: dict[str, str]) -> str:
        missing = {n for _, n, _, _ in string.Formatter().parse(text) if n is not None} - values.keys()
        if missing:
            raise TemplateError(f"unresolved placeholder(s): {', '.join(sorted(missing))}")
        try:
            return text.format_map(values)
        except (KeyError, IndexError, ValueError) as e:
            raise TemplateError(f"cannot render template: {e}") from None

    def render_parts(self, **values: str) -> tuple[str, str]:
        return self._fill(self.preamble, values), self._fill(self.body, values)

    def render(self, **values: str) -> str:
        pre, body = self.render_parts(**values)
        return f"{pre}\n{body}"


JUDGE_TEMPLATE = PromptTemplate(
    preamble="""\
You are a Judge Agent for embodied AI task planning. Your role is to provide
 thoughtful,natural language feedback on action sequences. You should:
1. Analyze each action's purpose and relevance to the goal
2. Explain your reasoning in clear, conversational language
3. Point out redundant or unnecessary actions with detailed explanations
4. Identify missing actions needed to complete the goal
5. Focus on being helpful and constructive in your feedback
Provide your feedback as natural language commentary, using #REMOVE and
#MISSING tags only when necessary. Prioritize clear explanations.""",
    body="""\
Please evaluate this action sequence for achieving the following goal:
GOAL: {goal}
Action Sequence: {actions_text}
Provide line-by-line analysis of each action. For each action, explain what
it does and whether it's necessary for the goal. Use this format:
ACTION: [copy the exact action]
ANNOTATION: [explain what this action does and whether it's needed for the goal.
If the action should be removed, include "#REMOVE: reason".
If it's good, just explain why.]
After analyzing all actions, if any steps are missing to complete the goal, add:
#MISSING: [describe what actions are needed]
Be thorough and conversational in your explanations. Focus on helping someone
understand why each action is or isn't necessary for achieving the goal.
Your line-by-line analysis:""",
)

PLANNER_TEMPLATE = PromptTemplate(
    preamble="""\
You are a Planning Agent for embodied AI tasks. Your role is to:
1. Analyze action sequences and identify their goals
2. Modify action sequences based on feedback from a Judge
3. Remove redundant actions and add missing actions as needed
4. Ensure action sequences are efficient and complete
Always preserve the original format and only make necessary changes.""",
    body="""\
Analyze the following action sequence and determine the overall
Context: {context}
Actions:{actions_text}
Provide a concise goal statement starting with "GOAL: \"""",
)

INSERTER_TEMPLATE = PromptTemplate(
    preamble=PLANNER_TEMPLATE.preamble,
    body="""\
GOAL: {goal}
Current action sequence:{actions_text}
The Judge reported a missing step:
#MISSING: {description}
Reply with only the action lines that should be added, one per line, in the
same format as the sequence above (for example Driver.PickUp('Mug')).
Do not repeat existing actions and do not add commentary.""",
)

FORMAT_REMINDER = """\
Your previous reply could not be parsed. Reply again using exactly this format
for every action, in order:
ACTION: [copy the exact action]
ANNOTATION: [explanation, with "#REMOVE: reason" if the action should be removed]
Then add one "#MISSING: [description]" line per missing step, if any."""


def actions_text(plan: Plan) -> str:
    """Numbered canonical listing, one action per line, led by a newline."""
    return "".join(f"\n{i}. {a.canonical}" for i, a in enumerate(plan.actions, start=1))


def render_judge_prompt(goal: str, plan: Plan) -> str:
    if not plan.actions:
        raise TemplateError("cannot render a judge prompt for an empty plan")
    return JUDGE_TEMPLATE.render(goal=goal, actions_text=actions_text(plan))


def judge_messages(goal: str, plan: Plan) -> list[dict[str, str]]:
    if not plan.actions:
        raise TemplateError("cannot render a judge prompt for an empty plan")
    system, user = JUDGE_TEMPLATE.render_parts(goal=goal, actions_text=actions_text(plan))
    return [{"role": "system", "content": system}, {"role": "user", "content": user}]


def render_planner_goal_prompt(context: str, plan: Plan) -> str:
    return PLANNER_TEMPLATE.render(context=context, actions_text=actions_text(plan))


def planner_goal_messages(context: str, plan: Plan) -> list[dict[str, str]]:
    system, user = PLANNER_TEMPLATE.render_parts(context=context, actions_text=actions_text(plan))
    return [{"role": "system", "content": system}, {"role": "user", "content": user}]


def extract_goal(reply: str) -> str:
    """Return the text of the first line that starts with ``GOAL: ``."""
    for line in reply.splitlines():
        s = line.strip().lstrip("*_# ").strip()
        if s.startswith("GOAL:"):
            goal = s[len("GOAL:"):].strip().rstrip("*_").strip()
            if goal:
                return goal
    raise GoalExtractionError("no line starting with 'GOAL: ' in planner reply")
