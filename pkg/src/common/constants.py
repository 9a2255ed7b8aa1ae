from typing import Literal

CONFIG_ERROR_EXIT_CODE = 2
STAGE_FAILED_EXIT_CODE = 3
PIPELINE_ERROR_EXIT_CODE = 1

type RichTextKind = Literal['SCR', 'CODE']
ALL_KINDS: list[RichTextKind] = ['SCR', 'CODE']

type ToolName = Literal['ScrAnalyzer', 'CodeAnalyzer', 'AgentTerminator']
ALL_TOOLS: list[ToolName] = ['ScrAnalyzer', 'CodeAnalyzer', 'AgentTerminator']

TOOL_FOR_KIND: dict[RichTextKind, ToolName] = {
    'SCR': 'ScrAnalyzer',
    'CODE': 'CodeAnalyzer'
}

TERMINATE_SENTINEL = 'TERMINATE'

# Stage numbers used to split the master seed
SEED_STAGE_REASON = 1
SEED_STAGE_RETRIEVE = 2
SEED_STAGE_IDENTIFY = 3

GRAPH_SCHEMA_VERSION = 1
DB_SCHEMA_VERSION = 1
