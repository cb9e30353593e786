"""
Data models for the staged command pipeline.

Each command runs as a short sequence of stages (validation, loading, the
command's own work, writing). These models carry the stage bookkeeping and the
result handed back to the command line.
"""

from typing import Any, TypedDict

from config.settings import EXIT_OK

# =============================================================================
# Pipeline State Models
# =============================================================================


class PipelineStage(TypedDict, total=False):
    """Metadata about a pipeline stage."""

    stage_name: str
    start_time: str
    end_time: str | None
    success: bool
    error_message: str | None
    items_processed: int
    items_succeeded: int


class PipelineState(TypedDict, total=False):
    """Complete state of a command pipeline."""

    command: str
    seed: int

    # Stage tracking
    pipeline_stages: list[PipelineStage]
    current_stage: str | None
    overall_success: bool

    # Artifacts passed from one stage to the next
    artifacts: dict[str, Any]

    # Summary
    outputs: list[str]
    diagnostics: list[str]


# =============================================================================
# Result Models
# =============================================================================


class CommandResult(TypedDict, total=False):
    """Result of one command, printed as the JSON summary line."""

    command: str
    success: bool
    exit_code: int
    seed: int | None
    rng: str
    outputs: list[str]
    summary: dict[str, Any]
    diagnostics: list[str]
    errors: list[str]
    pipeline_state: PipelineState


def create_default_command_result(command: str) -> CommandResult:
    return CommandResult(
        command=command,
        success=False,
        exit_code=EXIT_OK,
        seed=None,
        outputs=[],
        summary={},
        diagnostics=[],
        errors=[],
    )
