"""
Pipeline stage definitions for the experiment harness.

Stages form a dependency DAG; every topological generation runs
concurrently in a thread pool and a failed stage marks everything that
depends on it as skipped instead of aborting the run.
"""

import asyncio
import functools
import logging
import time
from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import networkx as nx

from ..utils.error_handler import ErrorHandler, ErrorResponse, SSPBError, UsageError
from ..utils.monitor import Monitor


class PipelineStageError(SSPBError):
    """Pipeline stage execution error."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"Stage {stage} failed: {type(cause).__name__}: {cause}")


class StageSkippedError(SSPBError):
    """A stage did not run because a dependency failed."""


@dataclass
class PipelineStage:
    """
    Pipeline stage configuration.

    `processor` receives a mapping from dependency name to that stage's
    result and runs on a worker thread.
    """
    name: str
    processor: Callable[[Dict[str, Any]], Any]
    dependencies: Tuple[str, ...] = ()
    context: Dict[str, Any] = field(default_factory=dict)


@dataclass
class StageRun:
    """Results of the stages that finished and responses of those that did not."""
    results: Dict[str, Any] = field(default_factory=dict)
    failures: Dict[str, ErrorResponse] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures


class StageExecutor:
    """Runs one stage off the event loop and wraps its failure."""

    def __init__(
        self,
        stage: PipelineStage,
        executor: Optional[Executor] = None,
        monitor: Optional[Monitor] = None
    ):
        self.stage = stage
        self.executor = executor
        self.monitor = monitor

    async def execute(self, inputs: Dict[str, Any]) -> Any:
        loop = asyncio.get_running_loop()
        start_time = time.perf_counter()
        try:
            result = await loop.run_in_executor(
                self.executor, functools.partial(self.stage.processor, inputs)
            )
        except Exception as e:
            raise PipelineStageError(self.stage.name, e) from e
        if self.monitor is not None:
            self.monitor.record(self.stage.name, time.perf_counter() - start_time)
        return result


class StageManager:
    """
    Manager for pipeline stages.

    Features:
    - Stage registration
    - Dependency management via a networkx DAG
    - Generation-wise concurrent execution
    - Failure propagation to dependents
    """

    def __init__(self, error_handler: Optional[ErrorHandler] = None):
        self.logger = logging.getLogger(__name__)
        self.error_handler = error_handler or ErrorHandler()
        self.stages: Dict[str, PipelineStage] = {}
        self.graph = nx.DiGraph()

    def register_stage(self, stage: PipelineStage):
        """Register pipeline stage."""
        if stage.name in self.stages:
            raise UsageError(f"stage {stage.name} registered twice")
        self.stages[stage.name] = stage
        self.graph.add_node(stage.name)
        for dependency in stage.dependencies:
            self.graph.add_edge(dependency, stage.name)

    def get_execution_order(self) -> List[List[str]]:
        """Stage names grouped into generations that may run together."""
        unknown = sorted(set(self.graph.nodes) - set(self.stages))
        if unknown:
            raise UsageError(f"Unknown dependency: {', '.join(unknown)}")
        if not nx.is_directed_acyclic_graph(self.graph):
            cycle = nx.find_cycle(self.graph)
            raise UsageError(f"stage dependencies form a cycle: {cycle}")
        return [sorted(generation) for generation in nx.topological_generations(self.graph)]

    async def execute_stages(
        self,
        executor: Optional[Executor] = None,
        monitor: Optional[Monitor] = None
    ) -> StageRun:
        """Execute all stages generation by generation."""
        run = StageRun()

        for generation in self.get_execution_order():
            ready = []
            for name in generation:
                stage = self.stages[name]
                failed = [d for d in stage.dependencies if d in run.failures]
                if failed:
                    error = StageSkippedError(
                        f"Stage {name} skipped: dependency {failed[0]} failed"
                    )
                    run.failures[name] = self.error_handler.handle_phase_error(
                        error, {'stage': name, **stage.context}
                    )
                else:
                    ready.append(stage)

            outcomes = await asyncio.gather(
                *[
                    StageExecutor(stage, executor, monitor).execute(
                        {d: run.results[d] for d in stage.dependencies}
                    )
                    for stage in ready
                ],
                return_exceptions=True
            )
            for stage, outcome in zip(ready, outcomes):
                if isinstance(outcome, PipelineStageError):
                    run.failures[stage.name] = self.error_handler.handle_phase_error(
                        outcome.cause, {'stage': stage.name, **stage.context}
                    )
                elif isinstance(outcome, BaseException):
                    raise outcome
                else:
                    run.results[stage.name] = outcome

        return run
