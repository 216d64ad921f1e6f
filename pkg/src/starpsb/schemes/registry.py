"""Scheme registry: maps scheme names to the functions that run them."""

from __future__ import annotations

import logging
from collections.abc import Callable, Iterable, Iterator

from starpsb.core.errors import ConfigError
from starpsb.core.models import SchemeId, SchemeOutcome
from starpsb.schemes.baselines import (
    SchemeContext,
    run_coupled,
    run_cris,
    run_independent,
    run_random_phase,
    run_ts,
)

logger = logging.getLogger(__name__)

SchemeRunner = Callable[[SchemeContext], SchemeOutcome]


class SchemeRegistry:
    """Routes SchemeIds to runners, preserving registration order."""

    def __init__(self, runners: dict[SchemeId, SchemeRunner] | None = None) -> None:
        self._runners: dict[SchemeId, SchemeRunner] = dict(runners) if runners else {}

    @classmethod
    def default(cls) -> SchemeRegistry:
        """Registry holding the coupled scheme and all four comparison schemes."""
        return cls(
            {
                SchemeId.COUPLED: run_coupled,
                SchemeId.INDEPENDENT: run_independent,
                SchemeId.TS: run_ts,
                SchemeId.CRIS: run_cris,
                SchemeId.RANDOM: run_random_phase,
            }
        )

    def register(self, scheme: SchemeId, runner: SchemeRunner) -> None:
        """Register a runner, replacing any previous one for the same scheme."""
        if scheme in self._runners:
            logger.warning("Replacing runner for %s", scheme.value)
        self._runners[scheme] = runner

    def get(self, scheme: SchemeId | str) -> SchemeRunner:
        scheme_id = parse_scheme(scheme)
        try:
            return self._runners[scheme_id]
        except KeyError as e:
            raise ConfigError(f"No runner registered for scheme '{scheme_id.value}'") from e

    def select(self, schemes: Iterable[SchemeId | str]) -> list[tuple[SchemeId, SchemeRunner]]:
        """Runners for the requested schemes, in the order requested, without duplicates.

        Raises:
            ConfigError: For an unknown or unregistered scheme, or an empty request.
        """
        selected: list[tuple[SchemeId, SchemeRunner]] = []
        seen: set[SchemeId] = set()
        for scheme in schemes:
            scheme_id = parse_scheme(scheme)
            if scheme_id in seen:
                continue
            seen.add(scheme_id)
            selected.append((scheme_id, self.get(scheme_id)))
        if not selected:
            raise ConfigError("At least one scheme must be selected")
        return selected

    def __contains__(self, scheme: object) -> bool:
        return scheme in self._runners

    def __iter__(self) -> Iterator[SchemeId]:
        return iter(self._runners)

    def __len__(self) -> int:
        return len(self._runners)


def parse_scheme(scheme: SchemeId | str) -> SchemeId:
    """Accept a SchemeId or its serialized name."""
    if isinstance(scheme, SchemeId):
        return scheme
    try:
        return SchemeId(scheme.strip())
    except ValueError as e:
        valid = ", ".join(s.value for s in SchemeId)
        raise ConfigError(f"Unknown scheme '{scheme}'. Valid schemes: {valid}") from e
