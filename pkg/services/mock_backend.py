import logging
import re

from errors import BackendError
from services.prompts import DESCRIPTION_PREFIX
from services.regex_backend import compose_findings
from services.text_backend import TextBackend

REPORT_LINE = re.compile(r"^Report number 1: (.*)$", re.MULTILINE)


def echo_reply(prompt: str) -> str:
    """Deterministic reply built from the prompt's own inputs.

    A describe prompt is answered with its strongest report; a report prompt
    with its feature descriptions joined in order.
    """
    match = REPORT_LINE.search(prompt)
    if match:
        return f"Reviewing the reports in order.\n*{DESCRIPTION_PREFIX} {match.group(1).strip()}"
    return compose_findings(prompt)


class MockBackend(TextBackend):
    """Scripted or echoing backend for tests and offline runs.

    Scripted replies are served in order; an Exception instance in the script
    is raised instead of returned. When the script runs out, the backend
    falls back to echo mode if enabled, otherwise it fails.
    """

    name = "mock"

    def __init__(self, replies: list[str | Exception] | None = None, echo: bool = True):
        self.logger = logging.getLogger(__name__)
        self.prompts: list[str] = []
        self.__replies = list(replies or [])
        self.__echo = echo

    async def send(self, prompt: str) -> str:
        self.prompts.append(prompt)
        if self.__replies:
            reply = self.__replies.pop(0)
            if isinstance(reply, Exception):
                raise reply
            return reply
        if self.__echo:
            return echo_reply(prompt)
        raise BackendError("Mock backend has no scripted reply left")
