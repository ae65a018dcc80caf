"""LLM-free findings generator.

Pulls the feature descriptions out of a report prompt and joins them in the
order they appear there, which is descending importance.
"""
import re

from errors import BackendError
from services.prompts import DESCRIPTION_PREFIX, NO_FEATURES_LINE, NO_FINDINGS_REPORT
from services.text_backend import TextBackend

FEATURE_PATTERN = re.compile(
    r"<feature (\d+)>\nFeature number \1\. Relative importance score [0-9.]+:\n(.*?)\n</feature \1>", re.DOTALL)
PREFIX_PATTERN = re.compile(rf"^\s*{re.escape(DESCRIPTION_PREFIX)}\s*", re.IGNORECASE)


def _sentence(description: str) -> str:
    text = PREFIX_PATTERN.sub("", description).strip().rstrip(".")
    if not text:
        return ""
    return text[0].upper() + text[1:] + "."


def compose_findings(prompt: str) -> str:
    descriptions = [match.group(2) for match in FEATURE_PATTERN.finditer(prompt)]
    if not descriptions:
        if NO_FEATURES_LINE in prompt:
            return NO_FINDINGS_REPORT
        raise BackendError("Prompt contains no feature descriptions to compose")
    sentences = [sentence for sentence in (_sentence(d) for d in descriptions) if sentence]
    return " ".join(dict.fromkeys(sentences))


class RegexBackend(TextBackend):
    name = "regex"

    async def send(self, prompt: str) -> str:
        return compose_findings(prompt)
