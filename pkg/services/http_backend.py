import asyncio
import logging

import aiohttp

from config.backend_config import BackendConfig
from errors import BackendError
from services.message import Message
from services.text_backend import TextBackend

RETRY_STATUSES = {408, 409, 429, 500, 502, 503, 504}


class HttpBackend(TextBackend):
    """Chat-completion client speaking the common {"model", "messages"} JSON shape."""

    name = "http"

    def __init__(self, config: BackendConfig):
        self.logger = logging.getLogger(__name__)
        self.config = config
        self.__headers = {"Content-Type": "application/json", **config.auth_headers()}
        self.__session: aiohttp.ClientSession | None = None

    def __get_session(self) -> aiohttp.ClientSession:
        if self.__session is None or self.__session.closed:
            self.__session = aiohttp.ClientSession(
                headers=self.__headers, timeout=aiohttp.ClientTimeout(total=self.config.timeout_s))
        return self.__session

    async def close(self):
        if self.__session is not None:
            await self.__session.close()
            self.__session = None

    def retry_delay(self, attempt: int) -> float:
        return self.config.backoff_s * 2 ** (attempt - 1)

    async def send(self, prompt: str) -> str:
        request = Message.chat_request(self.config.model, prompt, self.config.max_tokens)
        last_error = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                delay = self.retry_delay(attempt)
                self.logger.warning(f"Retrying {self.config.url} in {delay:.1f}s ({attempt}/{self.config.max_retries}): "
                                    f"{last_error}")
                await asyncio.sleep(delay)
            try:
                async with self.__get_session().post(self.config.url, data=request.to_json()) as response:
                    body = await response.text()
                    if response.status in RETRY_STATUSES:
                        last_error = f"HTTP {response.status}"
                        continue
                    if response.status != 200:
                        raise BackendError(f"{self.config.url} answered HTTP {response.status}: {body[:200]}")
                    return Message.from_json(body).reply_text()
            except (aiohttp.ClientError, asyncio.TimeoutError) as e:
                last_error = repr(e)
        raise BackendError(f"{self.config.url} unreachable after {self.config.max_retries + 1} attempts: {last_error}")
