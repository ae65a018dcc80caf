from abc import ABC, abstractmethod


class TextBackend(ABC):
    """A describer or generator: one prompt in, one raw text reply out."""

    name = "abstract"

    @abstractmethod
    async def send(self, prompt: str) -> str:
        pass

    async def close(self):
        pass

    async def __aenter__(self):
        return self

    async def __aexit__(self, exc_type, exc, tb):
        await self.close()
