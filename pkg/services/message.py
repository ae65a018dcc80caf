import json

from errors import BackendError


class Message:
    """JSON payload exchanged with a chat-completion endpoint."""

    def __init__(self, payload: dict):
        self.payload = payload

    @staticmethod
    def chat_request(model: str, prompt: str, max_tokens: int) -> "Message":
        return Message({
            "model": model,
            "messages": [{"role": "user", "content": prompt}],
            "max_tokens": max_tokens,
            "temperature": 0,
        })

    @staticmethod
    def from_json(message_json: str) -> "Message":
        try:
            payload = json.loads(message_json)
        except json.JSONDecodeError as e:
            raise BackendError(f"Backend reply is not JSON: {e}") from e
        if not isinstance(payload, dict):
            raise BackendError("Backend reply is not a JSON object")
        return Message(payload)

    def to_json(self) -> str:
        return json.dumps(self.payload)

    def reply_text(self) -> str:
        try:
            content = self.payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as e:
            raise BackendError(f"Unexpected chat-completion reply shape: {e!r}") from e
        if not isinstance(content, str):
            raise BackendError("Chat-completion reply content is not text")
        return content
