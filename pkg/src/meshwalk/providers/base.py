"""Provider interface: pluggable sources of inpainted content and depth."""

from dataclasses import dataclass

import numpy as np


class ProviderError(RuntimeError):
    pass


class RemoteRetriableError(ProviderError):
    """Base for failures worth retrying against a remote provider."""


class RemoteTransportError(RemoteRetriableError):
    pass


class RemoteTimeoutError(RemoteRetriableError):
    pass


class RemoteProtocolError(RemoteRetriableError):
    """Malformed or inconsistent response body."""


class RemoteHTTPError(ProviderError):
    def __init__(self, status, message, retriable):
        super().__init__(f"HTTP {status}: {message}")
        self.status = status
        self.retriable = retriable


@dataclass
class ProviderRequest:
    kind: str             # "inpaint" | "depth" | "bootstrap"
    prompt: str
    image: np.ndarray     # (H, W, 3) float [0,1]; pixels with no content are zeroed
    mask: np.ndarray      # (H, W) bool, True = known content
    frame_index: int

    def __post_init__(self):
        self.image = np.asarray(self.image, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.image.shape[:2] != self.mask.shape:
            raise ValueError("request image and mask resolution mismatch")
        if self.kind == "bootstrap" and not self.mask.all():
            raise ValueError("bootstrap requests use an all-ones mask")


class Provider:
    """A provider returns full frames; the pipeline owns known-region compositing."""

    def inpaint(self, request: ProviderRequest) -> np.ndarray:
        raise NotImplementedError

    def predict_depth(self, image, frame_index: int) -> np.ndarray:
        raise NotImplementedError

    def healthcheck(self):
        """Raise ProviderError when the provider cannot serve requests."""
        return None
