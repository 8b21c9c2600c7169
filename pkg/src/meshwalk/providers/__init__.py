from .base import (Provider, ProviderError, ProviderRequest, RemoteHTTPError,
                   RemoteProtocolError, RemoteRetriableError, RemoteTimeoutError,
                   RemoteTransportError)
from .maskprep import diffuse_fill, open_mask, preprocess_mask
from .remote import RemoteProvider
from .stub import StubProvider
from .synthetic import (Box, DepthPerturbation, OracleProvider, SyntheticWorld,
                        value_noise)

__all__ = [
    "Provider", "ProviderError", "ProviderRequest", "RemoteHTTPError",
    "RemoteProtocolError", "RemoteRetriableError", "RemoteTimeoutError",
    "RemoteTransportError", "preprocess_mask", "open_mask", "diffuse_fill",
    "RemoteProvider", "StubProvider", "OracleProvider", "SyntheticWorld",
    "Box", "DepthPerturbation", "value_noise",
]
