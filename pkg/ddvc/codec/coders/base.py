from __future__ import annotations

from abc import ABC, abstractmethod
from pathlib import Path

from ddvc.codec.types import CodecId, Frame, VideoSequence


class SequenceCodec(ABC):
    """Abstract base class for sequence codecs.

    Subclasses must define:
    - codec_id: identifier written to the container header (CodecId)
    - stream_names: labels of the per-frame sub-streams, used in bit accounting (list[str])
    """

    codec_id: CodecId
    stream_names: list[str]

    @abstractmethod
    def encode_sequence(self, sequence: VideoSequence, gop: int, path: str | Path | None = None) -> bytes:
        """Encode a whole sequence into container bytes (optionally written to `path`)."""
        raise NotImplementedError

    @abstractmethod
    def decode_sequence(self, data: bytes | str | Path) -> list[Frame]:
        """Decode container bytes or a container file into frames in display order."""
        raise NotImplementedError
