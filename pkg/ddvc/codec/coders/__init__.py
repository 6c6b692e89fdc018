from ddvc.codec.coders.base import SequenceCodec
from ddvc.codec.coders.classic import ClassicCodec, FeedbackTranscript, calibrate_alphas
from ddvc.codec.coders.deep import DeepCodec, LatentCoder

__all__ = ["ClassicCodec", "DeepCodec", "FeedbackTranscript", "LatentCoder", "SequenceCodec", "calibrate_alphas"]
