"""Wire-protocol adapter exposing pretrained recognizers to the oafuse
evaluation harness."""
from .recognizers import (
    Decoded,
    StubCtcRecognizer,
    StubSeq2SeqRecognizer,
    Wav2Vec2Recognizer,
    WhisperRecognizer,
    build_recognizer,
    extract_segment_stats,
)
from .server import AdapterConfig, RequestHandler, serve_http, serve_stdio
from .wire import read_wav, write_posterior

__version__ = "0.1.0"
