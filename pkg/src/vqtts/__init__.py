"""Desk-scale end-to-end TTS: a vector-quantized speech codec with an
adversarial decoder, and a variance-adaptor acoustic model trained to
predict the codec's frame-level representations."""

__version__ = "0.1.0"
