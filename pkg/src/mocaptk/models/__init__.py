from .multidec import ModelSizes, ModelVariant, MultiDecoderModel  # noqa: F401
