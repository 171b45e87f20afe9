"""The CLI exposed by medzim, with a structured configuration powered by OmegaConf."""

from .main import *  # noqa
