"""Corpus-to-tags toolkit: caption parsing, tag vocabularies, loss kernels,
tagging metrics and tag-guided retrieval scoring."""

try:
    from ._tagmine import *  # noqa: F401,F403  (installed package layout)
except ImportError:  # in-tree builds put _tagmine next to the build dir
    from _tagmine import *  # noqa: F401,F403

__version__ = "0.1.0"
