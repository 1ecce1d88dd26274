"""Template-based unsupervised domain adaptation for hate speech detection."""

from otg_forge.corpus import Corpus, Document, Label, load_corpus, sample_unlabeled, tokenize
from otg_forge.lexicon import Lexicon, TaggedSentence, load_and_consolidate, weak_label
from otg_forge.templating import REP, Template, build_weak_pool, extract_target_lexicon, templatize

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "Document",
    "Label",
    "Lexicon",
    "REP",
    "TaggedSentence",
    "Template",
    "build_weak_pool",
    "extract_target_lexicon",
    "load_and_consolidate",
    "load_corpus",
    "sample_unlabeled",
    "templatize",
    "tokenize",
    "weak_label",
]
