"""By-example syntactic search over dependency-parsed corpora, plus
relation-extraction dataset bootstrapping."""

from .bootstrap import (
    BootstrapConfig,
    BootstrapError,
    DatasetExample,
    QueryQualityRecord,
    build_dataset,
    collect_positives,
    export_entity_markers,
    quality_filter,
    relation_signature,
    sample_negatives,
)
from .corpus import (
    ConlluError,
    Corpus,
    Mention,
    Sentence,
    SnapshotError,
    Token,
    extract_mentions,
    load_corpus,
    parse_conllu,
    read_conllu,
    save_corpus,
    serialize_conllu,
)
from .engine import (
    CorpusIndex,
    Match,
    build_index,
    candidates,
    load_index,
    match_pattern,
    sample_matches,
    save_index,
    search,
)
from .errors import SynsearchError
from .extractor import EvalReport, GoldInstance, classify, evaluate
from .patterns import (
    Pattern,
    PatternCompileError,
    PatternEdge,
    PatternError,
    PatternNode,
    compile_query,
    from_annotated_sentence,
    load_patterns,
    minimal_connecting_subgraph,
    pattern_from_dict,
    pattern_to_dict,
    save_patterns,
)
from .querylang import (
    Constraint,
    QueryElement,
    QueryExample,
    QueryParseError,
    expand_triggers,
    parse_query,
    render,
    strip,
)

__version__ = "0.1.0"
