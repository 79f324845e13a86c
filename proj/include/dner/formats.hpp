#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "dner/core.hpp"

// Readers for gold annotations and the five model-specific prediction
// formats, fragment-graph resolution into entities, and the line-delimited
// uniform record format.

namespace dner {

class ParseError : public Error {
public:
    using Error::Error;
};

class AlignmentError : public Error {
public:
    using Error::Error;
};

class LabelConflictError : public Error {
public:
    using Error::Error;
};

class ConsistencyError : public Error {
public:
    using Error::Error;
};

struct GoldSentence {
    Sentence sentence;
    std::vector<Entity> entities;
};

struct GoldDocument {
    std::string doc_id;
    std::vector<GoldSentence> sentences;
};

// The five per-model prediction schemas, one per baseline family:
// transition actions over spans, span pairs with same-entity relations,
// character-span node lists, and plain token-index lists (optionally
// carrying a tag_scheme marker).
enum class ModelFormatKind {
    TransitionBased,
    SpanRelation,
    CharSpanList,
    IndexList,
    IndexListTagged,
};

const char* to_string(ModelFormatKind kind);
ModelFormatKind model_format_kind_from_string(const std::string& name);

// Fragment nodes plus undirected same-entity edges, the shape produced by
// span-pair and grid-style models before entities exist.
struct LabeledFragment {
    Fragment fragment;
    std::string label;
};

struct FragmentGraph {
    std::vector<LabeledFragment> nodes;
    std::vector<std::pair<int, int>> edges;
};

enum class GraphResolution {
    Components,  // each connected component becomes one entity
    Cliques,     // each maximal clique becomes one entity
};

// Stable per-sentence identifier: "<doc_id>:<ordinal>", 0-based within the
// document. Prediction files must carry the same ids.
std::string make_record_id(const std::string& doc_id, size_t ordinal);

// Gold corpus grammar: records separated by one blank line; line 1 is the
// space-joined token list, line 2 the annotations ("start,end[,start,end...]
// LABEL" segments joined by '|') or empty. An optional "#doc <id>" line
// starts a new document; without one the whole stream is a single document
// named default_doc_id.
std::vector<GoldDocument> parse_gold(std::istream& in,
                                     const std::string& default_doc_id = "gold");

// Parses one model's predictions (one JSON record per line, schema per
// kind) into per-record PredictionSets tagged with model_id. Span-relation
// inputs are resolved with the given graph mode. Output order follows
// input order; duplicate entities within a record are dropped.
std::vector<PredictionSet> parse_model_output(
    ModelFormatKind kind, std::istream& in, const std::string& model_id,
    GraphResolution span_relation_mode = GraphResolution::Components);

// Turns a fragment graph into entities. Components mode merges each
// connected component; cliques mode emits one entity per maximal clique
// (isolated nodes are singletons in both modes). A component with mixed
// labels raises LabelConflictError.
std::vector<Entity> resolve_fragment_graph(const FragmentGraph& graph, GraphResolution mode);

// Maps character-offset spans (inclusive pairs) onto whole tokens. Every
// span must begin at some token's first character and end at some token's
// last character; anything else is an AlignmentError.
std::vector<int> char_span_to_token_indices(const Sentence& sentence,
                                            const std::vector<std::pair<int, int>>& char_spans);

// Uniform format: one JSON object per line with fields text, sentence,
// entity_list[{text,index,label}] and record_id. Unknown fields survive a
// read-then-write round trip; a stored entity text that does not match its
// indexed tokens is a ConsistencyError.
void write_uniform(const std::vector<UniformRecord>& records, std::ostream& out);
std::vector<UniformRecord> read_uniform(std::istream& in,
                                        const std::string& default_label = "");

// Serializes one record to its canonical single-line form.
std::string uniform_record_to_json(const UniformRecord& record);

// Validates record invariants (index ranges, strictly increasing lists,
// text/token agreement). Used by both reader and writer.
void validate_uniform_record(const UniformRecord& record);

}  // namespace dner
