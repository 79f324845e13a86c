#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

// Core model for discontinuous named entity recognition tooling: sentences
// with per-token character offsets, entities made of one or more disjoint
// token fragments, the uniform per-sentence record exchanged between
// pipeline stages, and the span algebra connecting them.

namespace dner {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class InputError : public Error {
public:
    using Error::Error;
};

class InvalidIndicesError : public Error {
public:
    using Error::Error;
};

class InvalidFragmentsError : public Error {
public:
    using Error::Error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

// Raised when an entity set cannot be written as one-label-per-token BIO
// tags (discontinuous or overlapping entities).
class NotRepresentableError : public Error {
public:
    using Error::Error;
};

// One contiguous run of tokens; start and end are 0-based inclusive.
struct Fragment {
    int start = 0;
    int end = 0;

    friend auto operator<=>(const Fragment&, const Fragment&) = default;
};

// A tokenized sentence. char_spans holds one inclusive [first,last] byte
// offset pair per token, pointing into text.
struct Sentence {
    std::string text;
    std::vector<std::string> tokens;
    std::vector<std::pair<int, int>> char_spans;

    int token_count() const { return static_cast<int>(tokens.size()); }

    /// Builds a sentence whose text is the single-space join of tokens.
    static Sentence from_tokens(std::vector<std::string> tokens);

    /// Builds a sentence from raw text plus per-token inclusive offsets;
    /// tokens are the addressed substrings.
    static Sentence from_text(std::string text,
                              std::vector<std::pair<int, int>> char_spans);

    /// Checks the offset invariants (one span per token, strictly
    /// increasing, substring match). Throws Error on violation.
    void validate() const;
};

// A labeled entity over one sentence. Fragments are sorted by start,
// pairwise disjoint and non-adjacent; two or more fragments make the
// entity discontinuous.
struct Entity {
    std::string label;
    std::vector<Fragment> fragments;

    bool discontinuous() const { return fragments.size() >= 2; }

    friend bool operator==(const Entity&, const Entity&) = default;
};

// Splits a strictly increasing index list into maximal consecutive runs.
// [0,4,5] -> [0,0],[4,5]. Throws InvalidIndicesError on empty, negative,
// duplicate or unsorted input.
std::vector<Fragment> fragments_from_indices(const std::vector<int>& indices);

// Exact inverse of fragments_from_indices. Throws InvalidFragmentsError
// when fragments overlap or touch (adjacent fragments must be merged).
std::vector<int> indices_from_fragments(const std::vector<Fragment>& fragments);

// Tokens at the given indices joined by single spaces, casing preserved.
// Throws RangeError on empty selection or out-of-range index.
std::string entity_text(const Sentence& sentence, const std::vector<int>& indices);

// Deterministic identity for voting and exact-match scoring: equal keys
// iff label and token-index set are equal, regardless of fragment
// insertion order.
std::string canonical_key(const Entity& entity);

// Constructs a normalized entity from a token-index list (any order,
// duplicates collapsed).
Entity make_entity(std::string label, std::vector<int> indices);

// Constructs a normalized entity from fragments; overlapping or adjacent
// fragments are merged into the canonical maximal-run form.
Entity make_entity_from_fragments(std::string label, const std::vector<Fragment>& fragments);

// Checks Entity invariants against a sentence of token_count tokens.
void validate_entity(const Entity& entity, int token_count);

// One label per token, 'B' at each fragment start, 'I' inside, 'O'
// elsewhere. Only continuous, non-overlapping entities are encodable;
// anything else throws NotRepresentableError.
std::vector<char> bio_encode(const Sentence& sentence, const std::vector<Entity>& entities);

// Inverse reading: each maximal B I* run becomes one single-fragment
// entity carrying default_label. A dangling I (no preceding B) is treated
// as B, so decoding is total.
std::vector<Entity> bio_decode(const std::vector<char>& labels, const std::string& default_label);

// Entity in the uniform record shape: surface text plus the flat sorted
// token-index list it was read from.
struct UniformEntity {
    std::string text;
    std::vector<int> index;
    std::string label;

    friend bool operator==(const UniformEntity&, const UniformEntity&) = default;
};

// The post-processed per-sentence record every pipeline stage exchanges.
// extras carries unrecognized input fields as a serialized JSON object so
// a read-then-write round trip preserves them.
struct UniformRecord {
    std::string record_id;
    std::string text;
    std::vector<std::string> sentence;
    std::vector<UniformEntity> entity_list;
    std::string extras;

    friend bool operator==(const UniformRecord&, const UniformRecord&) = default;
};

// One model's deduplicated predictions for one sentence record.
struct PredictionSet {
    std::string model_id;
    std::string record_id;
    std::vector<Entity> entities;
};

// Normalizes a raw entity list into a PredictionSet: entities sorted by
// canonical key with duplicates removed (a model never supports one
// entity twice).
PredictionSet make_prediction_set(std::string model_id, std::string record_id,
                                  std::vector<Entity> entities);

// Conversions between the in-memory entity and the uniform shape.
UniformEntity to_uniform_entity(const Entity& entity, const Sentence& sentence);
Entity to_entity(const UniformEntity& uniform);

// Sentence view of a uniform record's token list.
Sentence record_sentence(const UniformRecord& record);

}  // namespace dner
