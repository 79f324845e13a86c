#include "dner/core.hpp"

#include <algorithm>
#include <set>

namespace dner {

Sentence Sentence::from_tokens(std::vector<std::string> tokens) {
    Sentence s;
    s.char_spans.reserve(tokens.size());
    int pos = 0;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i].empty()) {
            throw Error("sentence token " + std::to_string(i) + " is empty");
        }
        if (i > 0) {
            s.text += ' ';
            ++pos;
        }
        const int first = pos;
        s.text += tokens[i];
        pos += static_cast<int>(tokens[i].size());
        s.char_spans.emplace_back(first, pos - 1);
    }
    s.tokens = std::move(tokens);
    s.validate();
    return s;
}

Sentence Sentence::from_text(std::string text, std::vector<std::pair<int, int>> char_spans) {
    Sentence s;
    s.text = std::move(text);
    s.tokens.reserve(char_spans.size());
    for (const auto& [first, last] : char_spans) {
        if (first < 0 || last < first || last >= static_cast<int>(s.text.size())) {
            throw Error("character span [" + std::to_string(first) + "," +
                        std::to_string(last) + "] outside text");
        }
        s.tokens.push_back(s.text.substr(first, last - first + 1));
    }
    s.char_spans = std::move(char_spans);
    s.validate();
    return s;
}

void Sentence::validate() const {
    if (char_spans.size() != tokens.size()) {
        throw Error("sentence has " + std::to_string(tokens.size()) + " tokens but " +
                    std::to_string(char_spans.size()) + " character spans");
    }
    int prev_end = -1;
    for (size_t i = 0; i < tokens.size(); ++i) {
        const auto& [first, last] = char_spans[i];
        if (first <= prev_end) {
            throw Error("character spans overlap or are out of order at token " +
                        std::to_string(i));
        }
        if (first < 0 || last < first || last >= static_cast<int>(text.size())) {
            throw Error("character span out of range at token " + std::to_string(i));
        }
        if (text.compare(first, last - first + 1, tokens[i]) != 0) {
            throw Error("token " + std::to_string(i) + " does not match its text span");
        }
        prev_end = last;
    }
}

std::vector<Fragment> fragments_from_indices(const std::vector<int>& indices) {
    if (indices.empty()) {
        throw InvalidIndicesError("index list is empty");
    }
    std::vector<Fragment> fragments;
    int run_start = indices.front();
    if (run_start < 0) {
        throw InvalidIndicesError("negative token index " + std::to_string(run_start));
    }
    int prev = run_start;
    for (size_t i = 1; i < indices.size(); ++i) {
        const int idx = indices[i];
        if (idx <= prev) {
            throw InvalidIndicesError("index list not strictly increasing at position " +
                                      std::to_string(i));
        }
        if (idx != prev + 1) {
            fragments.push_back({run_start, prev});
            run_start = idx;
        }
        prev = idx;
    }
    fragments.push_back({run_start, prev});
    return fragments;
}

std::vector<int> indices_from_fragments(const std::vector<Fragment>& fragments) {
    if (fragments.empty()) {
        throw InvalidFragmentsError("fragment list is empty");
    }
    std::vector<Fragment> sorted = fragments;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> indices;
    int prev_end = -2;
    for (const auto& f : sorted) {
        if (f.start < 0 || f.end < f.start) {
            throw InvalidFragmentsError("fragment [" + std::to_string(f.start) + "," +
                                        std::to_string(f.end) + "] is malformed");
        }
        if (f.start <= prev_end + 1) {
            throw InvalidFragmentsError("fragments overlap or touch at token " +
                                        std::to_string(f.start) + "; adjacent fragments must be merged");
        }
        for (int i = f.start; i <= f.end; ++i) {
            indices.push_back(i);
        }
        prev_end = f.end;
    }
    return indices;
}

std::string entity_text(const Sentence& sentence, const std::vector<int>& indices) {
    if (indices.empty()) {
        throw RangeError("entity selects no tokens");
    }
    std::string out;
    for (size_t i = 0; i < indices.size(); ++i) {
        const int idx = indices[i];
        if (idx < 0 || idx >= sentence.token_count()) {
            throw RangeError("token index " + std::to_string(idx) + " outside sentence of " +
                             std::to_string(sentence.token_count()) + " tokens");
        }
        if (i > 0) {
            out += ' ';
        }
        out += sentence.tokens[idx];
    }
    return out;
}

std::string canonical_key(const Entity& entity) {
    std::vector<Fragment> sorted = entity.fragments;
    std::sort(sorted.begin(), sorted.end());
    // Length-prefixed label keeps the key injective whatever the label contains.
    std::string key = std::to_string(entity.label.size());
    key += ':';
    key += entity.label;
    key += '|';
    for (size_t i = 0; i < sorted.size(); ++i) {
        if (i > 0) {
            key += ',';
        }
        key += std::to_string(sorted[i].start);
        key += '-';
        key += std::to_string(sorted[i].end);
    }
    return key;
}

Entity make_entity(std::string label, std::vector<int> indices) {
    std::sort(indices.begin(), indices.end());
    indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
    Entity e;
    e.label = std::move(label);
    e.fragments = fragments_from_indices(indices);
    return e;
}

Entity make_entity_from_fragments(std::string label, const std::vector<Fragment>& fragments) {
    std::set<int> covered;
    for (const auto& f : fragments) {
        if (f.start < 0 || f.end < f.start) {
            throw InvalidFragmentsError("fragment [" + std::to_string(f.start) + "," +
                                        std::to_string(f.end) + "] is malformed");
        }
        for (int i = f.start; i <= f.end; ++i) {
            covered.insert(i);
        }
    }
    return make_entity(std::move(label), std::vector<int>(covered.begin(), covered.end()));
}

void validate_entity(const Entity& entity, int token_count) {
    if (entity.fragments.empty()) {
        throw InvalidFragmentsError("entity '" + entity.label + "' has no fragments");
    }
    int prev_end = -2;
    for (const auto& f : entity.fragments) {
        if (f.start < 0 || f.end < f.start) {
            throw InvalidFragmentsError("entity fragment [" + std::to_string(f.start) + "," +
                                        std::to_string(f.end) + "] is malformed");
        }
        if (f.start <= prev_end + 1) {
            throw InvalidFragmentsError("entity fragments unsorted, overlapping or adjacent");
        }
        if (f.end >= token_count) {
            throw RangeError("entity fragment ends at token " + std::to_string(f.end) +
                             " in a sentence of " + std::to_string(token_count) + " tokens");
        }
        prev_end = f.end;
    }
}

std::vector<char> bio_encode(const Sentence& sentence, const std::vector<Entity>& entities) {
    std::vector<char> labels(sentence.tokens.size(), 'O');
    for (const auto& e : entities) {
        if (e.discontinuous()) {
            throw NotRepresentableError("entity '" + e.label +
                                        "' is discontinuous and has no BIO encoding");
        }
        validate_entity(e, sentence.token_count());
        const Fragment f = e.fragments.front();
        for (int i = f.start; i <= f.end; ++i) {
            if (labels[i] != 'O') {
                throw NotRepresentableError("overlapping entities at token " + std::to_string(i));
            }
            labels[i] = (i == f.start) ? 'B' : 'I';
        }
    }
    return labels;
}

std::vector<Entity> bio_decode(const std::vector<char>& labels, const std::string& default_label) {
    std::vector<Entity> entities;
    int start = -1;
    auto flush = [&](int end) {
        if (start >= 0) {
            entities.push_back({default_label, {{start, end}}});
            start = -1;
        }
    };
    for (size_t i = 0; i < labels.size(); ++i) {
        switch (labels[i]) {
            case 'B':
                flush(static_cast<int>(i) - 1);
                start = static_cast<int>(i);
                break;
            case 'I':
                // A dangling I opens an entity as if it were B.
                if (start < 0) {
                    start = static_cast<int>(i);
                }
                break;
            case 'O':
                flush(static_cast<int>(i) - 1);
                break;
            default:
                throw Error(std::string("unknown BIO label '") + labels[i] + "'");
        }
    }
    flush(static_cast<int>(labels.size()) - 1);
    return entities;
}

PredictionSet make_prediction_set(std::string model_id, std::string record_id,
                                  std::vector<Entity> entities) {
    std::sort(entities.begin(), entities.end(), [](const Entity& a, const Entity& b) {
        return canonical_key(a) < canonical_key(b);
    });
    entities.erase(std::unique(entities.begin(), entities.end(),
                               [](const Entity& a, const Entity& b) {
                                   return canonical_key(a) == canonical_key(b);
                               }),
                   entities.end());
    return {std::move(model_id), std::move(record_id), std::move(entities)};
}

UniformEntity to_uniform_entity(const Entity& entity, const Sentence& sentence) {
    UniformEntity u;
    u.index = indices_from_fragments(entity.fragments);
    u.text = entity_text(sentence, u.index);
    u.label = entity.label;
    return u;
}

Entity to_entity(const UniformEntity& uniform) {
    Entity e;
    e.label = uniform.label;
    e.fragments = fragments_from_indices(uniform.index);
    return e;
}

Sentence record_sentence(const UniformRecord& record) {
    return Sentence::from_tokens(record.sentence);
}

}  // namespace dner
