#include "dner/formats.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace dner {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return "";
    }
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

int parse_int(const std::string& s, int line_no) {
    size_t pos = 0;
    int value = 0;
    try {
        value = std::stoi(s, &pos);
    } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(line_no) + ": '" + s + "' is not an integer");
    }
    if (pos != s.size()) {
        throw ParseError("line " + std::to_string(line_no) + ": '" + s + "' is not an integer");
    }
    return value;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    return parts;
}

Entity parse_gold_segment(const std::string& segment, const Sentence& sentence, int line_no) {
    const std::string seg = trim(segment);
    const size_t space = seg.find(' ');
    if (space == std::string::npos) {
        throw ParseError("line " + std::to_string(line_no) +
                         ": annotation segment '" + seg + "' has no label");
    }
    const std::string index_part = seg.substr(0, space);
    const std::string label = trim(seg.substr(space + 1));
    if (label.empty()) {
        throw ParseError("line " + std::to_string(line_no) + ": empty entity label");
    }
    const std::vector<std::string> numbers = split(index_part, ',');
    if (numbers.size() % 2 != 0) {
        throw ParseError("line " + std::to_string(line_no) + ": odd index count in '" +
                         index_part + "' (expected start,end pairs)");
    }
    std::vector<Fragment> fragments;
    for (size_t i = 0; i < numbers.size(); i += 2) {
        const int start = parse_int(numbers[i], line_no);
        const int end = parse_int(numbers[i + 1], line_no);
        if (start < 0 || end < start || end >= sentence.token_count()) {
            throw ParseError("line " + std::to_string(line_no) + ": fragment [" +
                             std::to_string(start) + "," + std::to_string(end) +
                             "] outside sentence of " +
                             std::to_string(sentence.token_count()) + " tokens");
        }
        fragments.push_back({start, end});
    }
    return make_entity_from_fragments(label, fragments);
}

}  // namespace

const char* to_string(ModelFormatKind kind) {
    switch (kind) {
        case ModelFormatKind::TransitionBased: return "transition_based";
        case ModelFormatKind::SpanRelation: return "span_relation";
        case ModelFormatKind::CharSpanList: return "char_span_list";
        case ModelFormatKind::IndexList: return "index_list";
        case ModelFormatKind::IndexListTagged: return "index_list_tagged";
    }
    return "unknown";
}

ModelFormatKind model_format_kind_from_string(const std::string& name) {
    if (name == "transition_based") return ModelFormatKind::TransitionBased;
    if (name == "span_relation") return ModelFormatKind::SpanRelation;
    if (name == "char_span_list") return ModelFormatKind::CharSpanList;
    if (name == "index_list") return ModelFormatKind::IndexList;
    if (name == "index_list_tagged") return ModelFormatKind::IndexListTagged;
    throw ParseError("unknown model format kind '" + name + "'");
}

std::string make_record_id(const std::string& doc_id, size_t ordinal) {
    return doc_id + ":" + std::to_string(ordinal);
}

std::vector<GoldDocument> parse_gold(std::istream& in, const std::string& default_doc_id) {
    std::vector<GoldDocument> docs;
    std::set<std::string> seen_ids;

    auto open_doc = [&](const std::string& id, int line_no) -> GoldDocument& {
        if (!seen_ids.insert(id).second) {
            throw ParseError("line " + std::to_string(line_no) + ": duplicate document id '" +
                             id + "'");
        }
        docs.push_back({id, {}});
        return docs.back();
    };

    GoldDocument* current = nullptr;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string sentence_line = trim(line);
        if (sentence_line.empty()) {
            continue;  // separator between records
        }
        if (sentence_line.rfind("#doc", 0) == 0) {
            const std::string id = trim(sentence_line.substr(4));
            if (id.empty()) {
                throw ParseError("line " + std::to_string(line_no) + ": #doc without an id");
            }
            current = &open_doc(id, line_no);
            continue;
        }

        std::vector<std::string> tokens = split(sentence_line, ' ');
        for (const auto& t : tokens) {
            if (t.empty()) {
                throw ParseError("line " + std::to_string(line_no) +
                                 ": empty token (double space?) in sentence line");
            }
        }
        Sentence sentence = Sentence::from_tokens(std::move(tokens));

        GoldSentence gs;
        gs.sentence = std::move(sentence);
        if (std::getline(in, line)) {
            ++line_no;
            const std::string annotation_line = trim(line);
            if (!annotation_line.empty()) {
                for (const auto& segment : split(annotation_line, '|')) {
                    gs.entities.push_back(
                        parse_gold_segment(segment, gs.sentence, line_no));
                }
            }
        }
        if (current == nullptr) {
            current = &open_doc(default_doc_id, line_no);
        }
        current->sentences.push_back(std::move(gs));
    }
    return docs;
}

namespace {

const json& require_field(const json& obj, const char* field, const std::string& where) {
    auto it = obj.find(field);
    if (it == obj.end()) {
        throw ParseError(where + ": missing field '" + field + "'");
    }
    return *it;
}

std::string require_string(const json& obj, const char* field, const std::string& where) {
    const json& v = require_field(obj, field, where);
    if (!v.is_string()) {
        throw ParseError(where + ": field '" + field + "' must be a string");
    }
    return v.get<std::string>();
}

int json_int(const json& v, const std::string& where) {
    if (!v.is_number_integer()) {
        throw ParseError(where + ": expected an integer");
    }
    return v.get<int>();
}

std::vector<std::pair<int, int>> json_pair_list(const json& v, const std::string& where) {
    if (!v.is_array()) {
        throw ParseError(where + ": expected an array of [start,end] pairs");
    }
    std::vector<std::pair<int, int>> pairs;
    for (const auto& item : v) {
        if (!item.is_array() || item.size() != 2) {
            throw ParseError(where + ": span must be a [start,end] pair");
        }
        pairs.emplace_back(json_int(item[0], where), json_int(item[1], where));
    }
    return pairs;
}

std::vector<Entity> parse_transition_entities(const json& rec, const std::string& where) {
    const json& entities = require_field(rec, "entities", where);
    if (!entities.is_array()) {
        throw ParseError(where + ": 'entities' must be an array");
    }
    std::vector<Entity> out;
    for (const auto& e : entities) {
        const std::string type = require_string(e, "type", where);
        const auto spans = json_pair_list(require_field(e, "spans", where), where);
        std::vector<Fragment> fragments;
        for (const auto& [s, t] : spans) {
            if (s < 0 || t < s) {
                throw ParseError(where + ": malformed span [" + std::to_string(s) + "," +
                                 std::to_string(t) + "]");
            }
            fragments.push_back({s, t});
        }
        if (fragments.empty()) {
            throw ParseError(where + ": entity with no spans");
        }
        out.push_back(make_entity_from_fragments(type, fragments));
    }
    return out;
}

std::vector<Entity> parse_span_relation_entities(const json& rec, const std::string& where,
                                                 GraphResolution mode) {
    const json& ner = require_field(rec, "ner", where);
    if (!ner.is_array()) {
        throw ParseError(where + ": 'ner' must be an array");
    }
    FragmentGraph graph;
    for (const auto& item : ner) {
        if (!item.is_array() || item.size() != 3 || !item[2].is_string()) {
            throw ParseError(where + ": ner item must be [start,end,type]");
        }
        const int s = json_int(item[0], where);
        const int t = json_int(item[1], where);
        if (s < 0 || t < s) {
            throw ParseError(where + ": malformed ner span [" + std::to_string(s) + "," +
                             std::to_string(t) + "]");
        }
        graph.nodes.push_back({{s, t}, item[2].get<std::string>()});
    }
    if (auto it = rec.find("relations"); it != rec.end()) {
        if (!it->is_array()) {
            throw ParseError(where + ": 'relations' must be an array");
        }
        const int n = static_cast<int>(graph.nodes.size());
        for (const auto& item : *it) {
            if (!item.is_array() || item.size() != 2) {
                throw ParseError(where + ": relation must be an [i,j] pair");
            }
            const int i = json_int(item[0], where);
            const int j = json_int(item[1], where);
            if (i < 0 || i >= n || j < 0 || j >= n) {
                throw ParseError(where + ": relation references unknown span " +
                                 std::to_string(i < 0 || i >= n ? i : j));
            }
            if (i == j) {
                throw ParseError(where + ": relation links a span to itself");
            }
            graph.edges.emplace_back(i, j);
        }
    }
    try {
        return resolve_fragment_graph(graph, mode);
    } catch (const LabelConflictError& e) {
        throw ParseError(where + ": " + e.what());
    }
}

std::vector<Entity> parse_char_span_entities(const json& rec, const std::string& where) {
    const std::string text = require_string(rec, "text", where);
    const auto word_spans = json_pair_list(require_field(rec, "word2char_span", where), where);
    Sentence sentence;
    try {
        sentence = Sentence::from_text(text, word_spans);
    } catch (const Error& e) {
        throw ParseError(where + ": bad word2char_span: " + e.what());
    }
    const json& entities = require_field(rec, "entity_list", where);
    if (!entities.is_array()) {
        throw ParseError(where + ": 'entity_list' must be an array");
    }
    std::vector<Entity> out;
    for (const auto& e : entities) {
        const std::string type = require_string(e, "type", where);
        const auto spans = json_pair_list(require_field(e, "char_spans", where), where);
        std::vector<int> indices;
        try {
            indices = char_span_to_token_indices(sentence, spans);
        } catch (const AlignmentError& err) {
            throw ParseError(where + ": " + err.what());
        }
        out.push_back(make_entity(type, std::move(indices)));
    }
    return out;
}

std::vector<Entity> parse_index_list_entities(const json& rec, const std::string& where,
                                              bool tagged) {
    if (tagged) {
        if (auto it = rec.find("tag_scheme"); it != rec.end() && !it->is_string()) {
            throw ParseError(where + ": 'tag_scheme' must be a string");
        }
    }
    const json& entities = require_field(rec, "entities", where);
    if (!entities.is_array()) {
        throw ParseError(where + ": 'entities' must be an array");
    }
    std::vector<Entity> out;
    for (const auto& e : entities) {
        const std::string type = require_string(e, "type", where);
        const json& index = require_field(e, "index", where);
        if (!index.is_array() || index.empty()) {
            throw ParseError(where + ": 'index' must be a non-empty array");
        }
        std::vector<int> indices;
        indices.reserve(index.size());
        for (const auto& v : index) {
            indices.push_back(json_int(v, where));
        }
        try {
            out.push_back({type, fragments_from_indices(indices)});
        } catch (const InvalidIndicesError& err) {
            throw ParseError(where + ": " + err.what());
        }
    }
    return out;
}

}  // namespace

std::vector<PredictionSet> parse_model_output(ModelFormatKind kind, std::istream& in,
                                              const std::string& model_id,
                                              GraphResolution span_relation_mode) {
    std::vector<PredictionSet> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string trimmed = trim(line);
        if (trimmed.empty()) {
            continue;
        }
        json rec;
        try {
            rec = json::parse(trimmed);
        } catch (const json::exception& e) {
            throw ParseError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
        }
        if (!rec.is_object()) {
            throw ParseError("line " + std::to_string(line_no) + ": record must be an object");
        }
        const std::string record_id =
            require_string(rec, "record_id", "line " + std::to_string(line_no));
        const std::string where = "record '" + record_id + "'";

        std::vector<Entity> entities;
        switch (kind) {
            case ModelFormatKind::TransitionBased:
                entities = parse_transition_entities(rec, where);
                break;
            case ModelFormatKind::SpanRelation:
                entities = parse_span_relation_entities(rec, where, span_relation_mode);
                break;
            case ModelFormatKind::CharSpanList:
                entities = parse_char_span_entities(rec, where);
                break;
            case ModelFormatKind::IndexList:
                entities = parse_index_list_entities(rec, where, false);
                break;
            case ModelFormatKind::IndexListTagged:
                entities = parse_index_list_entities(rec, where, true);
                break;
        }
        out.push_back(make_prediction_set(model_id, record_id, std::move(entities)));
    }
    return out;
}

namespace {

struct UnionFind {
    std::vector<int> parent;

    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }

    int find(int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }

    void unite(int a, int b) { parent[find(a)] = find(b); }
};

void check_component_labels(const FragmentGraph& graph, UnionFind& uf) {
    std::map<int, std::string> root_label;
    for (size_t i = 0; i < graph.nodes.size(); ++i) {
        const int root = uf.find(static_cast<int>(i));
        auto [it, inserted] = root_label.emplace(root, graph.nodes[i].label);
        if (!inserted && it->second != graph.nodes[i].label) {
            throw LabelConflictError("connected fragments carry conflicting labels '" +
                                     it->second + "' and '" + graph.nodes[i].label + "'");
        }
    }
}

// Bron-Kerbosch with pivoting over adjacency bitsets; graphs here are tiny
// (a handful of fragments per sentence).
void bron_kerbosch(std::vector<int>& r, std::set<int> p, std::set<int> x,
                   const std::vector<std::set<int>>& adj,
                   std::vector<std::vector<int>>& cliques) {
    if (p.empty() && x.empty()) {
        cliques.push_back(r);
        return;
    }
    int pivot = -1;
    size_t best = 0;
    for (const auto& pool : {p, x}) {
        for (int v : pool) {
            size_t count = 0;
            for (int u : p) {
                count += adj[v].count(u);
            }
            if (pivot == -1 || count > best) {
                pivot = v;
                best = count;
            }
        }
    }
    std::vector<int> candidates;
    for (int v : p) {
        if (pivot == -1 || !adj[pivot].count(v)) {
            candidates.push_back(v);
        }
    }
    for (int v : candidates) {
        r.push_back(v);
        std::set<int> p2, x2;
        for (int u : p) {
            if (adj[v].count(u)) p2.insert(u);
        }
        for (int u : x) {
            if (adj[v].count(u)) x2.insert(u);
        }
        bron_kerbosch(r, std::move(p2), std::move(x2), adj, cliques);
        r.pop_back();
        p.erase(v);
        x.insert(v);
    }
}

}  // namespace

std::vector<Entity> resolve_fragment_graph(const FragmentGraph& graph, GraphResolution mode) {
    const int n = static_cast<int>(graph.nodes.size());
    std::vector<std::set<int>> adj(n);
    UnionFind uf(n);
    for (const auto& [a, b] : graph.edges) {
        if (a < 0 || a >= n || b < 0 || b >= n) {
            throw Error("graph edge references unknown node");
        }
        if (a == b) {
            throw Error("graph edge is a self-loop at node " + std::to_string(a));
        }
        adj[a].insert(b);
        adj[b].insert(a);
        uf.unite(a, b);
    }
    check_component_labels(graph, uf);

    std::vector<std::vector<int>> groups;
    if (mode == GraphResolution::Components) {
        std::map<int, std::vector<int>> by_root;
        for (int i = 0; i < n; ++i) {
            by_root[uf.find(i)].push_back(i);
        }
        for (auto& [root, members] : by_root) {
            groups.push_back(std::move(members));
        }
    } else {
        std::set<int> p, x;
        for (int i = 0; i < n; ++i) {
            p.insert(i);
        }
        std::vector<int> r;
        bron_kerbosch(r, std::move(p), std::move(x), adj, groups);
    }

    std::vector<Entity> entities;
    entities.reserve(groups.size());
    for (const auto& group : groups) {
        std::vector<Fragment> fragments;
        fragments.reserve(group.size());
        for (int idx : group) {
            fragments.push_back(graph.nodes[idx].fragment);
        }
        entities.push_back(
            make_entity_from_fragments(graph.nodes[group.front()].label, fragments));
    }
    std::sort(entities.begin(), entities.end(), [](const Entity& a, const Entity& b) {
        return canonical_key(a) < canonical_key(b);
    });
    return entities;
}

std::vector<int> char_span_to_token_indices(const Sentence& sentence,
                                            const std::vector<std::pair<int, int>>& char_spans) {
    std::map<int, int> start_to_token, end_to_token;
    for (int i = 0; i < sentence.token_count(); ++i) {
        start_to_token[sentence.char_spans[i].first] = i;
        end_to_token[sentence.char_spans[i].second] = i;
    }
    std::set<int> covered;
    for (const auto& [cs, ce] : char_spans) {
        auto s_it = start_to_token.find(cs);
        auto e_it = end_to_token.find(ce);
        if (s_it == start_to_token.end() || e_it == end_to_token.end() ||
            e_it->second < s_it->second) {
            throw AlignmentError("character span [" + std::to_string(cs) + "," +
                                 std::to_string(ce) + "] does not cover whole tokens");
        }
        for (int i = s_it->second; i <= e_it->second; ++i) {
            covered.insert(i);
        }
    }
    return {covered.begin(), covered.end()};
}

void validate_uniform_record(const UniformRecord& record) {
    if (record.record_id.empty()) {
        throw ConsistencyError("record without record_id");
    }
    if (!record.entity_list.empty() && record.sentence.empty()) {
        throw ConsistencyError("record '" + record.record_id +
                               "' carries entities but no tokens");
    }
    const int n = static_cast<int>(record.sentence.size());
    for (const auto& e : record.entity_list) {
        if (e.index.empty()) {
            throw ConsistencyError("record '" + record.record_id + "': entity with empty index");
        }
        int prev = -1;
        for (int idx : e.index) {
            if (idx <= prev) {
                throw ConsistencyError("record '" + record.record_id +
                                       "': index list not strictly increasing");
            }
            if (idx < 0 || idx >= n) {
                throw ConsistencyError("record '" + record.record_id + "': index " +
                                       std::to_string(idx) + " outside sentence of " +
                                       std::to_string(n) + " tokens");
            }
            prev = idx;
        }
        std::string expected;
        for (size_t i = 0; i < e.index.size(); ++i) {
            if (i > 0) {
                expected += ' ';
            }
            expected += record.sentence[e.index[i]];
        }
        if (e.text != expected) {
            throw ConsistencyError("record '" + record.record_id + "': entity text '" + e.text +
                                   "' does not match its tokens '" + expected + "'");
        }
    }
}

std::string uniform_record_to_json(const UniformRecord& record) {
    validate_uniform_record(record);
    json j = json::object();
    if (!record.extras.empty()) {
        json extras = json::parse(record.extras);
        for (auto& [key, value] : extras.items()) {
            j[key] = std::move(value);
        }
    }
    j["record_id"] = record.record_id;
    j["text"] = record.text;
    j["sentence"] = record.sentence;
    json entities = json::array();
    for (const auto& e : record.entity_list) {
        entities.push_back({{"text", e.text}, {"index", e.index}, {"label", e.label}});
    }
    j["entity_list"] = std::move(entities);
    return j.dump();
}

void write_uniform(const std::vector<UniformRecord>& records, std::ostream& out) {
    for (const auto& record : records) {
        out << uniform_record_to_json(record) << '\n';
    }
}

std::vector<UniformRecord> read_uniform(std::istream& in, const std::string& default_label) {
    std::vector<UniformRecord> records;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string trimmed = trim(line);
        if (trimmed.empty()) {
            continue;
        }
        json j;
        try {
            j = json::parse(trimmed);
        } catch (const json::exception& e) {
            throw ParseError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
        }
        if (!j.is_object()) {
            throw ParseError("line " + std::to_string(line_no) + ": record must be an object");
        }
        const std::string where = "line " + std::to_string(line_no);
        UniformRecord record;
        record.record_id = require_string(j, "record_id", where);
        record.text = require_string(j, "text", where);
        const json& sentence = require_field(j, "sentence", where);
        if (!sentence.is_array()) {
            throw ParseError(where + ": 'sentence' must be an array of tokens");
        }
        for (const auto& t : sentence) {
            if (!t.is_string()) {
                throw ParseError(where + ": sentence tokens must be strings");
            }
            record.sentence.push_back(t.get<std::string>());
        }
        const json& entities = require_field(j, "entity_list", where);
        if (!entities.is_array()) {
            throw ParseError(where + ": 'entity_list' must be an array");
        }
        for (const auto& e : entities) {
            if (!e.is_object()) {
                throw ParseError(where + ": entity_list items must be objects");
            }
            UniformEntity u;
            u.text = require_string(e, "text", where);
            const json& index = require_field(e, "index", where);
            if (!index.is_array()) {
                throw ParseError(where + ": entity 'index' must be an array");
            }
            for (const auto& v : index) {
                u.index.push_back(json_int(v, where));
            }
            if (auto it = e.find("label"); it != e.end()) {
                if (!it->is_string()) {
                    throw ParseError(where + ": entity 'label' must be a string");
                }
                u.label = it->get<std::string>();
            } else {
                u.label = default_label;
            }
            record.entity_list.push_back(std::move(u));
        }
        json extras = json::object();
        for (auto& [key, value] : j.items()) {
            if (key != "record_id" && key != "text" && key != "sentence" &&
                key != "entity_list") {
                extras[key] = value;
            }
        }
        if (!extras.empty()) {
            record.extras = extras.dump();
        }
        validate_uniform_record(record);
        records.push_back(std::move(record));
    }
    return records;
}

}  // namespace dner
