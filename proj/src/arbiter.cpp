#include "dner/arbiter.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace dner {

using nlohmann::json;

PromptConfig PromptConfig::defaults() {
    PromptConfig c;
    c.task_description =
        "You are an NER expert in the medical field who can identify side effect symptom "
        "entities and want to select the best answer from the output of five discontinuous "
        "named entity recognition models in a health data set.";
    c.annotation_description =
        "An entity can be any adverse reaction or adverse event. These symptoms may be "
        "physical, such as nausea, vomiting, heart palpitations, headache, rash, redness, "
        "and swelling, or psychological, such as anxiety, delusions, or psychosis.";
    c.sample_description =
        "The input is a JSON object with a \"record\" (the original \"text\" and its "
        "tokenized \"sentence\") and \"candidates\", one entity list per model. Each entity "
        "carries its \"text\", its token \"index\" positions within the sentence, and a "
        "\"label\". Example input: {\"candidates\": {\"entity_list_1\": [{\"index\": [0, 1, 2], "
        "\"label\": \"ADE\", \"text\": \"stiff upper leg\"}], \"entity_list_2\": [{\"index\": "
        "[0, 4, 5], \"label\": \"ADE\", \"text\": \"stiff quad area\"}]}, \"record\": "
        "{\"sentence\": [\"stiff\", \"upper\", \"leg\", \",\", \"quad\", \"area\", \".\"], "
        "\"text\": \"stiff upper leg , quad area .\"}}. Example output: {\"entity_list\": "
        "[{\"index\": [0, 1, 2], \"label\": \"ADE\", \"text\": \"stiff upper leg\"}, "
        "{\"index\": [0, 4, 5], \"label\": \"ADE\", \"text\": \"stiff quad area\"}]}.";
    c.order_invariance_clause =
        "You act as an arbitrator between the candidate entity lists; your judgment must "
        "not be influenced by the order in which the entity lists are presented.";
    c.token_restriction_clause =
        "Select entity tokens only from the \"sentence\" token list, copying each token "
        "exactly as written. An entity may combine tokens that are not adjacent in the "
        "sentence; its \"index\" values must be strictly increasing.";
    return c;
}

void validate_prompt_config(const PromptConfig& config) {
    auto require = [](const std::string& value, const char* name) {
        if (value.empty()) {
            throw InputError(std::string("prompt config: ") + name + " must not be empty");
        }
    };
    require(config.task_description, "task_description");
    require(config.annotation_description, "annotation_description");
    require(config.sample_description, "sample_description");
    require(config.order_invariance_clause, "order_invariance_clause");
    require(config.token_restriction_clause, "token_restriction_clause");
    if (config.temperature < 0) {
        throw InputError("prompt config: temperature must be >= 0");
    }
    if (config.max_retries < 0) {
        throw InputError("prompt config: max_retries must be >= 0");
    }
}

namespace {

json uniform_entity_json(const UniformEntity& e) {
    return {{"text", e.text}, {"index", e.index}, {"label", e.label}};
}

std::string candidate_list_dump(const std::vector<UniformEntity>& entities) {
    json arr = json::array();
    for (const auto& e : entities) {
        arr.push_back(uniform_entity_json(e));
    }
    return arr.dump();
}

constexpr const char* kCorrectionInstruction =
    "\nYour previous reply could not be parsed. Respond with exactly one JSON object in "
    "the required format and nothing else.";

}  // namespace

ArbitrationRequest make_arbitration_request(const UniformRecord& record,
                                            std::span<const PredictionSet> predictions) {
    ArbitrationRequest request;
    request.record = record;
    request.record.entity_list.clear();  // candidates only, never gold
    const Sentence sentence = record_sentence(record);
    for (const auto& set : predictions) {
        CandidateList list;
        list.model_id = set.model_id;
        for (const auto& entity : set.entities) {
            list.entities.push_back(to_uniform_entity(entity, sentence));
        }
        request.candidate_lists.push_back(std::move(list));
    }
    return request;
}

ArbitrationRequest canonicalize_inputs(const ArbitrationRequest& request) {
    if (request.canonicalized) {
        throw InputError("arbitration request is already canonicalized");
    }
    struct Keyed {
        std::uint64_t hash;
        std::string dump;
        CandidateList list;
    };
    std::vector<Keyed> keyed;
    keyed.reserve(request.candidate_lists.size());
    for (const auto& list : request.candidate_lists) {
        CandidateList sorted = list;
        std::sort(sorted.entities.begin(), sorted.entities.end(),
                  [](const UniformEntity& a, const UniformEntity& b) {
                      return canonical_key(to_entity(a)) < canonical_key(to_entity(b));
                  });
        std::string dump = candidate_list_dump(sorted.entities);
        keyed.push_back({fnv1a64(dump), std::move(dump), std::move(sorted)});
    }
    std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
        return std::tie(a.hash, a.dump) < std::tie(b.hash, b.dump);
    });

    ArbitrationRequest out;
    out.record = request.record;
    out.canonicalized = true;
    for (size_t i = 0; i < keyed.size(); ++i) {
        keyed[i].list.model_id = "entity_list_" + std::to_string(i + 1);
        out.candidate_lists.push_back(std::move(keyed[i].list));
    }
    return out;
}

Prompt build_prompt(const ArbitrationRequest& request, const PromptConfig& config) {
    validate_prompt_config(config);

    Prompt prompt;
    prompt.record_id = request.record.record_id;
    prompt.system = config.task_description + "\n\n" + config.annotation_description + "\n\n" +
                    config.sample_description + "\n\n" + config.order_invariance_clause +
                    "\n\n" + config.token_restriction_clause;

    json payload;
    payload["record"] = {{"text", request.record.text}, {"sentence", request.record.sentence}};
    json candidates = json::object();
    for (const auto& list : request.candidate_lists) {
        json arr = json::array();
        for (const auto& e : list.entities) {
            arr.push_back(uniform_entity_json(e));
        }
        candidates[list.model_id] = std::move(arr);
    }
    payload["candidates"] = std::move(candidates);

    prompt.user = "Input:\n" + payload.dump() +
                  "\nRespond with exactly one JSON object of the form {\"entity_list\": "
                  "[{\"text\": \"...\", \"index\": [...], \"label\": \"...\"}]} and nothing "
                  "else. Return an empty \"entity_list\" if no entity applies.";
    return prompt;
}

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t hash = 14695981039346656037ULL;
    for (unsigned char c : data) {
        hash ^= c;
        hash *= 1099511628211ULL;
    }
    return hash;
}

std::string prompt_hash(const Prompt& prompt) {
    const std::uint64_t h = fnv1a64(prompt.system + '\x1e' + prompt.user);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

enum class SubmitStatus { Ok, Transport, Timeout };

struct InternalSubmit {
    std::string text;
    int attempts = 0;
    SubmitStatus status = SubmitStatus::Ok;
    std::string error;
};

std::chrono::milliseconds backoff_delay(int retry_index) {
    thread_local std::mt19937_64 rng{std::random_device{}()};
    std::uniform_real_distribution<double> jitter(0.5, 1.5);
    const double base_ms = 1000.0 * static_cast<double>(1ULL << retry_index);
    const double delay = std::min(base_ms * jitter(rng), 60000.0);
    return std::chrono::milliseconds(static_cast<long>(delay));
}

InternalSubmit submit_impl(const Prompt& prompt, const PromptConfig& config, ChatClient& client,
                           const SleepFn& sleep) {
    const SleepFn do_sleep =
        sleep ? sleep : SleepFn([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); });
    InternalSubmit result;
    for (int retry = 0;; ++retry) {
        ++result.attempts;
        try {
            result.text = client.complete(prompt, config);
            result.status = SubmitStatus::Ok;
            return result;
        } catch (const RateLimitedError& e) {
            result.error = e.what();
        } catch (const ServerError& e) {
            result.error = e.what();
        } catch (const TimeoutError& e) {
            result.status = SubmitStatus::Timeout;
            result.error = e.what();
            return result;
        } catch (const ClientError& e) {
            result.status = SubmitStatus::Transport;
            result.error = e.what();
            return result;
        }
        if (retry >= config.max_retries) {
            result.status = SubmitStatus::Transport;
            result.error = "retries exhausted after " + std::to_string(result.attempts) +
                           " attempts: " + result.error;
            return result;
        }
        do_sleep(backoff_delay(retry));
    }
}

}  // namespace

SubmitResult submit(const Prompt& prompt, const PromptConfig& config, ChatClient& client,
                    const SleepFn& sleep) {
    validate_prompt_config(config);
    InternalSubmit r = submit_impl(prompt, config, client, sleep);
    switch (r.status) {
        case SubmitStatus::Ok:
            return {std::move(r.text), r.attempts};
        case SubmitStatus::Timeout:
            throw TimeoutError(r.error);
        case SubmitStatus::Transport:
            throw TransportError(r.error);
    }
    throw TransportError("unreachable submit status");
}

const char* to_string(RejectReason reason) {
    switch (reason) {
        case RejectReason::UnknownToken: return "unknown_token";
        case RejectReason::BadIndices: return "bad_indices";
        case RejectReason::TextMismatch: return "text_mismatch";
        case RejectReason::NotInUnion: return "not_in_union";
        case RejectReason::Unparseable: return "unparseable";
    }
    return "unknown";
}

const char* to_string(OutcomeSource source) {
    switch (source) {
        case OutcomeSource::Arbitrated: return "arbitrated";
        case OutcomeSource::FallbackVoting: return "fallback_voting";
    }
    return "unknown";
}

namespace {

// Pulls the entity array out of a raw model reply: the whole text, the
// outermost {...} slice, or the outermost [...] slice, whichever parses
// first.
json extract_entity_array(const std::string& raw) {
    std::vector<std::string> candidates;
    candidates.push_back(raw);
    const size_t ob = raw.find('{');
    const size_t cb = raw.rfind('}');
    if (ob != std::string::npos && cb != std::string::npos && ob < cb) {
        candidates.push_back(raw.substr(ob, cb - ob + 1));
    }
    const size_t oa = raw.find('[');
    const size_t ca = raw.rfind(']');
    if (oa != std::string::npos && ca != std::string::npos && oa < ca) {
        candidates.push_back(raw.substr(oa, ca - oa + 1));
    }
    for (const auto& text : candidates) {
        json parsed = json::parse(text, nullptr, false);
        if (parsed.is_discarded()) {
            continue;
        }
        if (parsed.is_array()) {
            return parsed;
        }
        if (parsed.is_object()) {
            auto it = parsed.find("entity_list");
            if (it != parsed.end() && it->is_array()) {
                return *it;
            }
        }
    }
    throw UnparseableResponseError("no entity list found in response");
}

std::vector<std::string> whitespace_split(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string piece;
    while (in >> piece) {
        out.push_back(piece);
    }
    return out;
}

}  // namespace

ValidationResult parse_and_validate_response(const std::string& raw, const UniformRecord& record,
                                             const std::vector<Entity>& candidate_union,
                                             bool strict_union,
                                             const std::string& default_label) {
    const json items = extract_entity_array(raw);

    std::set<std::string> union_keys;
    for (const auto& e : candidate_union) {
        union_keys.insert(canonical_key(e));
    }
    std::set<std::string> sentence_tokens(record.sentence.begin(), record.sentence.end());
    const int n = static_cast<int>(record.sentence.size());

    ValidationResult result;
    std::set<std::string> accepted_keys;
    for (const auto& item : items) {
        const std::string dump = item.dump();
        if (!item.is_object()) {
            result.report.push_back({dump, RejectReason::Unparseable});
            continue;
        }
        auto text_it = item.find("text");
        auto index_it = item.find("index");
        if (text_it == item.end() || !text_it->is_string() || index_it == item.end() ||
            !index_it->is_array()) {
            result.report.push_back({dump, RejectReason::Unparseable});
            continue;
        }
        std::vector<int> indices;
        bool numeric = true;
        for (const auto& v : *index_it) {
            if (!v.is_number_integer()) {
                numeric = false;
                break;
            }
            indices.push_back(v.get<int>());
        }
        bool indices_ok = numeric && !indices.empty();
        int prev = -1;
        for (int idx : indices) {
            if (idx <= prev || idx < 0 || idx >= n) {
                indices_ok = false;
                break;
            }
            prev = idx;
        }
        if (!indices_ok) {
            result.report.push_back({dump, RejectReason::BadIndices});
            continue;
        }

        const std::string& text = text_it->get_ref<const std::string&>();
        std::string expected;
        for (size_t i = 0; i < indices.size(); ++i) {
            if (i > 0) {
                expected += ' ';
            }
            expected += record.sentence[indices[i]];
        }
        if (text != expected) {
            bool all_known = true;
            for (const auto& piece : whitespace_split(text)) {
                if (!sentence_tokens.count(piece)) {
                    all_known = false;
                    break;
                }
            }
            result.report.push_back(
                {dump, all_known ? RejectReason::TextMismatch : RejectReason::UnknownToken});
            continue;
        }

        std::string label = default_label;
        if (auto it = item.find("label"); it != item.end() && it->is_string()) {
            label = it->get<std::string>();
        }
        Entity entity{label, fragments_from_indices(indices)};
        const std::string key = canonical_key(entity);
        if (strict_union && !union_keys.count(key)) {
            result.report.push_back({dump, RejectReason::NotInUnion});
            continue;
        }
        if (accepted_keys.insert(key).second) {
            result.entities.push_back(std::move(entity));
        }
    }
    std::sort(result.entities.begin(), result.entities.end(),
              [](const Entity& a, const Entity& b) {
                  return canonical_key(a) < canonical_key(b);
              });
    return result;
}

std::string transcript_entry_to_json(const TranscriptEntry& entry) {
    json report = json::array();
    for (const auto& item : entry.validation_report) {
        report.push_back({{"item", item.item}, {"reason", to_string(item.reason)}});
    }
    json j = {{"record_id", entry.record_id},
              {"prompt_hash", entry.prompt_hash},
              {"raw_response", entry.raw_response},
              {"validation_report", std::move(report)},
              {"latency_ms", entry.latency_ms},
              {"error", entry.error}};
    return j.dump();
}

ArbitrationOutcome arbitrate_record(const UniformRecord& record,
                                    std::span<const PredictionSet> predictions,
                                    const VoteConfig& vote_config,
                                    const PromptConfig& prompt_config, ChatClient& client,
                                    bool strict_union, const SleepFn& sleep,
                                    std::vector<TranscriptEntry>* transcript) {
    validate_prompt_config(prompt_config);
    const int model_count = static_cast<int>(predictions.size());
    const std::vector<Entity> voted = vote(tally(predictions), vote_config, model_count);

    std::vector<Entity> candidate_union;
    std::set<std::string> union_keys;
    std::set<std::string> labels;
    for (const auto& set : predictions) {
        for (const auto& entity : set.entities) {
            labels.insert(entity.label);
            if (union_keys.insert(canonical_key(entity)).second) {
                candidate_union.push_back(entity);
            }
        }
    }
    const std::string default_label = labels.size() == 1 ? *labels.begin() : "";

    const ArbitrationRequest request =
        canonicalize_inputs(make_arbitration_request(record, predictions));
    const Prompt base_prompt = build_prompt(request, prompt_config);

    ArbitrationOutcome outcome;
    int attempts_total = 0;
    for (int round = 0; round < 2; ++round) {
        Prompt prompt = base_prompt;
        if (round == 1) {
            prompt.user += kCorrectionInstruction;
        }
        TranscriptEntry entry;
        entry.record_id = record.record_id;
        entry.prompt_hash = prompt_hash(prompt);

        const auto t0 = std::chrono::steady_clock::now();
        InternalSubmit res = submit_impl(prompt, prompt_config, client, sleep);
        entry.latency_ms = std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - t0)
                               .count();
        attempts_total += res.attempts;

        if (res.status != SubmitStatus::Ok) {
            entry.error = res.error;
            if (transcript) {
                transcript->push_back(std::move(entry));
            }
            break;
        }

        entry.raw_response = res.text;
        outcome.raw_response = res.text;
        try {
            ValidationResult vr = parse_and_validate_response(res.text, record, candidate_union,
                                                              strict_union, default_label);
            entry.validation_report = vr.report;
            if (transcript) {
                transcript->push_back(std::move(entry));
            }
            outcome.entities = std::move(vr.entities);
            outcome.source = OutcomeSource::Arbitrated;
            outcome.validation_report = std::move(vr.report);
            outcome.attempt_count = attempts_total;
            return outcome;
        } catch (const UnparseableResponseError&) {
            entry.validation_report = {{res.text, RejectReason::Unparseable}};
            outcome.validation_report = entry.validation_report;
            if (transcript) {
                transcript->push_back(std::move(entry));
            }
        }
    }

    outcome.entities = voted;
    outcome.source = OutcomeSource::FallbackVoting;
    outcome.attempt_count = attempts_total;
    return outcome;
}

TokenBucket::TokenBucket(double rate_per_sec, double burst)
    : rate_(rate_per_sec),
      burst_(std::max(burst, 1.0)),
      tokens_(std::max(burst, 1.0)),
      last_refill_(std::chrono::steady_clock::now()) {}

void TokenBucket::acquire() {
    if (rate_ <= 0) {
        return;
    }
    for (;;) {
        std::chrono::milliseconds wait{0};
        {
            std::lock_guard<std::mutex> lock(mutex_);
            const auto now = std::chrono::steady_clock::now();
            const double elapsed = std::chrono::duration<double>(now - last_refill_).count();
            tokens_ = std::min(burst_, tokens_ + elapsed * rate_);
            last_refill_ = now;
            if (tokens_ >= 1.0) {
                tokens_ -= 1.0;
                return;
            }
            wait = std::chrono::milliseconds(
                static_cast<long>(std::max(1.0, (1.0 - tokens_) / rate_ * 1000.0)));
        }
        std::this_thread::sleep_for(wait);
    }
}

namespace {

class RateLimitedClient : public ChatClient {
public:
    RateLimitedClient(ChatClient& inner, TokenBucket& bucket) : inner_(inner), bucket_(bucket) {}

    std::string complete(const Prompt& prompt, const PromptConfig& config) override {
        bucket_.acquire();
        return inner_.complete(prompt, config);
    }

private:
    ChatClient& inner_;
    TokenBucket& bucket_;
};

}  // namespace

std::vector<ArbitrationOutcome> arbitrate_records(const std::vector<RecordTask>& tasks,
                                                  const VoteConfig& vote_config,
                                                  const PromptConfig& prompt_config,
                                                  ChatClient& client,
                                                  const ArbiterOptions& options,
                                                  std::vector<TranscriptEntry>* transcript) {
    std::vector<ArbitrationOutcome> outcomes(tasks.size());
    std::vector<std::vector<TranscriptEntry>> entries(tasks.size());

    TokenBucket bucket(options.requests_per_second, options.requests_per_second);
    RateLimitedClient limited(client, bucket);
    ChatClient& effective = options.requests_per_second > 0
                                ? static_cast<ChatClient&>(limited)
                                : client;

    const size_t workers = std::max(1, std::min<int>(options.concurrency,
                                                     static_cast<int>(tasks.size())));
    std::atomic<size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= tasks.size()) {
                return;
            }
            try {
                outcomes[i] = arbitrate_record(tasks[i].record, tasks[i].predictions,
                                               vote_config, prompt_config, effective,
                                               options.strict_union, {}, &entries[i]);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
                return;
            }
        }
    };

    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (size_t w = 0; w < workers; ++w) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
    if (transcript) {
        for (auto& rec_entries : entries) {
            for (auto& e : rec_entries) {
                transcript->push_back(std::move(e));
            }
        }
    }
    return outcomes;
}

ScriptedClient::ScriptedClient(std::map<std::string, std::string> responses,
                               std::string default_response)
    : responses_(std::move(responses)), default_response_(std::move(default_response)) {}

ScriptedClient ScriptedClient::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open mock script '" + path + "'");
    }
    std::map<std::string, std::string> responses;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("record_id")) {
            throw Error("mock script '" + path + "' line " + std::to_string(line_no) +
                        ": expected {record_id, response}");
        }
        std::string response;
        if (auto it = j.find("response"); it != j.end() && it->is_string()) {
            response = it->get<std::string>();
        } else if (auto raw = j.find("raw_response"); raw != j.end() && raw->is_string()) {
            response = raw->get<std::string>();
        } else {
            throw Error("mock script '" + path + "' line " + std::to_string(line_no) +
                        ": missing response text");
        }
        responses[j["record_id"].get<std::string>()] = std::move(response);
    }
    return ScriptedClient(std::move(responses));
}

std::string ScriptedClient::complete(const Prompt& prompt, const PromptConfig&) {
    auto it = responses_.find(prompt.record_id);
    if (it != responses_.end()) {
        return it->second;
    }
    if (!default_response_.empty()) {
        return default_response_;
    }
    throw TransportError("no scripted response for record '" + prompt.record_id + "'");
}

namespace {

// Reads the one-line JSON payload back out of the user message. Policy
// mocks see exactly what a live model would.
json prompt_payload(const Prompt& prompt) {
    const std::string marker = "Input:\n";
    const size_t at = prompt.user.find(marker);
    if (at == std::string::npos) {
        throw TransportError("prompt carries no input payload");
    }
    const size_t begin = at + marker.size();
    const size_t end = prompt.user.find('\n', begin);
    const std::string payload =
        prompt.user.substr(begin, end == std::string::npos ? std::string::npos : end - begin);
    json j = json::parse(payload, nullptr, false);
    if (j.is_discarded()) {
        throw TransportError("prompt payload is not valid JSON");
    }
    return j;
}

class PolicyClient : public ChatClient {
public:
    enum class Policy { Majority, Union, EchoFirst };

    explicit PolicyClient(Policy policy) : policy_(policy) {}

    std::string complete(const Prompt& prompt, const PromptConfig&) override {
        const json payload = prompt_payload(prompt);
        const json& candidates = payload.at("candidates");

        std::map<std::string, json> by_key;  // content key -> uniform item
        std::map<std::string, int> support;
        std::vector<std::string> first_list_keys;
        bool first = true;
        for (const auto& [model_id, list] : candidates.items()) {
            std::set<std::string> seen;
            for (const auto& item : list) {
                std::string key = item.at("label").get<std::string>() + '|' +
                                  item.at("index").dump();
                if (!seen.insert(key).second) {
                    continue;
                }
                by_key.emplace(key, item);
                ++support[key];
                if (first) {
                    first_list_keys.push_back(key);
                }
            }
            first = false;
        }

        std::vector<std::string> chosen;
        switch (policy_) {
            case Policy::Majority: {
                const int n = static_cast<int>(candidates.size());
                const int threshold = n / 2 + 1;
                for (const auto& [key, count] : support) {
                    if (count >= threshold) {
                        chosen.push_back(key);
                    }
                }
                break;
            }
            case Policy::Union:
                for (const auto& [key, item] : by_key) {
                    chosen.push_back(key);
                }
                break;
            case Policy::EchoFirst:
                chosen = first_list_keys;
                break;
        }
        std::sort(chosen.begin(), chosen.end());

        json out = json::object();
        out["entity_list"] = json::array();
        for (const auto& key : chosen) {
            out["entity_list"].push_back(by_key.at(key));
        }
        return out.dump();
    }

private:
    Policy policy_;
};

}  // namespace

std::unique_ptr<ChatClient> make_policy_client(const std::string& policy) {
    if (policy == "majority") {
        return std::make_unique<PolicyClient>(PolicyClient::Policy::Majority);
    }
    if (policy == "union") {
        return std::make_unique<PolicyClient>(PolicyClient::Policy::Union);
    }
    if (policy == "echo_first") {
        return std::make_unique<PolicyClient>(PolicyClient::Policy::EchoFirst);
    }
    throw Error("unknown mock policy '" + policy + "' (expected majority, union or echo_first)");
}

HttpChatClient::HttpChatClient(LiveClientConfig config) : config_(std::move(config)) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
        throw Error("live client requires the " + config_.api_key_env +
                    " environment variable");
    }
    api_key_ = key;
}

std::string HttpChatClient::complete(const Prompt& prompt, const PromptConfig& config) {
    // Split "scheme://host[:port]/path" into client base and request path.
    const size_t scheme = config_.endpoint.find("://");
    if (scheme == std::string::npos) {
        throw TransportError("endpoint '" + config_.endpoint + "' is not a URL");
    }
    const size_t path_at = config_.endpoint.find('/', scheme + 3);
    const std::string base =
        path_at == std::string::npos ? config_.endpoint : config_.endpoint.substr(0, path_at);
    const std::string path =
        path_at == std::string::npos ? "/" : config_.endpoint.substr(path_at);

    httplib::Client client(base);
    client.set_connection_timeout(config.request_timeout);
    client.set_read_timeout(config.request_timeout);
    client.set_write_timeout(config.request_timeout);

    json body = {{"model", config.model_name},
                 {"messages",
                  {{{"role", "system"}, {"content", prompt.system}},
                   {{"role", "user"}, {"content", prompt.user}}}},
                 {"temperature", config.temperature}};

    httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) {
        if (res.error() == httplib::Error::ConnectionTimeout ||
            res.error() == httplib::Error::Read) {
            throw TimeoutError("request timed out: " + httplib::to_string(res.error()));
        }
        throw TransportError("request failed: " + httplib::to_string(res.error()));
    }
    if (res->status == 429) {
        throw RateLimitedError("rate limited (HTTP 429)");
    }
    if (res->status >= 500) {
        throw ServerError("server error (HTTP " + std::to_string(res->status) + ")");
    }
    if (res->status < 200 || res->status >= 300) {
        throw TransportError("unexpected HTTP status " + std::to_string(res->status) + ": " +
                             res->body);
    }
    json parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) {
        throw TransportError("completion response is not valid JSON");
    }
    try {
        return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        throw TransportError("completion response has no message content");
    }
}

}  // namespace dner
