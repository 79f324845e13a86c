#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "dner/core.hpp"
#include "dner/voting.hpp"

// LLM arbitration over per-model candidate entity lists: engineered
// prompts with ordering and token-restriction guards, a pluggable chat
// client (live HTTP or scripted/policy mocks), response validation, and a
// voting fallback so arbitration never loses a record.

namespace dner {

// Chat client failures. Rate-limit and server errors are retried by
// submit(); the rest surface immediately and trigger the voting fallback.
class ClientError : public Error {
public:
    using Error::Error;
};

class RateLimitedError : public ClientError {
public:
    using Error::Error;
};

class ServerError : public ClientError {
public:
    using Error::Error;
};

class TimeoutError : public ClientError {
public:
    using Error::Error;
};

class TransportError : public ClientError {
public:
    using Error::Error;
};

// No entity list could be extracted from a response.
class UnparseableResponseError : public Error {
public:
    using Error::Error;
};

struct PromptConfig {
    std::string task_description;
    std::string annotation_description;
    std::string sample_description;
    std::string order_invariance_clause;
    std::string token_restriction_clause;
    std::string model_name = "gpt-4";
    double temperature = 0.0;
    int max_retries = 3;
    std::chrono::milliseconds request_timeout{30000};

    // Defaults carry the full engineered prompt for the adverse-drug-event
    // setting; override the text sections for other corpora.
    static PromptConfig defaults();
};

void validate_prompt_config(const PromptConfig& config);

// One model's candidates in the uniform entity shape.
struct CandidateList {
    std::string model_id;
    std::vector<UniformEntity> entities;
};

struct ArbitrationRequest {
    UniformRecord record;  // gold-free
    std::vector<CandidateList> candidate_lists;
    bool canonicalized = false;
};

// Builds a request from per-model prediction sets; entity texts are
// derived from the record's tokens.
ArbitrationRequest make_arbitration_request(const UniformRecord& record,
                                            std::span<const PredictionSet> predictions);

// Defeats prompt order sensitivity: sorts every candidate list by
// canonical key, then replaces model ids with entity_list_1..n pseudonyms
// assigned by content hash, so any permutation of the same lists yields
// the same request.
ArbitrationRequest canonicalize_inputs(const ArbitrationRequest& request);

struct Prompt {
    std::string system;
    std::string user;
    std::string record_id;
};

// Assembles the engineered prompt: task, annotation and sample
// descriptions, both guard clauses, then the serialized record and
// candidate lists plus the output-format instruction.
Prompt build_prompt(const ArbitrationRequest& request, const PromptConfig& config);

// FNV-1a, used for candidate-list content hashes and prompt hashes.
std::uint64_t fnv1a64(std::string_view data);
std::string prompt_hash(const Prompt& prompt);

class ChatClient {
public:
    virtual ~ChatClient() = default;

    // Returns the assistant message text for one prompt. Throws a
    // ClientError subtype on failure.
    virtual std::string complete(const Prompt& prompt, const PromptConfig& config) = 0;
};

using SleepFn = std::function<void(std::chrono::milliseconds)>;

struct SubmitResult {
    std::string text;
    int attempts = 0;
};

// Sends the prompt, retrying rate-limit and server errors with
// exponential backoff (base 1s, factor 2, jitter) up to
// config.max_retries. Exhausted retries become a TransportError. sleep
// defaults to a real wall-clock sleep and is injectable for tests.
SubmitResult submit(const Prompt& prompt, const PromptConfig& config, ChatClient& client,
                    const SleepFn& sleep = {});

enum class RejectReason {
    UnknownToken,
    BadIndices,
    TextMismatch,
    NotInUnion,
    Unparseable,
};

const char* to_string(RejectReason reason);

struct RejectedItem {
    std::string item;  // serialized response item
    RejectReason reason;
};

struct ValidationResult {
    std::vector<Entity> entities;  // survivors, deduplicated by canonical key
    std::vector<RejectedItem> report;
};

// Extracts the entity list from a raw response and validates every item:
// indices strictly increasing and in range, text equal to the indexed
// tokens (any token absent from the sentence is an unknown_token
// rejection), and membership in the candidate union when strict_union is
// set. Throws UnparseableResponseError when no list can be extracted.
ValidationResult parse_and_validate_response(const std::string& raw, const UniformRecord& record,
                                             const std::vector<Entity>& candidate_union,
                                             bool strict_union,
                                             const std::string& default_label = "");

enum class OutcomeSource {
    Arbitrated,
    FallbackVoting,
};

const char* to_string(OutcomeSource source);

struct ArbitrationOutcome {
    std::vector<Entity> entities;
    OutcomeSource source = OutcomeSource::Arbitrated;
    std::string raw_response;
    std::vector<RejectedItem> validation_report;
    int attempt_count = 0;
};

// One transcript line per request, for audit and offline replay.
struct TranscriptEntry {
    std::string record_id;
    std::string prompt_hash;
    std::string raw_response;
    std::vector<RejectedItem> validation_report;
    double latency_ms = 0.0;
    std::string error;
};

std::string transcript_entry_to_json(const TranscriptEntry& entry);

// Full arbitration of one record: canonicalize, build the prompt, submit,
// validate. An unparseable response earns one corrective re-prompt; any
// transport, timeout or second unparseable failure falls back to the
// voting result. Never throws for client-side failures.
ArbitrationOutcome arbitrate_record(const UniformRecord& record,
                                    std::span<const PredictionSet> predictions,
                                    const VoteConfig& vote_config,
                                    const PromptConfig& prompt_config, ChatClient& client,
                                    bool strict_union, const SleepFn& sleep = {},
                                    std::vector<TranscriptEntry>* transcript = nullptr);

// Blocking token bucket; rate <= 0 disables limiting.
class TokenBucket {
public:
    TokenBucket(double rate_per_sec, double burst);

    void acquire();

private:
    std::mutex mutex_;
    double rate_;
    double burst_;
    double tokens_;
    std::chrono::steady_clock::time_point last_refill_;
};

struct RecordTask {
    UniformRecord record;
    std::vector<PredictionSet> predictions;
};

struct ArbiterOptions {
    bool strict_union = false;
    int concurrency = 4;
    double requests_per_second = 0.0;  // token-bucket rate; 0 = unlimited
};

// Arbitrates many records with up to options.concurrency in-flight
// requests. Outcomes and transcript entries are assembled in record
// order regardless of completion order.
std::vector<ArbitrationOutcome> arbitrate_records(const std::vector<RecordTask>& tasks,
                                                  const VoteConfig& vote_config,
                                                  const PromptConfig& prompt_config,
                                                  ChatClient& client,
                                                  const ArbiterOptions& options,
                                                  std::vector<TranscriptEntry>* transcript = nullptr);

// Mock client scripted by record_id. Files are JSONL objects with
// record_id and response fields; transcript lines (raw_response) are
// accepted too, so a previous run can be replayed.
class ScriptedClient : public ChatClient {
public:
    explicit ScriptedClient(std::map<std::string, std::string> responses,
                            std::string default_response = "");

    static ScriptedClient from_file(const std::string& path);

    std::string complete(const Prompt& prompt, const PromptConfig& config) override;

private:
    std::map<std::string, std::string> responses_;
    std::string default_response_;
};

// Built-in mock policies (majority, union, echo_first). These read the
// candidate lists back out of the prompt text, so they exercise the same
// surface a live model sees.
std::unique_ptr<ChatClient> make_policy_client(const std::string& policy);

struct LiveClientConfig {
    std::string endpoint;  // full chat-completions URL
    std::string api_key_env = "DNER_ARBITER_API_KEY";
};

// HTTP chat-completions client. The bearer token is read from the
// configured environment variable at construction; a missing token throws
// before any request is sent.
class HttpChatClient : public ChatClient {
public:
    explicit HttpChatClient(LiveClientConfig config);

    std::string complete(const Prompt& prompt, const PromptConfig& config) override;

private:
    LiveClientConfig config_;
    std::string api_key_;
};

}  // namespace dner
