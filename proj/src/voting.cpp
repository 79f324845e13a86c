#include "dner/voting.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace dner {

int effective_threshold(const VoteConfig& config, int model_count) {
    if (model_count < 1) {
        throw InputError("model count must be at least 1");
    }
    if (config.threshold) {
        const int t = *config.threshold;
        if (t < 1 || t > model_count) {
            throw InputError("vote threshold " + std::to_string(t) + " outside [1," +
                             std::to_string(model_count) + "]");
        }
        return t;
    }
    // Default is the strict majority; TieRule::Include admits the exact
    // half for even model counts.
    if (config.tie_rule == TieRule::Include) {
        return (model_count + 1) / 2;
    }
    return model_count / 2 + 1;
}

std::vector<Tally> tally(std::span<const PredictionSet> predictions) {
    std::map<std::string, Tally> by_key;
    std::set<std::string> model_ids;
    const std::string* record_id = nullptr;
    for (const auto& set : predictions) {
        if (record_id == nullptr) {
            record_id = &set.record_id;
        } else if (set.record_id != *record_id) {
            throw InputError("mixed record ids in one tally: '" + *record_id + "' vs '" +
                             set.record_id + "'");
        }
        if (!model_ids.insert(set.model_id).second) {
            throw InputError("model '" + set.model_id + "' appears twice");
        }
        std::set<std::string> seen_keys;  // one vote per model per key
        for (const auto& entity : set.entities) {
            const std::string key = canonical_key(entity);
            if (!seen_keys.insert(key).second) {
                continue;
            }
            auto [it, inserted] = by_key.try_emplace(key);
            if (inserted) {
                it->second.entity = entity;
            }
            it->second.supporters.push_back(set.model_id);
        }
    }
    std::vector<Tally> out;
    out.reserve(by_key.size());
    for (auto& [key, t] : by_key) {
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<Entity> vote(const std::vector<Tally>& tallies, const VoteConfig& config,
                         int model_count) {
    const int threshold = effective_threshold(config, model_count);
    std::vector<Entity> accepted;
    for (const auto& t : tallies) {
        if (t.count() > model_count) {
            throw InputError("tally count " + std::to_string(t.count()) + " exceeds model count " +
                             std::to_string(model_count));
        }
        if (t.count() >= threshold) {
            accepted.push_back(t.entity);
        }
    }
    std::sort(accepted.begin(), accepted.end(), [](const Entity& a, const Entity& b) {
        return canonical_key(a) < canonical_key(b);
    });
    return accepted;
}

}  // namespace dner
