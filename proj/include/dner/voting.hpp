#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dner/core.hpp"

// Hard-voting ensemble baseline: an entity survives iff at least a
// threshold number of models predicted exactly that entity (same label,
// same token-index set).

namespace dner {

enum class TieRule {
    Exclude,  // strict majority: more than half the models must agree
    Include,  // exactly half (even model counts) is enough
};

struct VoteConfig {
    // Minimum supporting models; unset means majority of participating
    // models under tie_rule.
    std::optional<int> threshold;
    TieRule tie_rule = TieRule::Exclude;
};

// Resolved acceptance threshold for model_count models.
int effective_threshold(const VoteConfig& config, int model_count);

// One candidate entity with the distinct models that proposed it.
struct Tally {
    Entity entity;
    std::vector<std::string> supporters;

    int count() const { return static_cast<int>(supporters.size()); }
};

// Counts distinct-model support per canonical key across one record's
// prediction sets. All sets must share a record_id and carry distinct
// model ids; anything else is an InputError. Output is sorted by
// canonical key.
std::vector<Tally> tally(std::span<const PredictionSet> predictions);

// Keeps exactly the tallied entities with count >= the effective
// threshold. Deterministic: output sorted by canonical key.
std::vector<Entity> vote(const std::vector<Tally>& tallies, const VoteConfig& config,
                         int model_count);

}  // namespace dner
