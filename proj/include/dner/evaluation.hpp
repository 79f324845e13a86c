#pragma once

#include <span>
#include <string>
#include <vector>

#include "dner/core.hpp"
#include "dner/formats.hpp"

// Exact-match scoring, corpus statistics, relative-improvement deltas, and
// Friedman/Nemenyi rank analysis over per-system metric tables.

namespace dner {

class MetricDomainError : public Error {
public:
    using Error::Error;
};

class UnsupportedError : public Error {
public:
    using Error::Error;
};

// Exact-match confusion counts, with a parallel triple restricted to
// discontinuous (multi-fragment) entities.
struct MatchCounts {
    long tp = 0;
    long fp = 0;
    long fn = 0;
    long disc_tp = 0;
    long disc_fp = 0;
    long disc_fn = 0;

    MatchCounts& operator+=(const MatchCounts& other);
    friend bool operator==(const MatchCounts&, const MatchCounts&) = default;
};

// Percentages rounded half-up to 2 decimals; all-zero counts give 0.00.
struct Metrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct MetricsReport {
    std::string system_id;
    std::string dataset_id;
    MatchCounts counts;
    Metrics metrics;
    Metrics disc_metrics;
};

// Matches two entity sets of one sentence by canonical key; no partial
// credit.
MatchCounts match_entities(const std::vector<Entity>& gold, const std::vector<Entity>& pred);

Metrics compute_prf(long tp, long fp, long fn);
Metrics compute_prf(const MatchCounts& counts);

// F1 recomputed from already-rounded percentage P and R, as printed
// result tables do. 0 when P+R is 0.
double f1_from_pr(double precision, double recall);

// Half-up rounding to 2 decimals, applied only at the reporting boundary.
double round2(double value);

struct CorpusStats {
    long documents = 0;
    long sentences = 0;
    long tokens = 0;
    long entities = 0;
    long discontinuous_entities = 0;

    double discontinuous_fraction() const {
        return entities == 0 ? 0.0
                             : static_cast<double>(discontinuous_entities) / entities;
    }
};

CorpusStats corpus_stats(const std::vector<GoldDocument>& documents);

// 100 * (ours - baseline) / baseline, rounded to 2 decimals. Throws
// MetricDomainError when baseline <= 0.
double relative_improvement(double ours, double baseline);

// Rank table over N blocks x k systems. Within each block the highest
// score gets rank 1; ties share the mean of their positions.
struct RankReport {
    std::vector<std::string> systems;
    std::vector<std::vector<double>> block_ranks;  // one rank row per block
    std::vector<double> average_ranks;             // per system; sums to k(k+1)/2
    double friedman_statistic = 0.0;
    double critical_difference = 0.0;
    double alpha = 0.0;
};

// score_table holds one row per block, one column per system. Systems must
// be distinct and every row complete.
RankReport friedman_ranks(const std::vector<std::string>& systems,
                          const std::vector<std::vector<double>>& score_table);

// Nemenyi critical difference q_alpha(k) * sqrt(k(k+1)/(6N)) with embedded
// studentized-range constants for alpha in {0.05, 0.10} and k in [2,10].
double nemenyi_cd(int k, int n_blocks, double alpha);

// Rendering: a plain-text metrics table plus CSV files. Best value per
// (dataset, metric) column is marked "best", the runner-up "second".
struct ReportArtifacts {
    std::string text_table;
    std::string metrics_csv;
    std::string ranks_csv;
};

ReportArtifacts render_report(const std::vector<MetricsReport>& metrics,
                              const RankReport* ranks = nullptr);

}  // namespace dner
