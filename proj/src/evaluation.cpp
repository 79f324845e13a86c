#include "dner/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace dner {

MatchCounts& MatchCounts::operator+=(const MatchCounts& other) {
    tp += other.tp;
    fp += other.fp;
    fn += other.fn;
    disc_tp += other.disc_tp;
    disc_fp += other.disc_fp;
    disc_fn += other.disc_fn;
    return *this;
}

MatchCounts match_entities(const std::vector<Entity>& gold, const std::vector<Entity>& pred) {
    std::map<std::string, bool> gold_keys;  // key -> discontinuous
    for (const auto& g : gold) {
        gold_keys.emplace(canonical_key(g), g.discontinuous());
    }
    std::set<std::string> pred_keys;
    MatchCounts counts;
    for (const auto& p : pred) {
        const std::string key = canonical_key(p);
        if (!pred_keys.insert(key).second) {
            continue;
        }
        auto it = gold_keys.find(key);
        if (it != gold_keys.end()) {
            ++counts.tp;
            if (it->second) {
                ++counts.disc_tp;
            }
        } else {
            ++counts.fp;
            if (p.discontinuous()) {
                ++counts.disc_fp;
            }
        }
    }
    for (const auto& [key, disc] : gold_keys) {
        if (!pred_keys.count(key)) {
            ++counts.fn;
            if (disc) {
                ++counts.disc_fn;
            }
        }
    }
    return counts;
}

double round2(double value) {
    const double scaled = std::abs(value) * 100.0;
    const double rounded = std::floor(scaled + 0.5 + 1e-9) / 100.0;
    return value < 0 ? -rounded : rounded;
}

Metrics compute_prf(long tp, long fp, long fn) {
    const double p = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    const double r = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    const double f1 = (p + r) > 0 ? 2.0 * p * r / (p + r) : 0.0;
    return {round2(100.0 * p), round2(100.0 * r), round2(100.0 * f1)};
}

Metrics compute_prf(const MatchCounts& counts) {
    return compute_prf(counts.tp, counts.fp, counts.fn);
}

double f1_from_pr(double precision, double recall) {
    if (precision + recall <= 0) {
        return 0.0;
    }
    return round2(2.0 * precision * recall / (precision + recall));
}

CorpusStats corpus_stats(const std::vector<GoldDocument>& documents) {
    CorpusStats stats;
    stats.documents = static_cast<long>(documents.size());
    for (const auto& doc : documents) {
        stats.sentences += static_cast<long>(doc.sentences.size());
        for (const auto& gs : doc.sentences) {
            stats.tokens += gs.sentence.token_count();
            stats.entities += static_cast<long>(gs.entities.size());
            for (const auto& e : gs.entities) {
                if (e.discontinuous()) {
                    ++stats.discontinuous_entities;
                }
            }
        }
    }
    return stats;
}

double relative_improvement(double ours, double baseline) {
    if (baseline <= 0) {
        throw MetricDomainError("relative improvement needs a positive baseline, got " +
                                std::to_string(baseline));
    }
    return round2(100.0 * (ours - baseline) / baseline);
}

RankReport friedman_ranks(const std::vector<std::string>& systems,
                          const std::vector<std::vector<double>>& score_table) {
    const size_t k = systems.size();
    const size_t n = score_table.size();
    if (k < 2) {
        throw InputError("rank analysis needs at least 2 systems");
    }
    if (n < 2) {
        throw InputError("rank analysis needs at least 2 blocks");
    }
    if (std::set<std::string>(systems.begin(), systems.end()).size() != k) {
        throw InputError("system labels must be distinct");
    }
    for (size_t b = 0; b < n; ++b) {
        if (score_table[b].size() != k) {
            throw InputError("block " + std::to_string(b) + " has " +
                             std::to_string(score_table[b].size()) + " cells, expected " +
                             std::to_string(k));
        }
    }

    RankReport report;
    report.systems = systems;
    report.average_ranks.assign(k, 0.0);
    for (const auto& block : score_table) {
        // Higher score -> better (lower) rank; ties share the mean position.
        std::vector<size_t> order(k);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](size_t a, size_t b) { return block[a] > block[b]; });
        std::vector<double> ranks(k, 0.0);
        size_t i = 0;
        while (i < k) {
            size_t j = i;
            while (j + 1 < k && block[order[j + 1]] == block[order[i]]) {
                ++j;
            }
            const double shared = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
            for (size_t t = i; t <= j; ++t) {
                ranks[order[t]] = shared;
            }
            i = j + 1;
        }
        for (size_t s = 0; s < k; ++s) {
            report.average_ranks[s] += ranks[s];
        }
        report.block_ranks.push_back(std::move(ranks));
    }
    for (auto& r : report.average_ranks) {
        r /= static_cast<double>(n);
    }

    const double kd = static_cast<double>(k);
    double sum_sq = 0.0;
    for (double r : report.average_ranks) {
        sum_sq += r * r;
    }
    report.friedman_statistic =
        12.0 * static_cast<double>(n) / (kd * (kd + 1.0)) *
        (sum_sq - kd * (kd + 1.0) * (kd + 1.0) / 4.0);
    return report;
}

namespace {

// Studentized range constants divided by sqrt(2), k = 2..10.
constexpr double kNemenyiQ05[] = {1.960, 2.343, 2.569, 2.728, 2.850,
                                  2.949, 3.031, 3.102, 3.164};
constexpr double kNemenyiQ10[] = {1.645, 2.052, 2.291, 2.459, 2.589,
                                  2.693, 2.780, 2.855, 2.920};

std::string format2(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", value);
    return buf;
}

std::string format4(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", value);
    return buf;
}

}  // namespace

double nemenyi_cd(int k, int n_blocks, double alpha) {
    if (k < 2 || k > 10) {
        throw UnsupportedError("Nemenyi constants available for 2 <= k <= 10, got k=" +
                               std::to_string(k));
    }
    if (n_blocks < 1) {
        throw InputError("Nemenyi CD needs at least 1 block");
    }
    const double* table = nullptr;
    if (std::abs(alpha - 0.05) < 1e-12) {
        table = kNemenyiQ05;
    } else if (std::abs(alpha - 0.10) < 1e-12) {
        table = kNemenyiQ10;
    } else {
        throw UnsupportedError("Nemenyi constants available for alpha 0.05 and 0.10 only");
    }
    const double q = table[k - 2];
    return q * std::sqrt(static_cast<double>(k) * (k + 1) / (6.0 * n_blocks));
}

namespace {

// Flags per column value: "best" for the top distinct value, "second" for
// the runner-up distinct value.
std::string column_flag(double value, const std::vector<double>& column) {
    std::vector<double> distinct(column.begin(), column.end());
    std::sort(distinct.begin(), distinct.end(), std::greater<>());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (!distinct.empty() && value == distinct[0]) {
        return "best";
    }
    if (distinct.size() > 1 && value == distinct[1]) {
        return "second";
    }
    return "";
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace

ReportArtifacts render_report(const std::vector<MetricsReport>& metrics,
                              const RankReport* ranks) {
    ReportArtifacts artifacts;

    std::vector<std::string> systems, datasets;
    std::map<std::pair<std::string, std::string>, const MetricsReport*> cell;
    for (const auto& m : metrics) {
        if (std::find(systems.begin(), systems.end(), m.system_id) == systems.end()) {
            systems.push_back(m.system_id);
        }
        if (std::find(datasets.begin(), datasets.end(), m.dataset_id) == datasets.end()) {
            datasets.push_back(m.dataset_id);
        }
        cell[{m.system_id, m.dataset_id}] = &m;
    }

    // Column pools for best/second marks, keyed by (dataset, metric index).
    std::map<std::pair<std::string, int>, std::vector<double>> columns;
    for (const auto& m : metrics) {
        columns[{m.dataset_id, 0}].push_back(m.metrics.precision);
        columns[{m.dataset_id, 1}].push_back(m.metrics.recall);
        columns[{m.dataset_id, 2}].push_back(m.metrics.f1);
    }

    std::ostringstream csv;
    csv << "system,dataset,precision,recall,f1,flag_p,flag_r,flag_f1,"
           "tp,fp,fn,disc_precision,disc_recall,disc_f1,disc_tp,disc_fp,disc_fn\n";
    for (const auto& m : metrics) {
        csv << csv_escape(m.system_id) << ',' << csv_escape(m.dataset_id) << ','
            << format2(m.metrics.precision) << ',' << format2(m.metrics.recall) << ','
            << format2(m.metrics.f1) << ','
            << column_flag(m.metrics.precision, columns[{m.dataset_id, 0}]) << ','
            << column_flag(m.metrics.recall, columns[{m.dataset_id, 1}]) << ','
            << column_flag(m.metrics.f1, columns[{m.dataset_id, 2}]) << ','
            << m.counts.tp << ',' << m.counts.fp << ',' << m.counts.fn << ','
            << format2(m.disc_metrics.precision) << ',' << format2(m.disc_metrics.recall) << ','
            << format2(m.disc_metrics.f1) << ',' << m.counts.disc_tp << ',' << m.counts.disc_fp
            << ',' << m.counts.disc_fn << '\n';
    }
    artifacts.metrics_csv = csv.str();

    // Plain-text table: one row per system, P/R/F1 per dataset; best values
    // marked '*', second-best '+'.
    std::ostringstream text;
    size_t name_width = 6;
    for (const auto& s : systems) {
        name_width = std::max(name_width, s.size());
    }
    text << std::string(name_width, ' ');
    for (const auto& d : datasets) {
        std::string head = d + " (P / R / F1)";
        text << "  " << head;
    }
    text << '\n';
    for (const auto& s : systems) {
        text << s << std::string(name_width - s.size(), ' ');
        for (const auto& d : datasets) {
            auto it = cell.find({s, d});
            if (it == cell.end()) {
                text << "  - / - / -";
                continue;
            }
            const Metrics& m = it->second->metrics;
            auto mark = [&](double v, int metric) {
                const std::string flag = column_flag(v, columns[{d, metric}]);
                if (flag == "best") return format2(v) + "*";
                if (flag == "second") return format2(v) + "+";
                return format2(v) + " ";
            };
            text << "  " << mark(m.precision, 0) << " / " << mark(m.recall, 1) << " / "
                 << mark(m.f1, 2);
        }
        text << '\n';
    }
    artifacts.text_table = text.str();

    std::ostringstream rank_csv;
    rank_csv << "system,average_rank,friedman_statistic,critical_difference,alpha\n";
    if (ranks != nullptr) {
        for (size_t i = 0; i < ranks->systems.size(); ++i) {
            rank_csv << csv_escape(ranks->systems[i]) << ','
                     << format4(ranks->average_ranks[i]) << ','
                     << format4(ranks->friedman_statistic) << ','
                     << format4(ranks->critical_difference) << ',' << format2(ranks->alpha)
                     << '\n';
        }
    }
    artifacts.ranks_csv = rank_csv.str();
    return artifacts;
}

}  // namespace dner
