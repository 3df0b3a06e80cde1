#include "madst/eval.hpp"

#include <array>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace madst {

namespace {

bool match(const std::pair<std::string, std::string>& gp, const NormalizationMap& norm) {
    return normalize_value(gp.first, norm) == normalize_value(gp.second, norm);
}

void require_nonempty(const std::vector<TurnResult>& results) {
    if (results.empty()) throw std::invalid_argument("metrics: empty result set");
}

}  // namespace

double joint_goal(const std::vector<TurnResult>& results, const NormalizationMap& norm) {
    require_nonempty(results);
    std::size_t hits = 0;
    for (const TurnResult& t : results) {
        bool all = true;
        for (const auto& [slot, gp] : t.slots) all = all && match(gp, norm);
        hits += all;
    }
    return static_cast<double>(hits) / static_cast<double>(results.size());
}

double avg_slot(const std::vector<TurnResult>& results, const NormalizationMap& norm) {
    require_nonempty(results);
    std::size_t hits = 0, total = 0;
    for (const TurnResult& t : results)
        for (const auto& [slot, gp] : t.slots) {
            hits += match(gp, norm);
            ++total;
        }
    return static_cast<double>(hits) / static_cast<double>(total);
}

std::map<std::string, double> per_slot_accuracy(const std::vector<TurnResult>& results,
                                                const NormalizationMap& norm) {
    require_nonempty(results);
    std::map<std::string, std::pair<std::size_t, std::size_t>> counts;  // slot -> (hits, total)
    for (const TurnResult& t : results)
        for (const auto& [slot, gp] : t.slots) {
            counts[slot].first += match(gp, norm);
            counts[slot].second += 1;
        }
    std::map<std::string, double> out;
    for (const auto& [slot, c] : counts)
        out[slot] = static_cast<double>(c.first) / static_cast<double>(c.second);
    return out;
}

std::map<int, std::pair<double, double>> turn_buckets(const std::vector<TurnResult>& results,
                                                      const NormalizationMap& norm) {
    require_nonempty(results);
    std::map<int, std::vector<TurnResult>> buckets;
    for (const TurnResult& t : results) buckets[t.turn_index].push_back(t);
    std::map<int, std::pair<double, double>> out;
    for (const auto& [turn, rs] : buckets) out[turn] = {joint_goal(rs, norm), avg_slot(rs, norm)};
    return out;
}

std::map<std::string, double> domain_f1(const std::vector<TurnResult>& results,
                                        const NormalizationMap& norm) {
    require_nonempty(results);
    std::map<std::string, std::array<std::size_t, 3>> counts;  // domain -> {tp, fp, fn}
    for (const TurnResult& t : results)
        for (const auto& [slot, gp] : t.slots) {
            std::string domain = SlotCatalog::domain_of(slot);
            std::string gold = normalize_value(gp.first, norm);
            std::string pred = normalize_value(gp.second, norm);
            auto& c = counts[domain];
            if (pred != "none" && pred == gold) ++c[0];
            if (pred != "none" && pred != gold) ++c[1];
            if (gold != "none" && pred != gold) ++c[2];
        }
    std::map<std::string, double> out;
    for (const auto& [domain, c] : counts) {
        double denom = static_cast<double>(2 * c[0] + c[1] + c[2]);
        out[domain] = denom == 0.0 ? 1.0 : 2.0 * static_cast<double>(c[0]) / denom;
    }
    return out;
}

EvalReport evaluate(const std::vector<TurnResult>& results, const NormalizationMap& norm) {
    EvalReport r;
    r.joint_goal = joint_goal(results, norm);
    r.avg_slot = avg_slot(results, norm);
    r.per_slot_acc = per_slot_accuracy(results, norm);
    r.per_turn_bucket = turn_buckets(results, norm);
    r.domain_f1 = domain_f1(results, norm);
    std::size_t dc_hits = 0, dc_total = 0;
    for (const TurnResult& t : results)
        for (const auto& [slot, gp] : t.slots)
            if (normalize_value(gp.first, norm) == "dontcare") {
                dc_hits += match(gp, norm);
                ++dc_total;
            }
    r.dontcare_acc = dc_total == 0 ? 1.0 : static_cast<double>(dc_hits) / dc_total;
    return r;
}

std::string report_to_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["joint_goal"] = report.joint_goal;
    j["avg_slot"] = report.avg_slot;
    j["dontcare_acc"] = report.dontcare_acc;
    j["per_slot_acc"] = report.per_slot_acc;
    nlohmann::ordered_json buckets;
    for (const auto& [turn, js] : report.per_turn_bucket)
        buckets[std::to_string(turn)] = {{"joint", js.first}, {"slot", js.second}};
    j["per_turn_bucket"] = std::move(buckets);
    // micro-F1 over slot-level matches, positives = non-none values
    j["domain_f1"] = report.domain_f1;
    return j.dump(2);
}

std::string report_to_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "slot,accuracy\n";
    for (const auto& [slot, acc] : report.per_slot_acc) out << slot << "," << acc << "\n";
    return out.str();
}

}  // namespace madst
