#pragma once

#include <map>
#include <string>
#include <vector>

#include "madst/data.hpp"

namespace madst {

struct TurnResult {
    std::string dialog_id;
    int turn_index = 0;
    // slot -> (gold, predicted), covering all catalog slots
    std::map<std::string, std::pair<std::string, std::string>> slots;
};

struct EvalReport {
    double joint_goal = 0.0;
    double avg_slot = 0.0;
    double dontcare_acc = 0.0;
    std::map<std::string, double> per_slot_acc;
    std::map<int, std::pair<double, double>> per_turn_bucket;  // turn -> (joint, slot)
    std::map<std::string, double> domain_f1;
};

double joint_goal(const std::vector<TurnResult>& results, const NormalizationMap& norm = {});
double avg_slot(const std::vector<TurnResult>& results, const NormalizationMap& norm = {});
std::map<std::string, double> per_slot_accuracy(const std::vector<TurnResult>& results,
                                                const NormalizationMap& norm = {});
std::map<int, std::pair<double, double>> turn_buckets(const std::vector<TurnResult>& results,
                                                      const NormalizationMap& norm = {});

// Slot-level micro-F1 per domain: a non-none gold value is a positive; a
// non-none prediction that misses is a false positive.
std::map<std::string, double> domain_f1(const std::vector<TurnResult>& results,
                                        const NormalizationMap& norm = {});

EvalReport evaluate(const std::vector<TurnResult>& results, const NormalizationMap& norm = {});

std::string report_to_json(const EvalReport& report);
std::string report_to_csv(const EvalReport& report);  // per-slot accuracy rows

}  // namespace madst
