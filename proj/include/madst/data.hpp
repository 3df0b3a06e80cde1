#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "madst/features.hpp"

namespace madst {

extern const std::set<std::string> kDomains;  // restaurant hotel attraction taxi train

// slot -> normalized value; absent slots mean "none"
using BeliefState = std::map<std::string, std::string>;

struct DialogTurn {
    std::string agent;  // empty at the first turn
    std::string user;
    BeliefState state;
    // optional pre-computed tag annotations, aligned with the tokenized text
    std::vector<int> agent_pos, agent_ner, user_pos, user_ner;
};

struct Dialog {
    std::string id;
    std::set<std::string> domains;
    std::vector<DialogTurn> turns;
};

struct SlotCatalog {
    std::vector<std::string> slots;  // "domain-slot", order fixed

    std::size_t size() const { return slots.size(); }
    bool contains(const std::string& slot) const;
    static std::string domain_of(const std::string& slot);  // prefix before '-'
    static SlotCatalog load(const std::string& path);
};

struct Example {
    std::string dialog_id;
    int turn_index = 0;
    std::vector<Token> history;  // flattened C_t with per-token turn indices
    BeliefState targets;         // all catalog slots, none-filled
};

struct Vocab {
    static constexpr int kPad = 0, kUnk = 1, kStart = 2, kEnd = 3, kNone = 4, kDontcare = 5,
                         kSep = 6;
    std::vector<std::string> words;
    std::unordered_map<std::string, int> ids;

    std::size_t size() const { return words.size(); }
    int id(const std::string& w) const {
        auto it = ids.find(w);
        return it == ids.end() ? kUnk : it->second;
    }
    bool contains(const std::string& w) const { return ids.count(w) > 0; }
};

// Lowercase, split on whitespace and punctuation; ':' and '.' flanked by
// digits stay inside the token so clock times survive ("17:45", "15.15").
std::vector<std::string> tokenize(const std::string& text);

using NormalizationMap = std::map<std::string, std::string>;
NormalizationMap load_normalization_map(const std::string& path);

// lowercase, trim, collapse whitespace, then apply the map; idempotent
std::string normalize_value(const std::string& value, const NormalizationMap& norm = {});

// Corpus JSON: [{dialogue_id, domains, turns:[{agent, user, state}]}].
// Dialogs touching domains outside the five are skipped (reported via
// `skipped` when given); malformed entries raise naming dialog and field.
std::vector<Dialog> load_corpus(const std::string& path, const SlotCatalog& catalog,
                                const NormalizationMap& norm = {},
                                std::vector<std::string>* skipped = nullptr);
void save_corpus(const std::string& path, const std::vector<Dialog>& dialogs);

Vocab build_vocab(const std::vector<Dialog>& train_dialogs, int min_freq = 1);

std::vector<Example> make_examples(const std::vector<Dialog>& dialogs,
                                   const SlotCatalog& catalog);

struct ZeroShotSplit {
    std::vector<Dialog> train;  // no target-domain content at all
    std::vector<Dialog> test;   // only the target domain
};
ZeroShotSplit split_zero_shot(const std::vector<Dialog>& dialogs,
                              const std::string& target_domain);

std::vector<Dialog> split_single_domain(const std::vector<Dialog>& dialogs,
                                        const std::string& domain);

}  // namespace madst
