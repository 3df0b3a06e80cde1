#include "madst/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include <json.hpp>

namespace madst {

using nlohmann::json;

const std::set<std::string> kDomains = {"restaurant", "hotel", "attraction", "taxi", "train"};

bool SlotCatalog::contains(const std::string& slot) const {
    return std::find(slots.begin(), slots.end(), slot) != slots.end();
}

std::string SlotCatalog::domain_of(const std::string& slot) {
    auto pos = slot.find('-');
    if (pos == std::string::npos)
        throw std::invalid_argument("SlotCatalog: slot '" + slot + "' has no domain prefix");
    return slot.substr(0, pos);
}

SlotCatalog SlotCatalog::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("SlotCatalog: cannot open " + path);
    json j = json::parse(in);
    SlotCatalog cat;
    for (const auto& s : j.at("slots")) cat.slots.push_back(s.get<std::string>());
    if (cat.slots.empty()) throw std::runtime_error("SlotCatalog: empty slot list in " + path);
    return cat;
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> toks;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) toks.push_back(cur);
        cur.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        char lc = static_cast<char>(std::tolower(c));
        if (std::isalnum(c)) {
            cur.push_back(lc);
        } else if ((c == ':' || c == '.') && i > 0 && i + 1 < text.size() &&
                   std::isdigit(static_cast<unsigned char>(text[i - 1])) &&
                   std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
            cur.push_back(lc);  // keep clock times intact
        } else if (std::isspace(c)) {
            flush();
        } else {
            flush();
            toks.push_back(std::string(1, lc));
        }
    }
    flush();
    return toks;
}

NormalizationMap load_normalization_map(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_normalization_map: cannot open " + path);
    json j = json::parse(in);
    NormalizationMap m;
    for (auto it = j.begin(); it != j.end(); ++it) m[it.key()] = it.value().get<std::string>();
    return m;
}

std::string normalize_value(const std::string& value, const NormalizationMap& norm) {
    std::string out;
    bool in_space = true;
    for (unsigned char c : value) {
        if (std::isspace(c)) {
            if (!in_space) out.push_back(' ');
            in_space = true;
        } else {
            out.push_back(static_cast<char>(std::tolower(c)));
            in_space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    auto it = norm.find(out);
    if (it != norm.end()) out = it->second;
    return out;
}

namespace {

std::vector<int> parse_tags(const json& turn, const char* key, std::size_t n_tokens,
                            const std::string& dialog_id) {
    if (!turn.contains(key)) return {};
    std::vector<int> tags = turn.at(key).get<std::vector<int>>();
    if (tags.size() != n_tokens)
        throw std::runtime_error("load_corpus: dialog '" + dialog_id + "' field '" + key +
                                 "' has " + std::to_string(tags.size()) + " tags for " +
                                 std::to_string(n_tokens) + " tokens");
    return tags;
}

}  // namespace

std::vector<Dialog> load_corpus(const std::string& path, const SlotCatalog& catalog,
                                const NormalizationMap& norm, std::vector<std::string>* skipped) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_corpus: cannot open " + path);
    json root = json::parse(in);
    if (!root.is_array()) throw std::runtime_error("load_corpus: top level must be an array");

    std::vector<Dialog> out;
    for (const auto& jd : root) {
        if (!jd.contains("dialogue_id"))
            throw std::runtime_error("load_corpus: dialog entry missing field 'dialogue_id'");
        Dialog d;
        d.id = jd.at("dialogue_id").get<std::string>();
        if (!jd.contains("domains"))
            throw std::runtime_error("load_corpus: dialog '" + d.id + "' missing field 'domains'");
        for (const auto& dom : jd.at("domains")) d.domains.insert(dom.get<std::string>());

        bool outside = false;
        for (const auto& dom : d.domains) outside = outside || !kDomains.count(dom);
        if (outside) {
            if (skipped)
                skipped->push_back(d.id + ": domain outside the supported five, dialog skipped");
            continue;
        }

        if (!jd.contains("turns") || !jd.at("turns").is_array() || jd.at("turns").empty())
            throw std::runtime_error("load_corpus: dialog '" + d.id +
                                     "' missing or empty field 'turns'");
        for (const auto& jt : jd.at("turns")) {
            DialogTurn t;
            t.agent = jt.value("agent", "");
            if (!jt.contains("user"))
                throw std::runtime_error("load_corpus: dialog '" + d.id +
                                         "' turn missing field 'user'");
            t.user = jt.at("user").get<std::string>();
            if (jt.contains("state")) {
                for (auto it = jt.at("state").begin(); it != jt.at("state").end(); ++it) {
                    std::string slot = it.key();
                    if (!catalog.contains(slot)) {
                        if (skipped)
                            skipped->push_back(d.id + ": unknown slot '" + slot + "' dropped");
                        continue;
                    }
                    std::string value = normalize_value(it.value().get<std::string>(), norm);
                    if (value.empty() || value == "none") continue;
                    t.state[slot] = value;
                }
            }
            t.agent_pos = parse_tags(jt, "agent_pos", tokenize(t.agent).size(), d.id);
            t.agent_ner = parse_tags(jt, "agent_ner", tokenize(t.agent).size(), d.id);
            t.user_pos = parse_tags(jt, "user_pos", tokenize(t.user).size(), d.id);
            t.user_ner = parse_tags(jt, "user_ner", tokenize(t.user).size(), d.id);
            d.turns.push_back(std::move(t));
        }
        out.push_back(std::move(d));
    }
    return out;
}

void save_corpus(const std::string& path, const std::vector<Dialog>& dialogs) {
    json root = json::array();
    for (const Dialog& d : dialogs) {
        json jd;
        jd["dialogue_id"] = d.id;
        jd["domains"] = d.domains;
        json turns = json::array();
        for (const DialogTurn& t : d.turns) {
            json jt;
            jt["agent"] = t.agent;
            jt["user"] = t.user;
            jt["state"] = t.state;
            if (!t.agent_pos.empty()) jt["agent_pos"] = t.agent_pos;
            if (!t.agent_ner.empty()) jt["agent_ner"] = t.agent_ner;
            if (!t.user_pos.empty()) jt["user_pos"] = t.user_pos;
            if (!t.user_ner.empty()) jt["user_ner"] = t.user_ner;
            turns.push_back(std::move(jt));
        }
        jd["turns"] = std::move(turns);
        root.push_back(std::move(jd));
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_corpus: cannot write " + path);
    out << root.dump(2) << "\n";
}

Vocab build_vocab(const std::vector<Dialog>& train_dialogs, int min_freq) {
    if (train_dialogs.empty()) throw std::invalid_argument("build_vocab: empty training set");
    std::map<std::string, std::size_t> freq;
    for (const Dialog& d : train_dialogs)
        for (const DialogTurn& t : d.turns) {
            for (const auto& w : tokenize(t.agent)) ++freq[w];
            for (const auto& w : tokenize(t.user)) ++freq[w];
            for (const auto& [slot, value] : t.state)
                for (const auto& w : tokenize(value)) ++freq[w];
        }

    Vocab v;
    v.words = {"<pad>", "<unk>", "<start>", "<end>", "none", "dontcare", "<sep>"};
    for (std::size_t i = 0; i < v.words.size(); ++i) v.ids[v.words[i]] = static_cast<int>(i);

    std::vector<std::pair<std::string, std::size_t>> entries(freq.begin(), freq.end());
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    for (const auto& [word, count] : entries) {
        if (count < static_cast<std::size_t>(min_freq)) continue;
        if (v.ids.count(word)) continue;
        v.ids[word] = static_cast<int>(v.words.size());
        v.words.push_back(word);
    }
    return v;
}

namespace {

void append_utterance(std::vector<Token>& history, const std::string& text,
                      const std::vector<int>& pos, const std::vector<int>& ner, int turn) {
    auto words = tokenize(text);
    for (std::size_t i = 0; i < words.size(); ++i) {
        Token tok;
        tok.surface = words[i];
        tok.pos_tag = i < pos.size() ? pos[i] : -1;
        tok.ner_tag = i < ner.size() ? ner[i] : -1;
        tok.turn_index = turn;
        history.push_back(std::move(tok));
    }
    Token sep;
    sep.surface = "<sep>";
    sep.turn_index = turn;
    history.push_back(std::move(sep));
}

}  // namespace

std::vector<Example> make_examples(const std::vector<Dialog>& dialogs,
                                   const SlotCatalog& catalog) {
    std::vector<Example> out;
    for (const Dialog& d : dialogs) {
        std::vector<Token> history;
        for (std::size_t t = 0; t < d.turns.size(); ++t) {
            const DialogTurn& turn = d.turns[t];
            if (!turn.agent.empty())
                append_utterance(history, turn.agent, turn.agent_pos, turn.agent_ner,
                                 static_cast<int>(t));
            append_utterance(history, turn.user, turn.user_pos, turn.user_ner,
                             static_cast<int>(t));
            Example ex;
            ex.dialog_id = d.id;
            ex.turn_index = static_cast<int>(t);
            ex.history = history;
            for (const std::string& slot : catalog.slots) {
                auto it = turn.state.find(slot);
                ex.targets[slot] = it == turn.state.end() ? "none" : it->second;
            }
            out.push_back(std::move(ex));
        }
    }
    return out;
}

namespace {

bool has_domain_content(const Dialog& d, const std::string& domain) {
    if (d.domains.count(domain)) return true;
    for (const DialogTurn& t : d.turns)
        for (const auto& [slot, value] : t.state)
            if (SlotCatalog::domain_of(slot) == domain && value != "none") return true;
    return false;
}

void require_known_domain(const std::string& domain) {
    if (!kDomains.count(domain))
        throw std::invalid_argument("unknown domain '" + domain + "'");
}

}  // namespace

ZeroShotSplit split_zero_shot(const std::vector<Dialog>& dialogs,
                              const std::string& target_domain) {
    require_known_domain(target_domain);
    ZeroShotSplit split;
    for (const Dialog& d : dialogs) {
        if (!has_domain_content(d, target_domain))
            split.train.push_back(d);
        else if (d.domains == std::set<std::string>{target_domain})
            split.test.push_back(d);
        // multi-domain dialogs touching the target belong to neither side
    }
    return split;
}

std::vector<Dialog> split_single_domain(const std::vector<Dialog>& dialogs,
                                        const std::string& domain) {
    require_known_domain(domain);
    std::vector<Dialog> out;
    for (const Dialog& d : dialogs)
        if (d.domains == std::set<std::string>{domain}) out.push_back(d);
    return out;
}

}  // namespace madst
