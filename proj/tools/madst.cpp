// Command-line front end: data conversion, splitting, training, evaluation,
// prediction, and the ablation sweep.

#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "madst/trainer.hpp"

using namespace madst;
using nlohmann::ordered_json;

namespace {

constexpr const char* kToolVersion = "1.0.0";

// --- run manifest -----------------------------------------------------------

std::uint64_t fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::uint64_t h = 1469598103934665603ULL;
    char c;
    while (in.get(c)) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

ordered_json stages_to_json(const EncoderStages& s) {
    return {{"word_xattn", s.word_xattn},
            {"high_xattn", s.high_xattn},
            {"self_attn", s.self_attn},
            {"slot_summarizer", s.slot_summarizer}};
}

void write_manifest(const std::string& out_path, const std::string& subcommand,
                    const std::vector<std::string>& inputs, const ordered_json& resolved) {
    ordered_json m;
    m["tool_version"] = kToolVersion;
    m["subcommand"] = subcommand;
    ordered_json hashes;
    for (const std::string& p : inputs) hashes[p] = fnv1a_file(p);
    m["input_hashes"] = std::move(hashes);
    m["resolved_config"] = resolved;
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write manifest " + out_path);
    out << m.dump(2) << "\n";
}

// --- shared option bundle ----------------------------------------------------

struct Options {
    std::string data, dev, catalog_path = "data/slot_catalog.json";
    std::string normalization_path, config_path, checkpoint, out, static_vectors;
    std::string zero_shot, single_domain;
    std::uint64_t seed = 1;

    ModelConfig model;
    TrainConfig train;
    bool disable_word_xattn = false, disable_high_xattn = false, disable_self_attn = false;
    bool use_mean_slot_pool = false;
};

void add_model_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--config", o.config_path, "JSON config file (defaults < file < flags)");
    cmd->add_option("--hidden", o.model.hidden, "GRU hidden size");
    cmd->add_option("--att-dim", o.model.att_dim, "attention projection size");
    cmd->add_option("--ctx-dim", o.model.embed.ctx_dim, "contextual embedding width");
    cmd->add_option("--static-dim", o.model.embed.static_dim, "static word vector width");
    cmd->add_option("--char-dim", o.model.embed.char_out_dim, "character composition width");
    cmd->add_option("--max-decode-len", o.model.max_decode_len, "value decoding budget");
    cmd->add_option("--dropout", o.model.dropout, "dropout between encoder layers");
    cmd->add_option("--gamma", o.model.gamma, "gate loss weight");
    cmd->add_option("--static-vectors", o.static_vectors,
                    "pretrained static vector file ('word v1 .. vN' lines)");
    cmd->add_flag("--freeze-static", "do not finetune static vectors");
    cmd->add_flag("--disable-word-xattn", o.disable_word_xattn, "ablate word-level cross-attention");
    cmd->add_flag("--disable-high-xattn", o.disable_high_xattn, "ablate higher cross-attention");
    cmd->add_flag("--disable-self-attn", o.disable_self_attn, "ablate self-attention");
    cmd->add_flag("--use-mean-slot-pool", o.use_mean_slot_pool,
                  "replace the slot summarizer with mean pooling");
}

void add_train_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--lr", o.train.lr, "Adam learning rate");
    cmd->add_option("--epochs", o.train.max_epochs, "training epochs");
    cmd->add_option("--batch-turns", o.train.batch_turns, "dialog turns per batch");
    cmd->add_option("--decay-every", o.train.decay_every_epochs, "epochs between lr decays (0 off)");
    cmd->add_option("--decay-factor", o.train.decay_factor, "lr decay multiplier");
    cmd->add_option("--clip-norm", o.train.clip_norm, "global gradient-norm clip (0 off)");
    cmd->add_option("--patience", o.train.patience, "early-stop patience in epochs (0 off)");
    cmd->add_option("--eval-every", o.train.eval_every, "epochs between dev evaluations");
}

// config file layer: values the flags did not override are taken from the file
void apply_config_file(const CLI::App* cmd, Options& o) {
    if (o.config_path.empty()) return;
    std::ifstream in(o.config_path);
    if (!in) throw std::runtime_error("cannot open config file " + o.config_path);
    ordered_json j = ordered_json::parse(in);
    auto take = [&](const char* flag, const char* key, auto& target) {
        if (!j.contains(key)) return;
        const CLI::Option* opt = cmd->get_option_no_throw(flag);
        if (opt && opt->count() > 0) return;  // explicit flag wins
        target = j.at(key).get<std::decay_t<decltype(target)>>();
    };
    take("--hidden", "hidden", o.model.hidden);
    take("--att-dim", "att_dim", o.model.att_dim);
    take("--ctx-dim", "ctx_dim", o.model.embed.ctx_dim);
    take("--static-dim", "static_dim", o.model.embed.static_dim);
    take("--char-dim", "char_out_dim", o.model.embed.char_out_dim);
    take("--max-decode-len", "max_decode_len", o.model.max_decode_len);
    take("--dropout", "dropout", o.model.dropout);
    take("--gamma", "gamma", o.model.gamma);
    take("--lr", "lr", o.train.lr);
    take("--epochs", "max_epochs", o.train.max_epochs);
    take("--batch-turns", "batch_turns", o.train.batch_turns);
    take("--decay-every", "decay_every_epochs", o.train.decay_every_epochs);
    take("--decay-factor", "decay_factor", o.train.decay_factor);
    take("--clip-norm", "clip_norm", o.train.clip_norm);
    take("--patience", "patience", o.train.patience);
    take("--eval-every", "eval_every", o.train.eval_every);
    take("--seed", "seed", o.seed);
}

void finalize(const CLI::App* cmd, Options& o) {
    apply_config_file(cmd, o);
    o.model.stages.word_xattn = !o.disable_word_xattn;
    o.model.stages.high_xattn = !o.disable_high_xattn;
    o.model.stages.self_attn = !o.disable_self_attn;
    o.model.stages.slot_summarizer = !o.use_mean_slot_pool;
    const CLI::Option* freeze = cmd->get_option_no_throw("--freeze-static");
    if (freeze && freeze->count() > 0) o.model.embed.finetune_static = false;
    o.train.seed = o.seed;
}

ordered_json resolved_config(const Options& o) {
    ordered_json j;
    j["hidden"] = o.model.hidden;
    j["att_dim"] = o.model.att_dim;
    j["ctx_dim"] = o.model.embed.ctx_dim;
    j["static_dim"] = o.model.embed.static_dim;
    j["char_out_dim"] = o.model.embed.char_out_dim;
    j["max_decode_len"] = o.model.max_decode_len;
    j["dropout"] = o.model.dropout;
    j["gamma"] = o.model.gamma;
    j["finetune_static"] = o.model.embed.finetune_static;
    j["stages"] = stages_to_json(o.model.stages);
    j["lr"] = o.train.lr;
    j["max_epochs"] = o.train.max_epochs;
    j["batch_turns"] = o.train.batch_turns;
    j["decay_every_epochs"] = o.train.decay_every_epochs;
    j["decay_factor"] = o.train.decay_factor;
    j["clip_norm"] = o.train.clip_norm;
    j["patience"] = o.train.patience;
    j["eval_every"] = o.train.eval_every;
    j["seed"] = o.seed;
    j["zero_shot"] = o.zero_shot;
    j["single_domain"] = o.single_domain;
    return j;
}

NormalizationMap load_norm(const Options& o) {
    return o.normalization_path.empty() ? NormalizationMap{}
                                        : load_normalization_map(o.normalization_path);
}

std::vector<Dialog> load_data(const std::string& path, const SlotCatalog& catalog,
                              const NormalizationMap& norm) {
    std::vector<std::string> skipped;
    auto dialogs = load_corpus(path, catalog, norm, &skipped);
    for (const std::string& s : skipped) std::cerr << "note: " << s << "\n";
    std::cerr << "loaded " << dialogs.size() << " dialogs from " << path << "\n";
    return dialogs;
}

// --- convert: raw MultiWOZ-style export -> corpus schema ---------------------

std::string map_raw_slot(const std::string& domain, const std::string& key, bool book) {
    std::string slot = key;
    for (char& c : slot) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return domain + "-" + (book ? "book " + slot : slot);
}

int run_convert(const Options& o, const std::string& input) {
    std::ifstream in(input);
    if (!in) throw std::runtime_error("cannot open " + input);
    ordered_json raw = ordered_json::parse(in);
    SlotCatalog catalog = SlotCatalog::load(o.catalog_path);
    NormalizationMap norm = load_norm(o);

    std::vector<Dialog> dialogs;
    std::size_t dropped_slots = 0;
    for (auto it = raw.begin(); it != raw.end(); ++it) {
        Dialog d;
        d.id = it.key();
        const ordered_json& log = it.value().at("log");
        std::string pending_agent;
        for (std::size_t i = 0; i < log.size(); ++i) {
            const ordered_json& entry = log[i];
            bool is_user = !entry.contains("metadata") || entry.at("metadata").empty();
            if (is_user) {
                DialogTurn t;
                t.agent = pending_agent;
                t.user = entry.at("text").get<std::string>();
                d.turns.push_back(std::move(t));
                pending_agent.clear();
            } else {
                pending_agent = entry.at("text").get<std::string>();
                if (d.turns.empty()) continue;
                BeliefState state;
                for (auto dom = entry.at("metadata").begin(); dom != entry.at("metadata").end();
                     ++dom) {
                    auto collect = [&](const char* section, bool book) {
                        if (!dom.value().contains(section)) return;
                        for (auto kv = dom.value().at(section).begin();
                             kv != dom.value().at(section).end(); ++kv) {
                            if (!kv.value().is_string()) continue;  // e.g. "booked" lists
                            std::string value = normalize_value(kv.value().get<std::string>(), norm);
                            if (value.empty() || value == "none" || value == "not mentioned")
                                continue;
                            std::string slot = map_raw_slot(dom.key(), kv.key(), book);
                            if (!catalog.contains(slot)) {
                                ++dropped_slots;
                                continue;
                            }
                            state[slot] = value;
                        }
                    };
                    collect("semi", false);
                    collect("book", true);
                }
                d.turns.back().state = std::move(state);
            }
        }
        for (const DialogTurn& t : d.turns)
            for (const auto& [slot, value] : t.state)
                d.domains.insert(SlotCatalog::domain_of(slot));
        if (!d.turns.empty() && !d.domains.empty()) dialogs.push_back(std::move(d));
    }
    save_corpus(o.out, dialogs);
    std::cerr << "converted " << dialogs.size() << " dialogs (" << dropped_slots
              << " out-of-catalog slot values dropped) -> " << o.out << "\n";
    write_manifest(o.out + ".manifest.json", "convert", {input}, resolved_config(o));
    return 0;
}

// --- train -------------------------------------------------------------------

int run_train(const Options& o) {
    SlotCatalog catalog = SlotCatalog::load(o.catalog_path);
    NormalizationMap norm = load_norm(o);
    std::vector<Dialog> train_set = load_data(o.data, catalog, norm);
    std::vector<Dialog> dev_set;
    if (!o.dev.empty()) dev_set = load_data(o.dev, catalog, norm);

    if (!o.zero_shot.empty()) {
        ZeroShotSplit split = split_zero_shot(train_set, o.zero_shot);
        std::cerr << "zero-shot '" << o.zero_shot << "': " << split.train.size() << " train / "
                  << split.test.size() << " test dialogs\n";
        train_set = std::move(split.train);
        if (dev_set.empty()) dev_set = std::move(split.test);
    } else if (!o.single_domain.empty()) {
        train_set = split_single_domain(train_set, o.single_domain);
        std::cerr << "single-domain '" << o.single_domain << "': " << train_set.size()
                  << " dialogs\n";
    }

    Model model = make_model(o.model, build_vocab(train_set), catalog, o.seed);
    if (!o.static_vectors.empty()) load_static_vectors(model.tables, o.static_vectors);
    std::cerr << "vocab " << model.vocab.size() << ", " << model.named_parameters().size()
              << " parameter tensors\n";

    TrainResult r = train(model, train_set, dev_set, o.train, &std::cerr);
    save_checkpoint(o.out, model, o.train, r.best_epoch, r.best_dev_joint);
    std::cerr << "best dev joint " << r.best_dev_joint << " at epoch " << r.best_epoch
              << ", final train joint " << r.final_train_joint << " -> " << o.out << "\n";

    std::vector<std::string> inputs = {o.data};
    if (!o.dev.empty()) inputs.push_back(o.dev);
    write_manifest(o.out + ".manifest.json", "train", inputs, resolved_config(o));
    return 0;
}

// --- eval / predict ----------------------------------------------------------

int run_eval(const Options& o) {
    LoadedCheckpoint ckpt = load_checkpoint(o.checkpoint);
    NormalizationMap norm = load_norm(o);
    auto dialogs = load_data(o.data, ckpt.model.catalog, norm);
    auto results = predict_examples(ckpt.model, make_examples(dialogs, ckpt.model.catalog));
    EvalReport report = evaluate(results, norm);
    std::string json = report_to_json(report);
    if (o.out.empty()) {
        std::cout << json << "\n";
    } else {
        std::ofstream out(o.out);
        out << json << "\n";
        std::ofstream csv(o.out + ".csv");
        csv << report_to_csv(report);
        write_manifest(o.out + ".manifest.json", "eval", {o.data, o.checkpoint},
                       resolved_config(o));
    }
    std::cerr << "joint goal " << report.joint_goal << ", avg slot " << report.avg_slot << "\n";
    return 0;
}

int run_predict(const Options& o) {
    LoadedCheckpoint ckpt = load_checkpoint(o.checkpoint);
    NormalizationMap norm = load_norm(o);
    auto dialogs = load_data(o.data, ckpt.model.catalog, norm);
    auto examples = make_examples(dialogs, ckpt.model.catalog);

    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!o.out.empty()) {
        file.open(o.out);
        out = &file;
    }
    for (const Example& ex : examples)
        for (const std::string& slot : ckpt.model.catalog.slots) {
            Prediction p = predict_slot(ckpt.model, ex, slot);
            ordered_json line;
            line["dialog_id"] = ex.dialog_id;
            line["turn"] = ex.turn_index;
            line["slot"] = slot;
            line["gate"] = static_cast<int>(p.gate);
            line["value"] = p.value;
            (*out) << line.dump() << "\n";
        }
    if (!o.out.empty())
        write_manifest(o.out + ".manifest.json", "predict", {o.data, o.checkpoint},
                       resolved_config(o));
    return 0;
}

// --- split -------------------------------------------------------------------

int run_split(const Options& o, const std::string& out_train, const std::string& out_test) {
    SlotCatalog catalog = SlotCatalog::load(o.catalog_path);
    auto dialogs = load_data(o.data, catalog, load_norm(o));
    if (!o.zero_shot.empty()) {
        ZeroShotSplit split = split_zero_shot(dialogs, o.zero_shot);
        save_corpus(out_train, split.train);
        save_corpus(out_test, split.test);
        std::cerr << "zero-shot '" << o.zero_shot << "': " << split.train.size() << " train / "
                  << split.test.size() << " test\n";
    } else if (!o.single_domain.empty()) {
        auto kept = split_single_domain(dialogs, o.single_domain);
        save_corpus(out_train, kept);
        std::cerr << "single-domain '" << o.single_domain << "': " << kept.size() << " dialogs\n";
    } else {
        throw std::runtime_error("split: pass --zero-shot <domain> or --single-domain <domain>");
    }
    write_manifest(out_train + ".manifest.json", "split", {o.data}, resolved_config(o));
    return 0;
}

// --- ablate ------------------------------------------------------------------

int run_ablate(const Options& o) {
    SlotCatalog catalog = SlotCatalog::load(o.catalog_path);
    auto dialogs = load_data(o.data, catalog, load_norm(o));
    Vocab vocab = build_vocab(dialogs);

    auto run_variant = [&](const std::string& name, EncoderStages stages) {
        ModelConfig config = o.model;
        config.stages = stages;
        Model model = make_model(config, vocab, catalog, o.seed);
        if (!o.static_vectors.empty()) load_static_vectors(model.tables, o.static_vectors);
        TrainResult r = train(model, dialogs, {}, o.train);
        ordered_json j;
        j["variant"] = name;
        j["stages"] = stages_to_json(stages);
        j["final_loss"] = r.epoch_losses.back();
        j["train_joint"] = r.final_train_joint;
        std::cerr << name << ": final loss " << r.epoch_losses.back() << ", train joint "
                  << r.final_train_joint << "\n";
        return j;
    };

    ordered_json all = ordered_json::array();
    EncoderStages full;
    all.push_back(run_variant("full", full));
    EncoderStages s1 = full;
    s1.word_xattn = false;
    all.push_back(run_variant("no_word_xattn", s1));
    EncoderStages s2 = full;
    s2.high_xattn = false;
    all.push_back(run_variant("no_high_xattn", s2));
    EncoderStages s3 = full;
    s3.self_attn = false;
    all.push_back(run_variant("no_self_attn", s3));
    EncoderStages s4 = full;
    s4.slot_summarizer = false;
    all.push_back(run_variant("mean_slot_pool", s4));

    if (o.out.empty()) {
        std::cout << all.dump(2) << "\n";
    } else {
        std::ofstream out(o.out);
        out << all.dump(2) << "\n";
        write_manifest(o.out + ".manifest.json", "ablate", {o.data}, resolved_config(o));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"madst: multi-attention dialog state tracking"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    Options o;
    std::string convert_input, out_train, out_test;

    CLI::App* convert = app.add_subcommand("convert", "raw benchmark export -> corpus JSON");
    convert->add_option("--input", convert_input, "raw dialog JSON")->required();
    convert->add_option("--out", o.out, "corpus output path")->required();
    convert->add_option("--slot-catalog", o.catalog_path, "slot catalog JSON");
    convert->add_option("--normalization", o.normalization_path, "value normalization map");

    CLI::App* train_cmd = app.add_subcommand("train", "train a model");
    train_cmd->add_option("--data", o.data, "training corpus JSON")->required();
    train_cmd->add_option("--dev", o.dev, "dev corpus JSON");
    train_cmd->add_option("--out", o.out, "checkpoint output path")->required();
    train_cmd->add_option("--slot-catalog", o.catalog_path, "slot catalog JSON");
    train_cmd->add_option("--normalization", o.normalization_path, "value normalization map");
    train_cmd->add_option("--seed", o.seed, "RNG seed");
    train_cmd->add_option("--zero-shot", o.zero_shot, "hold out a domain (zero-shot protocol)");
    train_cmd->add_option("--single-domain", o.single_domain, "keep only one domain");
    add_model_flags(train_cmd, o);
    add_train_flags(train_cmd, o);

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    eval_cmd->add_option("--checkpoint", o.checkpoint, "model checkpoint")->required();
    eval_cmd->add_option("--data", o.data, "evaluation corpus JSON")->required();
    eval_cmd->add_option("--out", o.out, "metrics JSON path (stdout when omitted)");
    eval_cmd->add_option("--normalization", o.normalization_path, "value normalization map");

    CLI::App* predict_cmd = app.add_subcommand("predict", "write per-slot predictions as JSONL");
    predict_cmd->add_option("--checkpoint", o.checkpoint, "model checkpoint")->required();
    predict_cmd->add_option("--data", o.data, "input corpus JSON")->required();
    predict_cmd->add_option("--out", o.out, "JSONL output path (stdout when omitted)");
    predict_cmd->add_option("--normalization", o.normalization_path, "value normalization map");

    CLI::App* split_cmd = app.add_subcommand("split", "write zero-shot or single-domain splits");
    split_cmd->add_option("--data", o.data, "corpus JSON")->required();
    split_cmd->add_option("--out-train", out_train, "train-side output")->required();
    split_cmd->add_option("--out-test", out_test, "test-side output (zero-shot only)");
    split_cmd->add_option("--slot-catalog", o.catalog_path, "slot catalog JSON");
    split_cmd->add_option("--zero-shot", o.zero_shot, "target domain for the zero-shot split");
    split_cmd->add_option("--single-domain", o.single_domain, "domain to keep");

    CLI::App* ablate_cmd = app.add_subcommand("ablate", "train the full model and each ablation");
    ablate_cmd->add_option("--data", o.data, "training corpus JSON")->required();
    ablate_cmd->add_option("--out", o.out, "summary JSON path (stdout when omitted)");
    ablate_cmd->add_option("--slot-catalog", o.catalog_path, "slot catalog JSON");
    ablate_cmd->add_option("--normalization", o.normalization_path, "value normalization map");
    ablate_cmd->add_option("--seed", o.seed, "RNG seed");
    add_model_flags(ablate_cmd, o);
    add_train_flags(ablate_cmd, o);

    CLI11_PARSE(app, argc, argv);

    try {
        if (convert->parsed()) {
            finalize(convert, o);
            return run_convert(o, convert_input);
        }
        if (train_cmd->parsed()) {
            finalize(train_cmd, o);
            return run_train(o);
        }
        if (eval_cmd->parsed()) {
            finalize(eval_cmd, o);
            return run_eval(o);
        }
        if (predict_cmd->parsed()) {
            finalize(predict_cmd, o);
            return run_predict(o);
        }
        if (split_cmd->parsed()) {
            finalize(split_cmd, o);
            if (!o.zero_shot.empty() && out_test.empty())
                throw std::runtime_error("split --zero-shot also needs --out-test");
            return run_split(o, out_train, out_test);
        }
        if (ablate_cmd->parsed()) {
            finalize(ablate_cmd, o);
            return run_ablate(o);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
