#include "madst/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include <json.hpp>

namespace madst {

using nlohmann::ordered_json;

double scheduled_lr(const TrainConfig& config, std::size_t epoch) {
    if (config.decay_every_epochs <= 0) return config.lr;
    std::size_t decays = epoch / static_cast<std::size_t>(config.decay_every_epochs);
    return config.lr * std::pow(config.decay_factor, static_cast<double>(decays));
}

Adam::Adam(std::vector<Var> params, const TrainConfig& config)
    : params_(std::move(params)), config_(config) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Var& p : params_) {
        m_.push_back(Tensor::zeros(p->value.rows(), p->value.cols()));
        v_.push_back(Tensor::zeros(p->value.rows(), p->value.cols()));
    }
}

void Adam::zero_grad() {
    for (const Var& p : params_) p->grad.fill(0.0);
}

void Adam::step(double lr) {
    for (const Var& p : params_)
        if (!p->grad.all_finite())
            throw std::runtime_error("Adam: non-finite gradient in parameter '" + p->name + "'");

    if (config_.clip_norm > 0.0) {
        double sq = 0.0;
        for (const Var& p : params_)
            for (double g : p->grad.data()) sq += g * g;
        double norm = std::sqrt(sq);
        if (norm > config_.clip_norm) {
            double s = config_.clip_norm / norm;
            for (const Var& p : params_)
                for (double& g : p->grad.data()) g *= s;
        }
    }

    ++step_count_;
    double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_count_));
    double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_count_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& val = params_[i]->value;
        const Tensor& grad = params_[i]->grad;
        for (std::size_t k = 0; k < val.size(); ++k) {
            double g = grad.at(k);
            m_[i].at(k) = config_.beta1 * m_[i].at(k) + (1.0 - config_.beta1) * g;
            v_[i].at(k) = config_.beta2 * v_[i].at(k) + (1.0 - config_.beta2) * g * g;
            double m_hat = m_[i].at(k) / bc1;
            double v_hat = v_[i].at(k) / bc2;
            val.at(k) -= lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
        }
    }
}

std::vector<TurnResult> predict_examples(const Model& model,
                                         const std::vector<Example>& examples) {
    std::vector<TurnResult> out;
    out.reserve(examples.size());
    for (const Example& ex : examples) {
        TurnResult t;
        t.dialog_id = ex.dialog_id;
        t.turn_index = ex.turn_index;
        for (const std::string& slot : model.catalog.slots) {
            Prediction p = predict_slot(model, ex, slot);
            t.slots[slot] = {ex.targets.at(slot), p.value};
        }
        out.push_back(std::move(t));
    }
    return out;
}

namespace {

using ParamSnapshot = std::vector<Tensor>;

ParamSnapshot snapshot(const Model& model) {
    ParamSnapshot s;
    for (const Var& p : model.named_parameters()) s.push_back(p->value);
    return s;
}

void restore(Model& model, const ParamSnapshot& s) {
    auto params = model.named_parameters();
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = s[i];
}

}  // namespace

TrainResult train(Model& model, const std::vector<Dialog>& train_dialogs,
                  const std::vector<Dialog>& dev_dialogs, const TrainConfig& config,
                  std::ostream* log) {
    if (train_dialogs.empty()) throw std::invalid_argument("train: empty training set");
    std::vector<Example> train_examples = make_examples(train_dialogs, model.catalog);
    std::vector<Example> dev_examples = make_examples(dev_dialogs, model.catalog);

    Adam optimizer(model.trainable_parameters(), config);
    std::mt19937_64 rng(config.seed);

    TrainResult result;
    ParamSnapshot best = snapshot(model);
    double best_dev = -1.0;
    std::size_t since_best = 0;

    std::vector<std::size_t> order(train_examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        double lr = scheduled_lr(config, epoch);
        std::shuffle(order.begin(), order.end(), rng);

        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_turns) {
            std::size_t end = std::min(order.size(), start + config.batch_turns);
            std::vector<Var> losses;
            FeatureRun run{true, &rng};
            for (std::size_t b = start; b < end; ++b) {
                const Example& ex = train_examples[order[b]];
                for (const std::string& slot : model.catalog.slots)
                    losses.push_back(example_loss(model, ex, slot, run));
            }
            Var batch_loss = mean_of(losses);
            double loss_val = batch_loss->value.item();
            if (!std::isfinite(loss_val))
                throw std::runtime_error("train: loss diverged (non-finite) at epoch " +
                                         std::to_string(epoch));
            optimizer.zero_grad();
            backward(batch_loss);
            optimizer.step(lr);
            epoch_loss += loss_val;
            ++batches;
        }
        epoch_loss /= static_cast<double>(batches);
        result.epoch_losses.push_back(epoch_loss);

        bool eval_now = config.eval_every > 0 && (epoch + 1) % config.eval_every == 0;
        double dev_joint = -1.0, train_joint = -1.0;
        if (eval_now) {
            if (!dev_examples.empty())
                dev_joint = joint_goal(predict_examples(model, dev_examples));
            if (config.stop_at_train_joint > 0.0 || dev_examples.empty())
                train_joint = joint_goal(predict_examples(model, train_examples));

            double metric = dev_examples.empty() ? train_joint : dev_joint;
            if (metric > best_dev) {
                best_dev = metric;
                best = snapshot(model);
                result.best_epoch = epoch;
                since_best = 0;
            } else {
                ++since_best;
            }
        }

        if (log) {
            ordered_json line;
            line["epoch"] = epoch;
            line["loss"] = epoch_loss;
            line["dev_joint"] = dev_joint;
            line["train_joint"] = train_joint;
            line["lr"] = lr;
            (*log) << line.dump() << "\n";
        }

        if (config.stop_at_train_joint > 0.0 && train_joint >= config.stop_at_train_joint) break;
        if (eval_now && config.patience > 0 &&
            since_best >= static_cast<std::size_t>(config.patience))
            break;
    }

    if (best_dev >= 0.0) restore(model, best);
    result.best_dev_joint = std::max(0.0, best_dev);
    if (!train_examples.empty())
        result.final_train_joint = joint_goal(predict_examples(model, train_examples));
    return result;
}

// --- checkpoint -----------------------------------------------------------

namespace {

ordered_json tensor_to_json(const Tensor& t) {
    ordered_json j;
    j["rows"] = t.rows();
    j["cols"] = t.cols();
    j["data"] = t.data();
    return j;
}

Tensor tensor_from_json(const ordered_json& j) {
    return Tensor(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                  j.at("data").get<std::vector<double>>());
}

ordered_json config_to_json(const ModelConfig& c, const TrainConfig& t) {
    ordered_json j;
    j["hidden"] = c.hidden;
    j["att_dim"] = c.att_dim;
    j["max_decode_len"] = c.max_decode_len;
    j["dropout"] = c.dropout;
    j["gamma"] = c.gamma;
    j["stages"] = {{"word_xattn", c.stages.word_xattn},
                   {"high_xattn", c.stages.high_xattn},
                   {"self_attn", c.stages.self_attn},
                   {"slot_summarizer", c.stages.slot_summarizer}};
    j["embed"] = {{"static_dim", c.embed.static_dim},
                  {"char_emb_dim", c.embed.char_emb_dim},
                  {"char_out_dim", c.embed.char_out_dim},
                  {"tag_dim", c.embed.tag_dim},
                  {"ctx_dim", c.embed.ctx_dim},
                  {"ctx_layers", c.embed.ctx_layers},
                  {"max_turns", c.embed.max_turns},
                  {"pos_vocab", c.embed.pos_vocab},
                  {"ner_vocab", c.embed.ner_vocab},
                  {"finetune_static", c.embed.finetune_static},
                  {"dropout", c.embed.dropout},
                  {"ctx_dropout", c.embed.ctx_dropout}};
    j["train"] = {{"lr", t.lr},
                  {"beta1", t.beta1},
                  {"beta2", t.beta2},
                  {"epsilon", t.epsilon},
                  {"batch_turns", t.batch_turns},
                  {"decay_every_epochs", t.decay_every_epochs},
                  {"decay_factor", t.decay_factor},
                  {"clip_norm", t.clip_norm},
                  {"max_epochs", t.max_epochs},
                  {"patience", t.patience},
                  {"seed", t.seed},
                  {"eval_every", t.eval_every},
                  {"stop_at_train_joint", t.stop_at_train_joint}};
    return j;
}

void config_from_json(const ordered_json& j, ModelConfig& c, TrainConfig& t) {
    c.hidden = j.at("hidden").get<std::size_t>();
    c.att_dim = j.at("att_dim").get<std::size_t>();
    c.max_decode_len = j.at("max_decode_len").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    c.gamma = j.at("gamma").get<double>();
    const auto& s = j.at("stages");
    c.stages.word_xattn = s.at("word_xattn").get<bool>();
    c.stages.high_xattn = s.at("high_xattn").get<bool>();
    c.stages.self_attn = s.at("self_attn").get<bool>();
    c.stages.slot_summarizer = s.at("slot_summarizer").get<bool>();
    const auto& e = j.at("embed");
    c.embed.static_dim = e.at("static_dim").get<std::size_t>();
    c.embed.char_emb_dim = e.at("char_emb_dim").get<std::size_t>();
    c.embed.char_out_dim = e.at("char_out_dim").get<std::size_t>();
    c.embed.tag_dim = e.at("tag_dim").get<std::size_t>();
    c.embed.ctx_dim = e.at("ctx_dim").get<std::size_t>();
    c.embed.ctx_layers = e.at("ctx_layers").get<std::size_t>();
    c.embed.max_turns = e.at("max_turns").get<std::size_t>();
    c.embed.pos_vocab = e.at("pos_vocab").get<std::size_t>();
    c.embed.ner_vocab = e.at("ner_vocab").get<std::size_t>();
    c.embed.finetune_static = e.at("finetune_static").get<bool>();
    c.embed.dropout = e.at("dropout").get<double>();
    c.embed.ctx_dropout = e.at("ctx_dropout").get<double>();
    const auto& tj = j.at("train");
    t.lr = tj.at("lr").get<double>();
    t.beta1 = tj.at("beta1").get<double>();
    t.beta2 = tj.at("beta2").get<double>();
    t.epsilon = tj.at("epsilon").get<double>();
    t.batch_turns = tj.at("batch_turns").get<std::size_t>();
    t.decay_every_epochs = tj.at("decay_every_epochs").get<int>();
    t.decay_factor = tj.at("decay_factor").get<double>();
    t.clip_norm = tj.at("clip_norm").get<double>();
    t.max_epochs = tj.at("max_epochs").get<std::size_t>();
    t.patience = tj.at("patience").get<int>();
    t.seed = tj.at("seed").get<std::uint64_t>();
    t.eval_every = tj.at("eval_every").get<std::size_t>();
    t.stop_at_train_joint = tj.at("stop_at_train_joint").get<double>();
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, const TrainConfig& config,
                     std::size_t epoch, double dev_metric) {
    ordered_json j;
    j["format"] = "madst-checkpoint";
    j["version"] = kCheckpointVersion;
    j["epoch"] = epoch;
    j["dev_metric"] = dev_metric;
    j["config"] = config_to_json(model.config, config);
    j["vocab"] = model.vocab.words;
    j["slot_catalog"] = model.catalog.slots;
    ordered_json params;
    for (const Var& p : model.named_parameters()) params[p->name] = tensor_to_json(p->value);
    j["params"] = std::move(params);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_checkpoint: cannot write " + path);
    out << j.dump() << "\n";
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    ordered_json j;
    try {
        j = ordered_json::parse(in);
    } catch (const std::exception& e) {
        throw std::runtime_error("load_checkpoint: corrupt file " + path + ": " + e.what());
    }
    if (j.value("format", "") != "madst-checkpoint" ||
        j.value("version", -1) != kCheckpointVersion)
        throw std::runtime_error("load_checkpoint: " + path + " is not a version-" +
                                 std::to_string(kCheckpointVersion) + " checkpoint");

    LoadedCheckpoint lc;
    ModelConfig mc;
    config_from_json(j.at("config"), mc, lc.train_config);
    Vocab vocab;
    vocab.words = j.at("vocab").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < vocab.words.size(); ++i)
        vocab.ids[vocab.words[i]] = static_cast<int>(i);
    SlotCatalog catalog;
    catalog.slots = j.at("slot_catalog").get<std::vector<std::string>>();

    lc.model = make_model(mc, vocab, catalog, lc.train_config.seed);
    const auto& params = j.at("params");
    for (const Var& p : lc.model.named_parameters()) {
        if (!params.contains(p->name))
            throw std::runtime_error("load_checkpoint: missing parameter '" + p->name + "'");
        Tensor t = tensor_from_json(params.at(p->name));
        if (!t.same_shape(p->value))
            throw std::runtime_error("load_checkpoint: shape mismatch for '" + p->name + "'");
        p->value = std::move(t);
    }
    lc.epoch = j.at("epoch").get<std::size_t>();
    lc.dev_metric = j.at("dev_metric").get<double>();
    return lc;
}

}  // namespace madst
