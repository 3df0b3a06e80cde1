// Python bindings for the main operations: tokenization, value
// normalization, metrics, and file-based train / evaluate / predict.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "madst/trainer.hpp"

namespace py = pybind11;
using namespace madst;

namespace {

py::object json_to_py(const nlohmann::ordered_json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

std::vector<TurnResult> results_from_py(const py::list& results) {
    std::vector<TurnResult> out;
    for (const auto& item : results) {
        py::dict d = item.cast<py::dict>();
        TurnResult t;
        t.dialog_id = d["dialog_id"].cast<std::string>();
        t.turn_index = d["turn"].cast<int>();
        for (const auto& kv : d["slots"].cast<py::dict>()) {
            auto pair = kv.second.cast<std::pair<std::string, std::string>>();
            t.slots[kv.first.cast<std::string>()] = std::move(pair);
        }
        out.push_back(std::move(t));
    }
    return out;
}

ModelConfig config_from_kwargs(std::size_t hidden, std::size_t ctx_dim, std::size_t static_dim,
                               double dropout) {
    ModelConfig c;
    c.hidden = hidden;
    c.att_dim = hidden;
    c.embed.ctx_dim = ctx_dim;
    c.embed.static_dim = static_dim;
    c.embed.char_out_dim = std::max<std::size_t>(8, static_dim / 3);
    c.embed.char_emb_dim = 8;
    c.dropout = dropout;
    return c;
}

py::dict train_file(const std::string& data, const std::string& catalog_path,
                    const std::string& out, std::size_t epochs, double lr, std::uint64_t seed,
                    std::size_t hidden, std::size_t ctx_dim, std::size_t static_dim,
                    double dropout, const std::string& dev, const std::string& static_vectors) {
    SlotCatalog catalog = SlotCatalog::load(catalog_path);
    auto train_set = load_corpus(data, catalog);
    std::vector<Dialog> dev_set;
    if (!dev.empty()) dev_set = load_corpus(dev, catalog);

    Model model = make_model(config_from_kwargs(hidden, ctx_dim, static_dim, dropout),
                             build_vocab(train_set), catalog, seed);
    if (!static_vectors.empty()) load_static_vectors(model.tables, static_vectors);

    TrainConfig tc;
    tc.lr = lr;
    tc.max_epochs = epochs;
    tc.decay_every_epochs = 0;
    tc.patience = 0;
    tc.seed = seed;
    TrainResult r = train(model, train_set, dev_set, tc);
    save_checkpoint(out, model, tc, r.best_epoch, r.best_dev_joint);

    py::dict summary;
    summary["best_dev_joint"] = r.best_dev_joint;
    summary["best_epoch"] = r.best_epoch;
    summary["final_train_joint"] = r.final_train_joint;
    summary["epoch_losses"] = r.epoch_losses;
    summary["checkpoint"] = out;
    return summary;
}

py::list predict_file(const std::string& checkpoint, const std::string& data) {
    LoadedCheckpoint ckpt = load_checkpoint(checkpoint);
    auto dialogs = load_corpus(data, ckpt.model.catalog);
    py::list out;
    for (const TurnResult& t :
         predict_examples(ckpt.model, make_examples(dialogs, ckpt.model.catalog))) {
        py::dict d;
        d["dialog_id"] = t.dialog_id;
        d["turn"] = t.turn_index;
        py::dict slots;
        for (const auto& [slot, gp] : t.slots) slots[py::str(slot)] = py::make_tuple(gp.first, gp.second);
        d["slots"] = std::move(slots);
        out.append(std::move(d));
    }
    return out;
}

py::object eval_checkpoint(const std::string& checkpoint, const std::string& data) {
    LoadedCheckpoint ckpt = load_checkpoint(checkpoint);
    auto dialogs = load_corpus(data, ckpt.model.catalog);
    EvalReport report =
        evaluate(predict_examples(ckpt.model, make_examples(dialogs, ckpt.model.catalog)));
    return json_to_py(nlohmann::ordered_json::parse(report_to_json(report)));
}

}  // namespace

PYBIND11_MODULE(madst_py, m) {
    m.doc() = "dialog state tracking: tokenization, metrics, training, prediction";

    m.def("tokenize", &tokenize, py::arg("text"),
          "Lowercase and split text; clock times like 17:45 stay one token.");
    m.def(
        "normalize_value",
        [](const std::string& value, const std::map<std::string, std::string>& norm) {
            return normalize_value(value, norm);
        },
        py::arg("value"), py::arg("normalization") = std::map<std::string, std::string>{},
        "Lowercase, trim, collapse whitespace, then apply the normalization map.");

    m.def(
        "joint_goal",
        [](const py::list& results) { return joint_goal(results_from_py(results)); },
        py::arg("results"), "Fraction of turns whose full belief state is correct.");
    m.def(
        "avg_slot", [](const py::list& results) { return avg_slot(results_from_py(results)); },
        py::arg("results"), "Fraction of correct (turn, slot) pairs.");
    m.def(
        "evaluate",
        [](const py::list& results) {
            EvalReport report = evaluate(results_from_py(results));
            return json_to_py(nlohmann::ordered_json::parse(report_to_json(report)));
        },
        py::arg("results"),
        "Full report: joint goal, avg slot, per-slot, turn buckets, domain F1.");

    m.def("train", &train_file, py::arg("data"), py::arg("slot_catalog"), py::arg("out"),
          py::arg("epochs") = 10, py::arg("lr") = 0.0005, py::arg("seed") = 1,
          py::arg("hidden") = 400, py::arg("ctx_dim") = 32, py::arg("static_dim") = 300,
          py::arg("dropout") = 0.2, py::arg("dev") = "", py::arg("static_vectors") = "",
          "Train on a corpus file and write a checkpoint; returns a summary dict.");
    m.def("predict", &predict_file, py::arg("checkpoint"), py::arg("data"),
          "Per-turn gold/predicted values for every catalog slot.");
    m.def("evaluate_checkpoint", &eval_checkpoint, py::arg("checkpoint"), py::arg("data"),
          "Load a checkpoint, predict on a corpus file, and return the metric report.");
}
