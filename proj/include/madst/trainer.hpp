#pragma once

#include <iosfwd>

#include "madst/eval.hpp"
#include "madst/model.hpp"

namespace madst {

struct TrainConfig {
    double lr = 0.0005;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t batch_turns = 4;
    int decay_every_epochs = 3;  // 0 disables the schedule
    double decay_factor = 0.25;
    double clip_norm = 10.0;
    std::size_t max_epochs = 10;
    int patience = 6;  // epochs without dev improvement; <= 0 disables
    std::uint64_t seed = 1;
    std::size_t eval_every = 1;
    double stop_at_train_joint = 0.0;  // <= 0 disables the early exit
};

// learning rate after the step-decay schedule
double scheduled_lr(const TrainConfig& config, std::size_t epoch);

class Adam {
public:
    Adam(std::vector<Var> params, const TrainConfig& config);

    void zero_grad();
    // one update from the accumulated grads; throws on NaN, naming the parameter
    void step(double lr);
    std::size_t step_count() const { return step_count_; }

private:
    std::vector<Var> params_;
    std::vector<Tensor> m_, v_;
    TrainConfig config_;
    std::size_t step_count_ = 0;
};

std::vector<TurnResult> predict_examples(const Model& model, const std::vector<Example>& examples);

struct TrainResult {
    double best_dev_joint = 0.0;
    std::size_t best_epoch = 0;
    std::vector<double> epoch_losses;
    double final_train_joint = 0.0;
};

// Optimizes `model` in place, restoring the best-dev parameters at the end.
// `log` receives one JSON line per epoch when given.
TrainResult train(Model& model, const std::vector<Dialog>& train_dialogs,
                  const std::vector<Dialog>& dev_dialogs, const TrainConfig& config,
                  std::ostream* log = nullptr);

constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const Model& model, const TrainConfig& config,
                     std::size_t epoch, double dev_metric);

struct LoadedCheckpoint {
    Model model;
    TrainConfig train_config;
    std::size_t epoch = 0;
    double dev_metric = 0.0;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace madst
