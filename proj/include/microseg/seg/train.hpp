#pragma once

#include <optional>
#include <string>
#include <vector>

#include "microseg/core/optimizer.hpp"
#include "microseg/seg/model.hpp"

namespace microseg::seg {

/// One training example: a clip and the action label of its target frame.
struct TrainSample {
    Tensor clip;
    int label = 0;
};

struct TrainSchedule {
    int64_t epochs = 50;
    int64_t batch_size = 16;
    double learning_rate = 9e-5;
    double layer_decay = 0.75;
    AdamWConfig adamw;
    uint64_t seed = 0;
    bool shuffle = true;

    std::string to_json_string() const;
    static TrainSchedule from_json_string(const std::string& text);
};

struct TrainHistory {
    std::vector<double> train_loss; // per epoch, mean cross-entropy
    std::vector<double> train_accuracy;
    std::vector<double> val_accuracy; // empty when no validation set given
};

/// Cross-entropy training with AdamW and layer-wise lr decay. Mutates the
/// model weights in place; fully deterministic under the schedule seed.
TrainHistory train(SegmenterModel& model, const std::vector<TrainSample>& dataset,
                   const TrainSchedule& schedule,
                   const std::vector<TrainSample>* validation = nullptr);

/// Mean loss of the current weights on a batch (evaluation mode).
double mean_loss(const SegmenterModel& model, const std::vector<TrainSample>& batch);

double accuracy(const SegmenterModel& model, const std::vector<TrainSample>& samples);

/// Loads {"config": ..., "schedule": ...} from one JSON training-config file.
struct TrainingSetup {
    SegmenterConfig config;
    TrainSchedule schedule;
};
TrainingSetup load_training_config(const std::string& path);

} // namespace microseg::seg
