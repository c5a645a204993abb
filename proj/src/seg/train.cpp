#include "microseg/seg/train.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "json.hpp"

namespace microseg::seg {

using nlohmann::json;

std::string TrainSchedule::to_json_string() const {
    json j;
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["learning_rate"] = learning_rate;
    j["layer_decay"] = layer_decay;
    j["beta1"] = adamw.beta1;
    j["beta2"] = adamw.beta2;
    j["epsilon"] = adamw.epsilon;
    j["weight_decay"] = adamw.weight_decay;
    j["seed"] = seed;
    j["shuffle"] = shuffle;
    return j.dump();
}

TrainSchedule TrainSchedule::from_json_string(const std::string& text) {
    json j = json::parse(text);
    TrainSchedule s;
    s.epochs = j.value("epochs", s.epochs);
    s.batch_size = j.value("batch_size", s.batch_size);
    s.learning_rate = j.value("learning_rate", s.learning_rate);
    s.layer_decay = j.value("layer_decay", s.layer_decay);
    s.adamw.beta1 = j.value("beta1", s.adamw.beta1);
    s.adamw.beta2 = j.value("beta2", s.adamw.beta2);
    s.adamw.epsilon = j.value("epsilon", s.adamw.epsilon);
    s.adamw.weight_decay = j.value("weight_decay", s.adamw.weight_decay);
    s.seed = j.value("seed", s.seed);
    s.shuffle = j.value("shuffle", s.shuffle);
    if (s.epochs < 1 || s.batch_size < 1)
        throw std::invalid_argument("TrainSchedule: epochs and batch_size must be >= 1");
    return s;
}

TrainingSetup load_training_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_training_config: cannot open " + path);
    json j = json::parse(is);
    TrainingSetup setup;
    setup.config = SegmenterConfig::from_json_string(j.at("config").dump());
    setup.schedule = TrainSchedule::from_json_string(j.value("schedule", json::object()).dump());
    return setup;
}

double mean_loss(const SegmenterModel& model, const std::vector<TrainSample>& batch) {
    if (batch.empty()) throw std::invalid_argument("mean_loss: empty batch");
    double total = 0.0;
    for (const TrainSample& s : batch) {
        Tape tape;
        Var loss = model.tape_loss(tape, s.clip, s.label, false, nullptr);
        total += tape.value(loss).data[0];
    }
    return total / static_cast<double>(batch.size());
}

double accuracy(const SegmenterModel& model, const std::vector<TrainSample>& samples) {
    if (samples.empty()) return 0.0;
    int64_t hit = 0;
    for (const TrainSample& s : samples) {
        Tensor logits = model.forward(s.clip);
        int pred = static_cast<int>(std::max_element(logits.data.begin(), logits.data.end()) -
                                    logits.data.begin());
        if (pred == s.label) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(samples.size());
}

TrainHistory train(SegmenterModel& model, const std::vector<TrainSample>& dataset,
                   const TrainSchedule& schedule, const std::vector<TrainSample>* validation) {
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
    for (const TrainSample& s : dataset)
        if (s.label < 0 || s.label >= model.config().num_classes)
            throw std::invalid_argument("train: label out of range");

    Rng root(schedule.seed);
    Rng shuffle_rng = root.fork("shuffle");
    Rng dropout_rng = root.fork("dropout");
    AdamW opt(schedule.adamw);
    std::vector<Parameter*> params = model.parameters();

    TrainHistory hist;
    std::vector<size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), size_t{0});

    for (int64_t epoch = 0; epoch < schedule.epochs; ++epoch) {
        if (schedule.shuffle) shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        int64_t seen = 0;

        for (size_t start = 0; start < order.size();
             start += static_cast<size_t>(schedule.batch_size)) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(schedule.batch_size));
            model.zero_grad();
            double batch_loss = 0.0;
            for (size_t k = start; k < end; ++k) {
                const TrainSample& s = dataset[order[k]];
                Tape tape;
                Var loss = model.tape_loss(tape, s.clip, s.label, true, &dropout_rng);
                tape.backward(loss);
                batch_loss += tape.value(loss).data[0];
            }
            double inv = 1.0 / static_cast<double>(end - start);
            for (Parameter* p : params)
                for (double& g : p->grad.data) g *= inv;
            opt.step(params, schedule.learning_rate, schedule.layer_decay);
            epoch_loss += batch_loss;
            seen += static_cast<int64_t>(end - start);
        }

        hist.train_loss.push_back(epoch_loss / static_cast<double>(seen));
        hist.train_accuracy.push_back(accuracy(model, dataset));
        if (validation != nullptr) hist.val_accuracy.push_back(accuracy(model, *validation));
    }
    return hist;
}

} // namespace microseg::seg
