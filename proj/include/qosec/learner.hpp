#ifndef QOSEC_LEARNER_HPP
#define QOSEC_LEARNER_HPP

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "qosec/rng.hpp"
#include "qosec/system_model.hpp"

namespace qosec {

// Fixed feedforward architecture: 4 scenario inputs, four hidden layers of
// 32/16/16/8 units (dense, batch-normalized, rectified), 5 linear outputs in
// normalized strategy coordinates.
inline constexpr std::array<int, 6> kDnnLayerSizes{4, 32, 16, 16, 8, 5};
inline constexpr int kDnnHidden = 4;

struct DenseLayer {
    int fan_in = 0;
    int fan_out = 0;
    std::vector<double> W; // row-major, fan_out x fan_in
    std::vector<double> b; // fan_out
};

struct BatchNormLayer {
    std::vector<double> scale;    // per feature
    std::vector<double> shift;    // per feature
    std::vector<double> run_mean; // inference statistics
    std::vector<double> run_var;  // inference statistics, >= 0
};

struct DnnModel {
    std::array<DenseLayer, kDnnHidden + 1> dense;
    std::array<BatchNormLayer, kDnnHidden> bn;
    // Inputs are divided by these before the first layer; stored with the
    // model so inference always matches training.
    std::array<double, 4> input_scale{1000.0, 1000.0, 10.0, 1.0};
    double bn_eps = 1e-5;
    double bn_momentum = 0.9; // weight of the old running statistic
};

// Fresh model with variance-scaled uniform weights (fan-in rule), zero
// biases, identity batch-norm, and unit running variance.
DnnModel init_model(Rng& rng,
                    const std::array<double, 4>& input_scale = {1000.0, 1000.0,
                                                                10.0, 1.0});

enum class ForwardMode { Train, Infer };

// Single-sample forward pass. Train mode normalizes with the statistics of
// the (here: singleton) batch; infer mode uses the stored running statistics
// and is deterministic.
std::array<double, 5> forward(const DnnModel& model,
                              const std::array<double, 4>& input,
                              ForwardMode mode);

struct TrainingSample {
    std::array<double, 4> input;  // N_roi, N_bg, r_D, rho
    std::array<double, 5> target; // zeta, P_p, P_s, nu, L_s (all normalized)
};

struct TrainSettings {
    long long n_train = 3500;
    long long n_val = 750;
    long long n_test = 750;
    int batch_size = 50;
    int max_epochs = 500;
    double learning_rate = 0.001;
    double lr_drop_factor = 0.9;
    int lr_drop_period = 50; // epochs between staircase drops
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::array<double, 4> input_scale{1000.0, 1000.0, 10.0, 1.0};

    void validate() const;
};

struct TrainReport {
    std::vector<double> train_mse; // running mean of mini-batch losses
    std::vector<double> val_mse;   // full validation set, inference mode
    std::vector<double> lr_trace;  // rate used in each epoch
    double test_mse = 0.0;         // best checkpoint on the held-out test set
    int epochs = 0;
    int best_epoch = 0; // epoch of the returned checkpoint
};

// Mean-squared-error training with the adaptive-moment method. The dataset
// is consumed positionally: the first n_train samples train, the next n_val
// select the checkpoint, the final n_test are only ever touched once.
std::pair<DnnModel, TrainReport> train(const std::vector<TrainingSample>& dataset,
                                       const TrainSettings& settings, Rng& rng);

// Trainable parameters in a fixed order (dense weights and biases, then
// batch-norm scales and shifts). The pointer list aliases the model.
std::vector<double*> collect_parameters(DnnModel& model);

// Train-mode loss and its gradient with respect to collect_parameters order.
// Pure: running statistics are not touched.
double loss_and_gradients(const DnnModel& model,
                          const std::vector<TrainingSample>& batch,
                          std::vector<double>& grad_out);

// Mean squared error of the model over the samples in inference mode.
double evaluate_mse(const DnnModel& model,
                    const std::vector<TrainingSample>& samples);

// Maps a scenario to a ready-to-use strategy: forward pass in inference
// mode, then denormalization with box clamps and snapping of the frame
// length to the nearest divisor of N_roi (ties toward the smaller divisor).
TxParams predict(const DnnModel& model, const SystemConfig& cfg,
                 const ImageSpec& img);

// Self-describing binary container (magic, version, layer shapes, then all
// tensors as little-endian 64-bit floats). Loading validates the header and
// shapes and throws ConfigError on any mismatch.
void save_model(const DnnModel& model, const std::string& path);
DnnModel load_model(const std::string& path);

} // namespace qosec

#endif
