#include "qosec/learner.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <sstream>
#include <utility>

#include "qosec/errors.hpp"
#include "qosec/secrecy_analysis.hpp"

namespace qosec {

namespace {

std::size_t feature_count(int layer) {
    return static_cast<std::size_t>(kDnnLayerSizes[static_cast<std::size_t>(layer)]);
}

// One hidden layer's forward state for a batch, kept for the backward pass.
struct LayerCache {
    std::vector<double> z;    // dense output
    std::vector<double> mu;   // batch mean per feature
    std::vector<double> var;  // biased batch variance per feature
    std::vector<double> xhat; // normalized activations
    std::vector<double> act;  // rectified output, input to the next layer
};

struct ForwardCache {
    std::vector<double> x0; // scaled inputs
    std::array<LayerCache, kDnnHidden> hidden;
    std::vector<double> out;
};

void dense_forward(const DenseLayer& d, const std::vector<double>& x,
                   std::size_t batch, std::vector<double>& y) {
    const auto in = static_cast<std::size_t>(d.fan_in);
    const auto out = static_cast<std::size_t>(d.fan_out);
    y.assign(batch * out, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t o = 0; o < out; ++o) {
            double acc = d.b[o];
            const double* w = d.W.data() + o * in;
            const double* xb = x.data() + b * in;
            for (std::size_t i = 0; i < in; ++i) acc += w[i] * xb[i];
            y[b * out + o] = acc;
        }
    }
}

// Train-mode forward for a whole batch, caching everything backward needs.
void forward_train(const DnnModel& model, const std::vector<double>& scaled,
                   std::size_t batch, ForwardCache& cache) {
    cache.x0 = scaled;
    const std::vector<double>* x = &cache.x0;
    for (int layer = 0; layer < kDnnHidden; ++layer) {
        LayerCache& lc = cache.hidden[static_cast<std::size_t>(layer)];
        const auto f = feature_count(layer + 1);
        dense_forward(model.dense[static_cast<std::size_t>(layer)], *x, batch,
                      lc.z);
        lc.mu.assign(f, 0.0);
        lc.var.assign(f, 0.0);
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t j = 0; j < f; ++j) lc.mu[j] += lc.z[b * f + j];
        for (std::size_t j = 0; j < f; ++j)
            lc.mu[j] /= static_cast<double>(batch);
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t j = 0; j < f; ++j) {
                const double dji = lc.z[b * f + j] - lc.mu[j];
                lc.var[j] += dji * dji;
            }
        for (std::size_t j = 0; j < f; ++j)
            lc.var[j] /= static_cast<double>(batch);

        const BatchNormLayer& bn = model.bn[static_cast<std::size_t>(layer)];
        lc.xhat.assign(batch * f, 0.0);
        lc.act.assign(batch * f, 0.0);
        for (std::size_t j = 0; j < f; ++j) {
            const double inv_std = 1.0 / std::sqrt(lc.var[j] + model.bn_eps);
            for (std::size_t b = 0; b < batch; ++b) {
                const double xh = (lc.z[b * f + j] - lc.mu[j]) * inv_std;
                lc.xhat[b * f + j] = xh;
                const double y = bn.scale[j] * xh + bn.shift[j];
                lc.act[b * f + j] = y > 0.0 ? y : 0.0;
            }
        }
        x = &lc.act;
    }
    dense_forward(model.dense[kDnnHidden], *x, batch, cache.out);
}

void infer_batch(const DnnModel& model, const std::vector<double>& scaled,
                 std::size_t batch, std::vector<double>& out) {
    std::vector<double> x = scaled, y;
    for (int layer = 0; layer < kDnnHidden; ++layer) {
        const auto f = feature_count(layer + 1);
        dense_forward(model.dense[static_cast<std::size_t>(layer)], x, batch, y);
        const BatchNormLayer& bn = model.bn[static_cast<std::size_t>(layer)];
        for (std::size_t j = 0; j < f; ++j) {
            const double inv_std = 1.0 / std::sqrt(bn.run_var[j] + model.bn_eps);
            for (std::size_t b = 0; b < batch; ++b) {
                const double xh = (y[b * f + j] - bn.run_mean[j]) * inv_std;
                const double v = bn.scale[j] * xh + bn.shift[j];
                y[b * f + j] = v > 0.0 ? v : 0.0;
            }
        }
        x.swap(y);
    }
    dense_forward(model.dense[kDnnHidden], x, batch, out);
}

std::vector<double> scale_inputs(const DnnModel& model,
                                 const std::vector<TrainingSample>& batch) {
    std::vector<double> scaled(batch.size() * 4);
    for (std::size_t b = 0; b < batch.size(); ++b)
        for (std::size_t i = 0; i < 4; ++i)
            scaled[b * 4 + i] = batch[b].input[i] / model.input_scale[i];
    return scaled;
}

struct BatchStats {
    std::array<std::vector<double>, kDnnHidden> mu;
    std::array<std::vector<double>, kDnnHidden> var;
};

// Loss plus gradients in collect_parameters order; optionally reports the
// batch statistics so the caller can maintain running estimates.
double backprop(const DnnModel& model, const std::vector<TrainingSample>& batch,
                std::vector<double>& grad_out, BatchStats* stats) {
    const std::size_t B = batch.size();
    if (B == 0) throw ConfigError("training batch: must not be empty");

    ForwardCache cache;
    forward_train(model, scale_inputs(model, batch), B, cache);

    const std::size_t n_out = feature_count(kDnnHidden + 1);
    double loss = 0.0;
    std::vector<double> d_out(B * n_out);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t j = 0; j < n_out; ++j) {
            const double diff = cache.out[b * n_out + j] - batch[b].target[j];
            loss += diff * diff;
            d_out[b * n_out + j] =
                2.0 * diff / (static_cast<double>(B) * static_cast<double>(n_out));
        }
    loss /= static_cast<double>(B) * static_cast<double>(n_out);

    // Structured gradient tensors, scattered into the flat layout at the end.
    std::array<std::vector<double>, kDnnHidden + 1> gW, gb;
    std::array<std::vector<double>, kDnnHidden> gScale, gShift;

    // Output layer.
    {
        const DenseLayer& d = model.dense[kDnnHidden];
        const auto in = static_cast<std::size_t>(d.fan_in);
        const auto out = static_cast<std::size_t>(d.fan_out);
        const std::vector<double>& x =
            cache.hidden[kDnnHidden - 1].act;
        gW[kDnnHidden].assign(in * out, 0.0);
        gb[kDnnHidden].assign(out, 0.0);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t o = 0; o < out; ++o) {
                const double g = d_out[b * out + o];
                gb[kDnnHidden][o] += g;
                for (std::size_t i = 0; i < in; ++i)
                    gW[kDnnHidden][o * in + i] += g * x[b * in + i];
            }
    }

    std::vector<double> d_act; // gradient wrt the current layer's activations
    {
        const DenseLayer& d = model.dense[kDnnHidden];
        const auto in = static_cast<std::size_t>(d.fan_in);
        const auto out = static_cast<std::size_t>(d.fan_out);
        d_act.assign(B * in, 0.0);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t o = 0; o < out; ++o) {
                const double g = d_out[b * out + o];
                for (std::size_t i = 0; i < in; ++i)
                    d_act[b * in + i] += g * d.W[o * in + i];
            }
    }

    for (int layer = kDnnHidden - 1; layer >= 0; --layer) {
        const LayerCache& lc = cache.hidden[static_cast<std::size_t>(layer)];
        const BatchNormLayer& bn = model.bn[static_cast<std::size_t>(layer)];
        const auto f = feature_count(layer + 1);

        // Rectifier gate, then the batch-normalization chain rule.
        std::vector<double> d_y(B * f);
        for (std::size_t i = 0; i < B * f; ++i)
            d_y[i] = lc.act[i] > 0.0 ? d_act[i] : 0.0;

        gScale[static_cast<std::size_t>(layer)].assign(f, 0.0);
        gShift[static_cast<std::size_t>(layer)].assign(f, 0.0);
        std::vector<double> d_z(B * f, 0.0);
        for (std::size_t j = 0; j < f; ++j) {
            const double inv_std = 1.0 / std::sqrt(lc.var[j] + model.bn_eps);
            double g_scale = 0.0, g_shift = 0.0, d_var = 0.0, d_mu = 0.0;
            double sum_centered = 0.0;
            for (std::size_t b = 0; b < B; ++b) {
                const double g = d_y[b * f + j];
                const double xh = lc.xhat[b * f + j];
                g_scale += g * xh;
                g_shift += g;
                const double d_xhat = g * bn.scale[j];
                const double centered = lc.z[b * f + j] - lc.mu[j];
                d_var += d_xhat * centered;
                d_mu -= d_xhat * inv_std;
                sum_centered += centered;
            }
            d_var *= -0.5 * inv_std * inv_std * inv_std;
            d_mu += d_var * (-2.0 * sum_centered / static_cast<double>(B));
            for (std::size_t b = 0; b < B; ++b) {
                const double d_xhat = d_y[b * f + j] * bn.scale[j];
                const double centered = lc.z[b * f + j] - lc.mu[j];
                d_z[b * f + j] = d_xhat * inv_std +
                                 d_var * 2.0 * centered / static_cast<double>(B) +
                                 d_mu / static_cast<double>(B);
            }
            gScale[static_cast<std::size_t>(layer)][j] = g_scale;
            gShift[static_cast<std::size_t>(layer)][j] = g_shift;
        }

        const DenseLayer& d = model.dense[static_cast<std::size_t>(layer)];
        const auto in = static_cast<std::size_t>(d.fan_in);
        const std::vector<double>& x =
            layer == 0 ? cache.x0
                       : cache.hidden[static_cast<std::size_t>(layer - 1)].act;
        gW[static_cast<std::size_t>(layer)].assign(in * f, 0.0);
        gb[static_cast<std::size_t>(layer)].assign(f, 0.0);
        std::vector<double> d_prev(B * in, 0.0);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t o = 0; o < f; ++o) {
                const double g = d_z[b * f + o];
                gb[static_cast<std::size_t>(layer)][o] += g;
                for (std::size_t i = 0; i < in; ++i) {
                    gW[static_cast<std::size_t>(layer)][o * in + i] +=
                        g * x[b * in + i];
                    d_prev[b * in + i] += g * d.W[o * in + i];
                }
            }
        d_act.swap(d_prev);
    }

    grad_out.clear();
    for (int k = 0; k <= kDnnHidden; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        grad_out.insert(grad_out.end(), gW[ks].begin(), gW[ks].end());
        grad_out.insert(grad_out.end(), gb[ks].begin(), gb[ks].end());
    }
    for (int k = 0; k < kDnnHidden; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        grad_out.insert(grad_out.end(), gScale[ks].begin(), gScale[ks].end());
        grad_out.insert(grad_out.end(), gShift[ks].begin(), gShift[ks].end());
    }

    if (stats) {
        for (int layer = 0; layer < kDnnHidden; ++layer) {
            const auto ls = static_cast<std::size_t>(layer);
            stats->mu[ls] = cache.hidden[ls].mu;
            stats->var[ls] = cache.hidden[ls].var;
        }
    }
    return loss;
}

void validate_dataset(const std::vector<TrainingSample>& dataset) {
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const TrainingSample& s = dataset[i];
        for (std::size_t j = 0; j < 4; ++j) {
            // The background-source count (index 1) may legitimately be zero;
            // the remaining features are strictly positive quantities.
            const bool ok = (j == 1) ? (s.input[j] >= 0.0) : (s.input[j] > 0.0);
            if (!ok || !std::isfinite(s.input[j])) {
                std::ostringstream msg;
                msg << "dataset[" << i << "].input[" << j << "]: must be "
                    << (j == 1 ? "non-negative" : "positive") << " and finite";
                throw ConfigError(msg.str());
            }
        }
        if (s.input[3] > 1.0) {
            std::ostringstream msg;
            msg << "dataset[" << i << "].input[3]: correlation must lie in (0, 1]";
            throw ConfigError(msg.str());
        }
        for (std::size_t j = 0; j < 5; ++j)
            if (!(s.target[j] > 0.0) || !(s.target[j] <= 1.0)) {
                std::ostringstream msg;
                msg << "dataset[" << i << "].target[" << j
                    << "]: must lie in (0, 1]";
                throw ConfigError(msg.str());
            }
    }
}

void put_u32(std::ofstream& os, std::uint32_t v) {
    unsigned char buf[4];
    for (int i = 0; i < 4; ++i)
        buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(buf), 4);
}

void put_f64(std::ofstream& os, double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i)
        buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint32_t get_u32(std::ifstream& is) {
    unsigned char buf[4];
    if (!is.read(reinterpret_cast<char*>(buf), 4))
        throw ConfigError("model file: truncated header");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
    return v;
}

double get_f64(std::ifstream& is) {
    unsigned char buf[8];
    if (!is.read(reinterpret_cast<char*>(buf), 8))
        throw ConfigError("model file: truncated tensor data");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return std::bit_cast<double>(v);
}

constexpr std::uint32_t kModelMagic = 0x4e4e4451u; // "QDNN" little-endian
constexpr std::uint32_t kModelVersion = 1;

} // namespace

DnnModel init_model(Rng& rng, const std::array<double, 4>& input_scale) {
    DnnModel model;
    model.input_scale = input_scale;
    for (int k = 0; k <= kDnnHidden; ++k) {
        DenseLayer& d = model.dense[static_cast<std::size_t>(k)];
        d.fan_in = kDnnLayerSizes[static_cast<std::size_t>(k)];
        d.fan_out = kDnnLayerSizes[static_cast<std::size_t>(k) + 1];
        const auto n = static_cast<std::size_t>(d.fan_in * d.fan_out);
        d.W.resize(n);
        d.b.assign(static_cast<std::size_t>(d.fan_out), 0.0);
        const double limit = std::sqrt(3.0 / d.fan_in);
        for (double& w : d.W) w = (2.0 * rng.uniform01() - 1.0) * limit;
    }
    for (int k = 0; k < kDnnHidden; ++k) {
        BatchNormLayer& bn = model.bn[static_cast<std::size_t>(k)];
        const auto f = feature_count(k + 1);
        bn.scale.assign(f, 1.0);
        bn.shift.assign(f, 0.0);
        bn.run_mean.assign(f, 0.0);
        bn.run_var.assign(f, 1.0);
    }
    return model;
}

std::array<double, 5> forward(const DnnModel& model,
                              const std::array<double, 4>& input,
                              ForwardMode mode) {
    for (double v : input)
        if (!std::isfinite(v))
            throw ConfigError("forward: input components must be finite");
    std::vector<double> scaled(4);
    for (std::size_t i = 0; i < 4; ++i)
        scaled[i] = input[i] / model.input_scale[i];

    std::vector<double> out;
    if (mode == ForwardMode::Infer) {
        infer_batch(model, scaled, 1, out);
    } else {
        ForwardCache cache;
        forward_train(model, scaled, 1, cache);
        out = cache.out;
    }
    std::array<double, 5> result{};
    std::copy(out.begin(), out.end(), result.begin());
    return result;
}

void TrainSettings::validate() const {
    if (n_train < 1 || n_val < 1 || n_test < 0)
        throw ConfigError("train.split: needs at least one training and one "
                          "validation sample");
    if (batch_size < 1) throw ConfigError("train.batch_size: must be >= 1");
    if (max_epochs < 1) throw ConfigError("train.max_epochs: must be >= 1");
    if (!(learning_rate > 0.0))
        throw ConfigError("train.learning_rate: must be positive");
    if (!(lr_drop_factor > 0.0) || !(lr_drop_factor <= 1.0))
        throw ConfigError("train.lr_drop_factor: must lie in (0, 1]");
    if (lr_drop_period < 1)
        throw ConfigError("train.lr_drop_period: must be >= 1");
    if (!(adam_beta1 >= 0.0) || !(adam_beta1 < 1.0) || !(adam_beta2 >= 0.0) ||
        !(adam_beta2 < 1.0))
        throw ConfigError("train.adam betas: must lie in [0, 1)");
    if (!(adam_eps > 0.0)) throw ConfigError("train.adam_eps: must be positive");
    for (double s : input_scale)
        if (!(s > 0.0))
            throw ConfigError("train.input_scale: entries must be positive");
}

std::vector<double*> collect_parameters(DnnModel& model) {
    std::vector<double*> params;
    for (int k = 0; k <= kDnnHidden; ++k) {
        DenseLayer& d = model.dense[static_cast<std::size_t>(k)];
        for (double& w : d.W) params.push_back(&w);
        for (double& b : d.b) params.push_back(&b);
    }
    for (int k = 0; k < kDnnHidden; ++k) {
        BatchNormLayer& bn = model.bn[static_cast<std::size_t>(k)];
        for (double& s : bn.scale) params.push_back(&s);
        for (double& s : bn.shift) params.push_back(&s);
    }
    return params;
}

double loss_and_gradients(const DnnModel& model,
                          const std::vector<TrainingSample>& batch,
                          std::vector<double>& grad_out) {
    return backprop(model, batch, grad_out, nullptr);
}

double evaluate_mse(const DnnModel& model,
                    const std::vector<TrainingSample>& samples) {
    if (samples.empty()) return 0.0;
    std::vector<double> out;
    infer_batch(model, scale_inputs(model, samples), samples.size(), out);
    double loss = 0.0;
    for (std::size_t b = 0; b < samples.size(); ++b)
        for (std::size_t j = 0; j < 5; ++j) {
            const double diff = out[b * 5 + j] - samples[b].target[j];
            loss += diff * diff;
        }
    return loss / (static_cast<double>(samples.size()) * 5.0);
}

std::pair<DnnModel, TrainReport> train(const std::vector<TrainingSample>& dataset,
                                       const TrainSettings& settings, Rng& rng) {
    settings.validate();
    const long long needed = settings.n_train + settings.n_val + settings.n_test;
    if (static_cast<long long>(dataset.size()) < needed) {
        std::ostringstream msg;
        msg << "dataset: has " << dataset.size() << " samples but the split "
            << "needs " << needed;
        throw ConfigError(msg.str());
    }
    validate_dataset(dataset);

    const std::vector<TrainingSample> train_set(
        dataset.begin(), dataset.begin() + settings.n_train);
    const std::vector<TrainingSample> val_set(
        dataset.begin() + settings.n_train,
        dataset.begin() + settings.n_train + settings.n_val);
    const std::vector<TrainingSample> test_set(
        dataset.begin() + settings.n_train + settings.n_val,
        dataset.begin() + needed);

    DnnModel model = init_model(rng, settings.input_scale);
    std::vector<double*> params = collect_parameters(model);
    const std::size_t n_params = params.size();
    std::vector<double> m(n_params, 0.0), v(n_params, 0.0), grads;
    long long step = 0;

    DnnModel best_model = model;
    double best_val = std::numeric_limits<double>::infinity();
    TrainReport report;
    report.best_epoch = 0;

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < settings.max_epochs; ++epoch) {
        const double lr =
            settings.learning_rate *
            std::pow(settings.lr_drop_factor, epoch / settings.lr_drop_period);

        // Fisher-Yates shuffle driven by the caller's generator.
        for (std::size_t i = order.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(
                rng.uniform01() * static_cast<double>(i));
            std::swap(order[i - 1], order[std::min(j, i - 1)]);
        }

        double epoch_loss = 0.0;
        int batches = 0;
        BatchStats stats;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(settings.batch_size)) {
            const std::size_t stop = std::min(
                order.size(), start + static_cast<std::size_t>(settings.batch_size));
            std::vector<TrainingSample> batch;
            batch.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i)
                batch.push_back(train_set[order[i]]);

            const double loss = backprop(model, batch, grads, &stats);
            if (!std::isfinite(loss)) {
                std::ostringstream msg;
                msg << "training diverged: non-finite loss at epoch " << epoch
                    << ", batch " << batches << ", learning rate " << lr;
                throw NumericalError(msg.str());
            }
            epoch_loss += loss;
            ++batches;

            // Exponential moving average of the batch statistics.
            for (int layer = 0; layer < kDnnHidden; ++layer) {
                BatchNormLayer& bn = model.bn[static_cast<std::size_t>(layer)];
                const auto ls = static_cast<std::size_t>(layer);
                for (std::size_t j = 0; j < bn.run_mean.size(); ++j) {
                    bn.run_mean[j] = model.bn_momentum * bn.run_mean[j] +
                                     (1.0 - model.bn_momentum) * stats.mu[ls][j];
                    bn.run_var[j] = model.bn_momentum * bn.run_var[j] +
                                    (1.0 - model.bn_momentum) * stats.var[ls][j];
                }
            }

            ++step;
            const double bc1 = 1.0 - std::pow(settings.adam_beta1, step);
            const double bc2 = 1.0 - std::pow(settings.adam_beta2, step);
            for (std::size_t i = 0; i < n_params; ++i) {
                m[i] = settings.adam_beta1 * m[i] +
                       (1.0 - settings.adam_beta1) * grads[i];
                v[i] = settings.adam_beta2 * v[i] +
                       (1.0 - settings.adam_beta2) * grads[i] * grads[i];
                *params[i] -=
                    lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + settings.adam_eps);
            }
        }

        report.train_mse.push_back(epoch_loss / batches);
        report.val_mse.push_back(evaluate_mse(model, val_set));
        report.lr_trace.push_back(lr);
        if (report.val_mse.back() < best_val) {
            best_val = report.val_mse.back();
            best_model = model;
            report.best_epoch = epoch;
        }
    }

    report.epochs = settings.max_epochs;
    report.test_mse = evaluate_mse(best_model, test_set);
    return {std::move(best_model), std::move(report)};
}

TxParams predict(const DnnModel& model, const SystemConfig& cfg,
                 const ImageSpec& img) {
    if (img.N_roi < 1)
        throw ConfigError("predict: img.N_roi must be >= 1 so a frame length "
                          "divisor exists");
    const std::array<double, 4> input{
        static_cast<double>(img.N_roi), static_cast<double>(img.N_bg), cfg.r_D,
        cfg.rho};
    const std::array<double, 5> out = forward(model, input, ForwardMode::Infer);

    const auto clamp = [](double x, double lo, double hi) {
        return std::min(hi, std::max(lo, x));
    };
    const double p_lo = cfg.gamma_min / cfg.gamma_max * (1.0 + 1e-6);

    TxParams tx;
    tx.zeta = clamp(out[0], 1e-3, 1.0);
    tx.P_p = clamp(out[1], p_lo, 1.0) * cfg.sigma_n * cfg.gamma_max;
    tx.P_s = clamp(out[2], p_lo, 1.0) * cfg.sigma_n * cfg.gamma_max;
    tx.nu = clamp(out[3], 0.0, 1.0) * 4.0 * cfg.n_T;

    const double wanted = static_cast<double>(img.N_roi) * out[4];
    const std::vector<long long> divisors = divisors_ascending(img.N_roi);
    long long best = divisors.front();
    for (long long d : divisors)
        if (std::abs(static_cast<double>(d) - wanted) <
            std::abs(static_cast<double>(best) - wanted))
            best = d;
    tx.L_s = static_cast<int>(best);
    return tx;
}

void save_model(const DnnModel& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("model file: cannot open for writing: " + path);
    put_u32(os, kModelMagic);
    put_u32(os, kModelVersion);
    put_u32(os, static_cast<std::uint32_t>(kDnnLayerSizes.size()));
    for (int s : kDnnLayerSizes) put_u32(os, static_cast<std::uint32_t>(s));
    put_f64(os, model.bn_eps);
    put_f64(os, model.bn_momentum);
    for (double s : model.input_scale) put_f64(os, s);
    for (const DenseLayer& d : model.dense) {
        for (double w : d.W) put_f64(os, w);
        for (double b : d.b) put_f64(os, b);
    }
    for (const BatchNormLayer& bn : model.bn) {
        for (double x : bn.scale) put_f64(os, x);
        for (double x : bn.shift) put_f64(os, x);
        for (double x : bn.run_mean) put_f64(os, x);
        for (double x : bn.run_var) put_f64(os, x);
    }
    if (!os) throw ConfigError("model file: write failed: " + path);
}

DnnModel load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("model file: cannot open: " + path);
    if (get_u32(is) != kModelMagic)
        throw ConfigError("model file: unrecognized format: " + path);
    if (get_u32(is) != kModelVersion)
        throw ConfigError("model file: unsupported version: " + path);
    if (get_u32(is) != kDnnLayerSizes.size())
        throw ConfigError("model file: unexpected layer count: " + path);
    for (int s : kDnnLayerSizes)
        if (get_u32(is) != static_cast<std::uint32_t>(s))
            throw ConfigError("model file: unexpected layer sizes: " + path);

    DnnModel model;
    model.bn_eps = get_f64(is);
    model.bn_momentum = get_f64(is);
    for (double& s : model.input_scale) s = get_f64(is);
    for (int k = 0; k <= kDnnHidden; ++k) {
        DenseLayer& d = model.dense[static_cast<std::size_t>(k)];
        d.fan_in = kDnnLayerSizes[static_cast<std::size_t>(k)];
        d.fan_out = kDnnLayerSizes[static_cast<std::size_t>(k) + 1];
        d.W.resize(static_cast<std::size_t>(d.fan_in * d.fan_out));
        d.b.resize(static_cast<std::size_t>(d.fan_out));
        for (double& w : d.W) w = get_f64(is);
        for (double& b : d.b) b = get_f64(is);
    }
    for (int k = 0; k < kDnnHidden; ++k) {
        BatchNormLayer& bn = model.bn[static_cast<std::size_t>(k)];
        const auto f = feature_count(k + 1);
        bn.scale.resize(f);
        bn.shift.resize(f);
        bn.run_mean.resize(f);
        bn.run_var.resize(f);
        for (double& x : bn.scale) x = get_f64(is);
        for (double& x : bn.shift) x = get_f64(is);
        for (double& x : bn.run_mean) x = get_f64(is);
        for (double& x : bn.run_var) x = get_f64(is);
        for (double x : bn.run_var)
            if (x < 0.0)
                throw ConfigError("model file: negative running variance: " +
                                  path);
    }
    return model;
}

} // namespace qosec
