#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "qosec/errors.hpp"
#include "qosec/learner.hpp"
#include "qosec/rng.hpp"
#include "qosec/system_model.hpp"

using namespace qosec;

namespace {

DnnModel zero_model() {
    Rng rng(1);
    DnnModel m = init_model(rng);
    for (auto& d : m.dense) {
        std::fill(d.W.begin(), d.W.end(), 0.0);
        std::fill(d.b.begin(), d.b.end(), 0.0);
    }
    return m;
}

std::vector<TrainingSample> synthetic_dataset(std::size_t n, Rng& rng) {
    std::vector<TrainingSample> data;
    data.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        TrainingSample s;
        const double n_roi = 20.0 + 580.0 * rng.uniform01();
        const double n_bg = 10.0 + 200.0 * rng.uniform01();
        const double r = 1.0 + 6.0 * rng.uniform01();
        const double rho = 0.80 + 0.19 * rng.uniform01();
        s.input = {n_roi, n_bg, r, rho};
        // Smooth synthetic map into (0, 1]; keeps targets well inside the box.
        s.target = {0.2 + 0.6 * rho * rho,
                    0.1 + 0.8 * (r / 7.0),
                    0.15 + 0.7 * (n_roi / 600.0),
                    0.3 + 0.4 * rng.uniform01(),
                    0.1 + 0.5 * (n_bg / 210.0)};
        data.push_back(s);
    }
    return data;
}

std::vector<TrainingSample> random_batch(std::size_t n, Rng& rng) {
    std::vector<TrainingSample> batch;
    for (std::size_t i = 0; i < n; ++i) {
        TrainingSample s;
        s.input = {50.0 + 400.0 * rng.uniform01(), 30.0 + 100.0 * rng.uniform01(),
                   1.0 + 5.0 * rng.uniform01(), 0.8 + 0.19 * rng.uniform01()};
        for (double& t : s.target) t = 0.05 + 0.9 * rng.uniform01();
        batch.push_back(s);
    }
    return batch;
}

} // namespace

TEST_CASE("fresh models have the documented shapes and ranges") {
    Rng rng(7);
    DnnModel m = init_model(rng);

    for (int k = 0; k <= kDnnHidden; ++k) {
        const auto& d = m.dense[static_cast<std::size_t>(k)];
        CHECK(d.fan_in == kDnnLayerSizes[static_cast<std::size_t>(k)]);
        CHECK(d.fan_out == kDnnLayerSizes[static_cast<std::size_t>(k) + 1]);
        CHECK(d.W.size() == static_cast<std::size_t>(d.fan_in * d.fan_out));
        CHECK(d.b.size() == static_cast<std::size_t>(d.fan_out));
        const double limit = std::sqrt(3.0 / d.fan_in);
        double max_abs = 0.0;
        for (double w : d.W) max_abs = std::max(max_abs, std::abs(w));
        CHECK(max_abs <= limit);
        CHECK(max_abs > 0.0);
        for (double b : d.b) CHECK(b == 0.0);
    }
    for (int k = 0; k < kDnnHidden; ++k) {
        const auto& bn = m.bn[static_cast<std::size_t>(k)];
        const auto f =
            static_cast<std::size_t>(kDnnLayerSizes[static_cast<std::size_t>(k) + 1]);
        CHECK(bn.scale.size() == f);
        for (double v : bn.scale) CHECK(v == 1.0);
        for (double v : bn.shift) CHECK(v == 0.0);
        for (double v : bn.run_mean) CHECK(v == 0.0);
        for (double v : bn.run_var) CHECK(v == 1.0);
    }

    // 32*4+32 + 16*32+16 + 16*16+16 + 8*16+8 + 5*8+5 dense, plus 2*(32+16+16+8)
    // batch-norm parameters.
    CHECK(collect_parameters(m).size() == 1285);
}

TEST_CASE("zeroed weights map every input to the zero vector") {
    DnnModel m = zero_model();
    const std::array<double, 4> x{60.0, 40.0, 2.0, 0.95};
    for (ForwardMode mode : {ForwardMode::Train, ForwardMode::Infer}) {
        const auto out = forward(m, x, mode);
        for (double v : out) CHECK(v == 0.0);
    }
}

TEST_CASE("single-sample training mode normalizes the batch to zero") {
    // With a singleton batch the normalized activations vanish, so the output
    // depends only on the parameters, not on the input.
    Rng rng(11);
    DnnModel m = init_model(rng);
    const auto a = forward(m, {60.0, 40.0, 2.0, 0.95}, ForwardMode::Train);
    const auto b = forward(m, {500.0, 5.0, 9.0, 0.10}, ForwardMode::Train);
    for (std::size_t j = 0; j < 5; ++j) CHECK(a[j] == b[j]);

    // Inference mode does react to the input.
    const auto c = forward(m, {60.0, 40.0, 2.0, 0.95}, ForwardMode::Infer);
    const auto d = forward(m, {500.0, 5.0, 9.0, 0.10}, ForwardMode::Infer);
    bool any_diff = false;
    for (std::size_t j = 0; j < 5; ++j) any_diff = any_diff || c[j] != d[j];
    CHECK(any_diff);

    // And it is deterministic.
    const auto c2 = forward(m, {60.0, 40.0, 2.0, 0.95}, ForwardMode::Infer);
    for (std::size_t j = 0; j < 5; ++j) CHECK(c[j] == c2[j]);

    CHECK_THROWS_AS(
        forward(m, {std::nan(""), 40.0, 2.0, 0.95}, ForwardMode::Infer),
        ConfigError);
}

TEST_CASE("parameter pointers alias the live model") {
    Rng rng(13);
    DnnModel m = init_model(rng);
    const std::array<double, 4> x{100.0, 50.0, 3.0, 0.9};
    const auto before = forward(m, x, ForwardMode::Infer);
    auto params = collect_parameters(m);
    *params[3] += 0.5; // a first-layer weight
    const auto after = forward(m, x, ForwardMode::Infer);
    bool any_diff = false;
    for (std::size_t j = 0; j < 5; ++j) any_diff = any_diff || before[j] != after[j];
    CHECK(any_diff);
}

TEST_CASE("analytic gradients agree with central finite differences") {
    Rng rng(101);
    DnnModel m = init_model(rng);
    // Move away from the all-zero-bias point so rectifier gates are mixed.
    {
        auto params = collect_parameters(m);
        Rng jitter(202);
        for (double* p : params) *p += 0.05 * jitter.normal();
    }
    Rng batch_rng(303);
    const auto batch = random_batch(4, batch_rng);

    std::vector<double> analytic;
    const double loss0 = loss_and_gradients(m, batch, analytic);
    CHECK(std::isfinite(loss0));
    CHECK(loss0 > 0.0);

    auto params = collect_parameters(m);
    REQUIRE(analytic.size() == params.size());

    const double h = 1e-5;
    std::vector<double> fd(params.size());
    std::vector<double> scratch;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = *params[i];
        *params[i] = saved + h;
        const double up = loss_and_gradients(m, batch, scratch);
        *params[i] = saved - h;
        const double down = loss_and_gradients(m, batch, scratch);
        *params[i] = saved;
        fd[i] = (up - down) / (2.0 * h);
    }

    // Compare tensor by tensor in the published parameter order.
    struct Group {
        const char* name;
        std::size_t count;
    };
    std::vector<Group> groups;
    for (int k = 0; k <= kDnnHidden; ++k) {
        const auto in = static_cast<std::size_t>(kDnnLayerSizes[static_cast<std::size_t>(k)]);
        const auto out =
            static_cast<std::size_t>(kDnnLayerSizes[static_cast<std::size_t>(k) + 1]);
        groups.push_back({"dense W", in * out});
        groups.push_back({"dense b", out});
    }
    for (int k = 0; k < kDnnHidden; ++k) {
        const auto f =
            static_cast<std::size_t>(kDnnLayerSizes[static_cast<std::size_t>(k) + 1]);
        groups.push_back({"bn scale", f});
        groups.push_back({"bn shift", f});
    }

    std::size_t offset = 0;
    for (const Group& g : groups) {
        double norm_diff = 0.0, norm_an = 0.0, norm_fd = 0.0;
        for (std::size_t i = offset; i < offset + g.count; ++i) {
            norm_diff += (analytic[i] - fd[i]) * (analytic[i] - fd[i]);
            norm_an += analytic[i] * analytic[i];
            norm_fd += fd[i] * fd[i];
        }
        // Hidden-layer dense biases are absorbed by the normalizer (shifting
        // z shifts the batch mean identically), so both gradient estimates
        // there are pure roundoff; the absolute floor keeps 0-vs-0
        // comparisons from being scored as relative error.
        const double rel = std::sqrt(norm_diff) /
                           std::max({std::sqrt(norm_an), std::sqrt(norm_fd), 1e-6});
        INFO(g.name << " at offset " << offset);
        CHECK(rel < 1e-4);
        offset += g.count;
    }
    CHECK(offset == params.size());
}

TEST_CASE("loss_and_gradients leaves running statistics untouched") {
    Rng rng(17);
    DnnModel m = init_model(rng);
    const DnnModel snapshot = m;
    Rng batch_rng(18);
    const auto batch = random_batch(6, batch_rng);
    std::vector<double> grads;
    (void)loss_and_gradients(m, batch, grads);
    for (int k = 0; k < kDnnHidden; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        CHECK(m.bn[ks].run_mean == snapshot.bn[ks].run_mean);
        CHECK(m.bn[ks].run_var == snapshot.bn[ks].run_var);
    }
    CHECK_THROWS_AS(loss_and_gradients(m, {}, grads), ConfigError);
}

TEST_CASE("a ten-sample dataset is memorized to near-zero error") {
    Rng data_rng(42);
    auto ten = synthetic_dataset(10, data_rng);
    // Positional split: train on the ten samples, validate and test on copies.
    std::vector<TrainingSample> dataset = ten;
    dataset.insert(dataset.end(), ten.begin(), ten.end());
    dataset.insert(dataset.end(), ten.begin(), ten.end());

    TrainSettings settings;
    settings.n_train = 10;
    settings.n_val = 10;
    settings.n_test = 10;
    settings.batch_size = 10; // full batch: the only noise is the optimizer's
    settings.max_epochs = 500;
    settings.learning_rate = 0.025;
    settings.lr_drop_factor = 1.0; // constant rate in the smoke regime

    Rng rng(2024);
    const auto [model, report] = train(dataset, settings, rng);

    REQUIRE(report.train_mse.size() == 500);
    REQUIRE(report.val_mse.size() == 500);
    REQUIRE(report.lr_trace.size() == 500);
    CHECK(report.epochs == 500);
    CHECK(report.train_mse.back() < 1e-4);
    CHECK(evaluate_mse(model, ten) < 1e-3);

    // Checkpoint bookkeeping: the reported best epoch attains the minimum.
    double min_val = report.val_mse[0];
    for (double v : report.val_mse) min_val = std::min(min_val, v);
    CHECK(report.val_mse[static_cast<std::size_t>(report.best_epoch)] ==
          min_val);
    CHECK(report.test_mse == min_val); // test copies equal the val copies

    // Smoothed over 20-epoch windows the loss curve never moves uphill.
    const auto& tr = report.train_mse;
    std::vector<double> smooth;
    for (std::size_t i = 0; i + 20 <= tr.size(); ++i) {
        double acc = 0.0;
        for (std::size_t j = i; j < i + 20; ++j) acc += tr[j];
        smooth.push_back(acc / 20.0);
    }
    for (std::size_t i = 1; i < smooth.size(); ++i)
        CHECK(smooth[i] <= smooth[i - 1] * (1.0 + 1e-6) + 1e-12);
}

TEST_CASE("the learning-rate staircase drops by the configured factor") {
    Rng data_rng(5);
    auto dataset = synthetic_dataset(30, data_rng);
    TrainSettings settings;
    settings.n_train = 20;
    settings.n_val = 5;
    settings.n_test = 5;
    settings.batch_size = 10;
    settings.max_epochs = 25;
    settings.learning_rate = 0.002;
    settings.lr_drop_factor = 0.5;
    settings.lr_drop_period = 10;

    Rng rng(99);
    const auto [model, report] = train(dataset, settings, rng);
    REQUIRE(report.lr_trace.size() == 25);
    for (int e = 0; e < 25; ++e) {
        const double expected = 0.002 * std::pow(0.5, e / 10);
        CHECK(report.lr_trace[static_cast<std::size_t>(e)] ==
              doctest::Approx(expected).epsilon(1e-12));
    }
    // Training must also have moved the running statistics off the defaults.
    bool moved = false;
    for (double v : model.bn[0].run_mean) moved = moved || v != 0.0;
    CHECK(moved);
}

TEST_CASE("training is reproducible for a fixed seed") {
    Rng data_rng(8);
    auto dataset = synthetic_dataset(40, data_rng);
    TrainSettings settings;
    settings.n_train = 30;
    settings.n_val = 5;
    settings.n_test = 5;
    settings.batch_size = 10;
    settings.max_epochs = 15;

    Rng rng_a(777);
    const auto [model_a, report_a] = train(dataset, settings, rng_a);
    Rng rng_b(777);
    const auto [model_b, report_b] = train(dataset, settings, rng_b);

    CHECK(report_a.train_mse == report_b.train_mse);
    CHECK(report_a.val_mse == report_b.val_mse);
    CHECK(report_a.test_mse == report_b.test_mse);
    for (int k = 0; k <= kDnnHidden; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        CHECK(model_a.dense[ks].W == model_b.dense[ks].W);
        CHECK(model_a.dense[ks].b == model_b.dense[ks].b);
    }
    for (int k = 0; k < kDnnHidden; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        CHECK(model_a.bn[ks].run_mean == model_b.bn[ks].run_mean);
        CHECK(model_a.bn[ks].run_var == model_b.bn[ks].run_var);
    }
}

TEST_CASE("models survive a save/load round trip bit for bit") {
    Rng data_rng(21);
    auto dataset = synthetic_dataset(30, data_rng);
    TrainSettings settings;
    settings.n_train = 20;
    settings.n_val = 5;
    settings.n_test = 5;
    settings.batch_size = 10;
    settings.max_epochs = 5;
    Rng rng(31);
    const auto [model, report] = train(dataset, settings, rng);

    const std::string path = "learner_roundtrip.bin";
    save_model(model, path);
    const DnnModel loaded = load_model(path);

    CHECK(loaded.bn_eps == model.bn_eps);
    CHECK(loaded.bn_momentum == model.bn_momentum);
    CHECK(loaded.input_scale == model.input_scale);
    for (int k = 0; k <= kDnnHidden; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        CHECK(loaded.dense[ks].W == model.dense[ks].W);
        CHECK(loaded.dense[ks].b == model.dense[ks].b);
    }
    for (int k = 0; k < kDnnHidden; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        CHECK(loaded.bn[ks].scale == model.bn[ks].scale);
        CHECK(loaded.bn[ks].shift == model.bn[ks].shift);
        CHECK(loaded.bn[ks].run_mean == model.bn[ks].run_mean);
        CHECK(loaded.bn[ks].run_var == model.bn[ks].run_var);
    }

    const std::array<double, 4> x{123.0, 45.0, 2.5, 0.93};
    const auto a = forward(model, x, ForwardMode::Infer);
    const auto b = forward(loaded, x, ForwardMode::Infer);
    for (std::size_t j = 0; j < 5; ++j) CHECK(a[j] == b[j]);

    std::remove(path.c_str());
}

TEST_CASE("loading rejects missing, foreign, and truncated files") {
    CHECK_THROWS_AS(load_model("no_such_model.bin"), ConfigError);

    const std::string garbage = "learner_garbage.bin";
    {
        std::ofstream os(garbage, std::ios::binary);
        os << "definitely not a model";
    }
    CHECK_THROWS_AS(load_model(garbage), ConfigError);
    std::remove(garbage.c_str());

    Rng rng(3);
    DnnModel m = init_model(rng);
    const std::string full = "learner_full.bin";
    const std::string cut = "learner_cut.bin";
    save_model(m, full);
    {
        std::ifstream is(full, std::ios::binary);
        std::vector<char> bytes((std::istreambuf_iterator<char>(is)),
                                std::istreambuf_iterator<char>());
        std::ofstream os(cut, std::ios::binary);
        os.write(bytes.data(),
                 static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS_AS(load_model(cut), ConfigError);
    std::remove(full.c_str());
    std::remove(cut.c_str());
}

TEST_CASE("prediction denormalizes into a valid strategy") {
    SystemConfig cfg;
    cfg.n_T = 8;
    cfg.sigma_n = 1.0;
    cfg.gamma_min = 1.0;
    cfg.gamma_max = 1000.0;
    ImageSpec img;
    img.N_roi = 60;
    img.N_bg = 40;
    img.D_lim = 20;

    // Zeroed hidden layers make the network output exactly the final biases,
    // so the denormalization rules can be checked against hand values.
    DnnModel m = zero_model();

    SUBCASE("interior outputs pass through with frame snapping") {
        m.dense[kDnnHidden].b = {0.5, 1.2, 0.0002, 0.7, 0.32};
        const TxParams tx = predict(m, cfg, img);
        CHECK(tx.zeta == 0.5);
        CHECK(tx.P_p == 1000.0);                      // clamped to the top
        CHECK(tx.P_s == doctest::Approx(1.000001));   // clamped to the floor
        CHECK(tx.nu == doctest::Approx(0.7 * 32.0));
        CHECK(tx.L_s == 20); // 60 * 0.32 = 19.2 snaps up to 20
        CHECK_NOTHROW(tx.validate(cfg));
    }

    SUBCASE("frame-length ties resolve toward the smaller divisor") {
        m.dense[kDnnHidden].b = {0.5, 0.5, 0.5, 0.5, 17.5 / 60.0};
        CHECK(predict(m, cfg, img).L_s == 15); // 15 and 20 both 2.5 away
    }

    SUBCASE("wild outputs clamp into the box") {
        m.dense[kDnnHidden].b = {-2.0, 3.0, -1.0, 1.4, -0.5};
        const TxParams tx = predict(m, cfg, img);
        CHECK(tx.zeta == 1e-3);
        CHECK(tx.P_p == 1000.0);
        CHECK(tx.P_s == doctest::Approx(1.000001));
        CHECK(tx.nu == 32.0);
        CHECK(tx.L_s == 1);
        CHECK_NOTHROW(tx.validate(cfg));
    }

    SUBCASE("an empty image has no frame length to pick") {
        ImageSpec empty = img;
        empty.N_roi = 0;
        CHECK_THROWS_AS(predict(m, cfg, empty), ConfigError);
    }
}

TEST_CASE("training rejects malformed datasets and settings") {
    Rng data_rng(9);
    auto dataset = synthetic_dataset(30, data_rng);
    TrainSettings settings;
    settings.n_train = 20;
    settings.n_val = 5;
    settings.n_test = 5;
    settings.max_epochs = 2;
    Rng rng(1);

    SUBCASE("dataset smaller than the split") {
        dataset.resize(29);
        CHECK_THROWS_AS(train(dataset, settings, rng), ConfigError);
    }
    SUBCASE("target outside the unit box") {
        dataset[3].target[2] = 0.0;
        CHECK_THROWS_AS(train(dataset, settings, rng), ConfigError);
        dataset[3].target[2] = 1.5;
        CHECK_THROWS_AS(train(dataset, settings, rng), ConfigError);
    }
    SUBCASE("nonpositive input") {
        dataset[7].input[0] = 0.0;
        CHECK_THROWS_AS(train(dataset, settings, rng), ConfigError);
    }
    SUBCASE("correlation above one") {
        dataset[7].input[3] = 1.2;
        CHECK_THROWS_AS(train(dataset, settings, rng), ConfigError);
    }
    SUBCASE("broken settings") {
        TrainSettings bad = settings;
        bad.batch_size = 0;
        CHECK_THROWS_AS(train(dataset, bad, rng), ConfigError);
        bad = settings;
        bad.learning_rate = 0.0;
        CHECK_THROWS_AS(train(dataset, bad, rng), ConfigError);
        bad = settings;
        bad.lr_drop_factor = 1.5;
        CHECK_THROWS_AS(train(dataset, bad, rng), ConfigError);
        bad = settings;
        bad.max_epochs = 0;
        CHECK_THROWS_AS(train(dataset, bad, rng), ConfigError);
        bad = settings;
        bad.adam_beta2 = 1.0;
        CHECK_THROWS_AS(train(dataset, bad, rng), ConfigError);
        bad = settings;
        bad.n_val = 0;
        CHECK_THROWS_AS(train(dataset, bad, rng), ConfigError);
    }
}

TEST_CASE("a diverging run aborts with a diagnostic instead of returning") {
    Rng data_rng(12);
    auto dataset = synthetic_dataset(30, data_rng);
    TrainSettings settings;
    settings.n_train = 20;
    settings.n_val = 5;
    settings.n_test = 5;
    settings.batch_size = 5;
    settings.max_epochs = 200;
    // Batch normalization re-standardizes each layer, so a merely large rate
    // settles into a bounded limit cycle; an astronomically large one is
    // needed to push the squared loss past the floating-point ceiling.
    settings.learning_rate = 1e100;
    Rng rng(4);
    try {
        (void)train(dataset, settings, rng);
        FAIL("expected a NumericalError");
    } catch (const NumericalError& err) {
        CHECK(std::string(err.what()).find("epoch") != std::string::npos);
    }
}
