#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "qosec/cli.hpp"

using namespace qosec;
using nlohmann::json;

namespace {

int run_cli(const std::vector<std::string>& args, std::string* out_text = nullptr,
            std::string* err_text = nullptr) {
    std::ostringstream out, err;
    const int code = cli_main(args, out, err);
    if (out_text) *out_text = out.str();
    if (err_text) *err_text = err.str();
    return code;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream os(path);
    REQUIRE(os.good());
    os << content;
}

std::string read_file(const std::string& path) {
    std::ifstream is(path);
    REQUIRE(is.good());
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// The low-path-loss reference scenario whose analytic numbers are pinned
// throughout the test suite.
json base_config() {
    return json{
        {"system",
         {{"n_T", 8},
          {"eta", 4.0},
          {"lambda_E", 0.2},
          {"ratio_BT_b", 6.25},
          {"sigma_n", 1.0},
          {"r_D", 2.8284271247461903},
          {"rho", 0.95},
          {"gamma_min", 0.1},
          {"gamma_max", 1000.0}}},
        {"tx",
         {{"zeta", 0.5}, {"P_p", 44.0}, {"P_s", 44.0}, {"nu", 1.0}, {"L_s", 10}}},
        {"image", {{"N_roi", 60}, {"N_bg", 0}, {"D_lim", 24}}},
        {"scenario", {{"mode", "nce"}}},
        {"seed", 7}};
}

struct Csv {
    std::vector<std::string> comments;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::size_t col(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        REQUIRE_MESSAGE(false, "missing column " << name);
        return 0;
    }
    double number(std::size_t row, const std::string& name) const {
        return std::stod(rows[row][col(name)]);
    }
};

Csv parse_csv(const std::string& text) {
    Csv csv;
    std::stringstream ss(text);
    std::string line;
    bool have_header = false;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            csv.comments.push_back(line);
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        // a trailing empty cell is dropped by getline; restore it
        if (!line.empty() && line.back() == ',') cells.push_back("");
        if (!have_header) {
            csv.columns = cells;
            have_header = true;
        } else {
            cells.resize(csv.columns.size());
            csv.rows.push_back(cells);
        }
    }
    return csv;
}

struct TempFile {
    std::string path;
    explicit TempFile(std::string p) : path(std::move(p)) {}
    ~TempFile() { std::remove(path.c_str()); }
};

} // namespace

TEST_CASE("the qvp command reports analysis, simulation, and provenance") {
    TempFile cfg("cli_qvp.json");
    TempFile records("cli_qvp_records.jsonl");
    json doc = base_config();
    doc["mc"] = {{"trials", 2000}, {"tolerance", 0.02}, {"records", records.path}};
    write_file(cfg.path, doc.dump());

    std::string out;
    REQUIRE(run_cli({"qvp", "--config", cfg.path}, &out) == kExitOk);
    const json result = json::parse(out);

    CHECK(result["analytic"]["qvp"].get<double>() ==
          doctest::Approx(0.0449192941670077).epsilon(1e-9));
    CHECK(result["analytic"]["Omega"].get<double>() ==
          doctest::Approx(0.3993406058616602).epsilon(1e-9));
    CHECK(result["analytic"]["N_tilde"].get<long long>() == 6);
    CHECK(result["simulation"]["trials"].get<long long>() == 2000);
    CHECK(result["simulation"]["agree"].get<bool>());
    CHECK(result["provenance"]["seed"].get<std::uint64_t>() == 7);
    CHECK(result["provenance"]["build"].get<std::string>() == kBuildId);
    CHECK(result["provenance"]["config_hash"].get<std::string>().size() == 16);

    // Byte-identical on a rerun.
    std::string again;
    REQUIRE(run_cli({"qvp", "--config", cfg.path}, &again) == kExitOk);
    CHECK(out == again);

    // One record per trial, each a JSON object with the outcome fields.
    std::stringstream rec(read_file(records.path));
    std::string line;
    long long lines = 0;
    while (std::getline(rec, line)) {
        if (lines == 0) {
            const json first = json::parse(line);
            CHECK(first.contains("T_D"));
            CHECK(first.contains("T_E"));
            CHECK(first.contains("delay_violated"));
        }
        ++lines;
    }
    CHECK(lines == 2000);
}

TEST_CASE("degenerate scenarios collapse to their known values") {
    TempFile cfg("cli_qvp_degenerate.json");

    SUBCASE("a quiet field has no intercept term") {
        json doc = base_config();
        doc["system"]["lambda_E"] = 0.0;
        write_file(cfg.path, doc.dump());
        std::string out;
        REQUIRE(run_cli({"qvp", "--config", cfg.path}, &out) == kExitOk);
        CHECK(json::parse(out)["analytic"]["intercept_term"].get<double>() ==
              0.0);
    }

    SUBCASE("a deadline below the minimum schedule is always violated") {
        json doc = base_config();
        doc["image"]["D_lim"] = 4; // six slots are needed at a minimum
        write_file(cfg.path, doc.dump());
        std::string out;
        REQUIRE(run_cli({"qvp", "--config", cfg.path}, &out) == kExitOk);
        CHECK(json::parse(out)["analytic"]["qvp"].get<double>() == 1.0);
    }
}

TEST_CASE("decibel and linear power windows are interchangeable") {
    TempFile lin("cli_lin.json");
    TempFile db("cli_db.json");
    json doc = base_config();
    write_file(lin.path, doc.dump());
    doc["system"].erase("gamma_max");
    doc["system"]["gamma_max_db"] = 30.0;
    write_file(db.path, doc.dump());

    std::string out_lin, out_db;
    REQUIRE(run_cli({"qvp", "--config", lin.path}, &out_lin) == kExitOk);
    REQUIRE(run_cli({"qvp", "--config", db.path}, &out_db) == kExitOk);
    CHECK(json::parse(out_lin)["analytic"]["qvp"].get<double>() ==
          json::parse(out_db)["analytic"]["qvp"].get<double>());

    // Giving both spellings at once is ambiguous and rejected.
    doc["system"]["gamma_max"] = 1000.0;
    write_file(db.path, doc.dump());
    std::string err;
    CHECK(run_cli({"qvp", "--config", db.path}, nullptr, &err) == kExitConfig);
    CHECK(err.find("not both") != std::string::npos);
}

TEST_CASE("configuration mistakes are rejected with their location") {
    TempFile cfg("cli_bad.json");
    std::string err;

    SUBCASE("unknown nested key") {
        json doc = base_config();
        doc["system"]["n_t"] = 8;
        write_file(cfg.path, doc.dump());
        CHECK(run_cli({"qvp", "--config", cfg.path}, nullptr, &err) ==
              kExitConfig);
        CHECK(err.find("config.system") != std::string::npos);
        CHECK(err.find("n_t") != std::string::npos);
    }
    SUBCASE("unknown top-level key") {
        json doc = base_config();
        doc["systems"] = json::object();
        write_file(cfg.path, doc.dump());
        CHECK(run_cli({"qvp", "--config", cfg.path}, nullptr, &err) ==
              kExitConfig);
        CHECK(err.find("unknown key 'systems'") != std::string::npos);
    }
    SUBCASE("wrong value type") {
        json doc = base_config();
        doc["tx"]["L_s"] = "ten";
        write_file(cfg.path, doc.dump());
        CHECK(run_cli({"qvp", "--config", cfg.path}, nullptr, &err) ==
              kExitConfig);
        CHECK(err.find("tx.L_s") != std::string::npos);
    }
    SUBCASE("malformed document") {
        write_file(cfg.path, "{\"system\": ");
        CHECK(run_cli({"qvp", "--config", cfg.path}, nullptr, &err) ==
              kExitConfig);
    }
    SUBCASE("missing file") {
        CHECK(run_cli({"qvp", "--config", "no_such_config.json"}, nullptr,
                      &err) == kExitConfig);
    }
    SUBCASE("bad enum value") {
        json doc = base_config();
        doc["scenario"]["mode"] = "both";
        write_file(cfg.path, doc.dump());
        CHECK(run_cli({"qvp", "--config", cfg.path}, nullptr, &err) ==
              kExitConfig);
        CHECK(err.find("nce") != std::string::npos);
    }
    SUBCASE("usage errors") {
        CHECK(run_cli({"qvp"}, nullptr, &err) == kExitConfig);
        CHECK(run_cli({"frobnicate", "--config", "x.json"}, nullptr, &err) ==
              kExitConfig);
        CHECK(run_cli({}, nullptr, &err) == kExitConfig);
    }
}

TEST_CASE("help lists every command") {
    std::string out;
    CHECK(run_cli({"--help"}, &out) == kExitOk);
    for (const char* name : {"qvp", "sweep", "min-ls", "optimize",
                             "gen-dataset", "train", "predict"})
        CHECK(out.find(name) != std::string::npos);
}

TEST_CASE("exit codes separate config, infeasible, and numerical failures") {
    TempFile cfg("cli_exit.json");
    std::string err;

    SUBCASE("infeasible frame-length request") {
        json doc = base_config();
        doc["system"]["lambda_E"] = 5.0;
        doc["tx"]["zeta"] = 1.0; // no artificial noise at all
        doc["min_ls"] = {{"epsilon", 1e-9}};
        write_file(cfg.path, doc.dump());
        CHECK(run_cli({"min-ls", "--config", cfg.path}, nullptr, &err) ==
              kExitInfeasible);
        CHECK(err.find("infeasible") != std::string::npos);
    }

    SUBCASE("diverging training run") {
        TempFile data("cli_exit_data.csv");
        std::string csv = "N_roi,N_bg,r_D,rho,zeta,p_pub_norm,p_sec_norm,"
                          "nu_norm,ls_norm\n";
        for (int i = 0; i < 12; ++i) {
            csv += std::to_string(40 + i * 3) + "," + std::to_string(10 + i) +
                   ",2.5,0.93,0.5,0.8,0.8,0.3,0.25\n";
        }
        write_file(data.path, csv);
        json doc;
        doc["train"] = {{"dataset", data.path}, {"model_out", "cli_exit.bin"},
                        {"n_train", 10},        {"n_val", 1},
                        {"n_test", 1},          {"batch_size", 5},
                        {"max_epochs", 50},     {"learning_rate", 1e100}};
        write_file(cfg.path, doc.dump());
        TempFile model("cli_exit.bin");
        CHECK(run_cli({"train", "--config", cfg.path}, nullptr, &err) ==
              kExitNumerical);
        CHECK(err.find("numerical") != std::string::npos);
        CHECK(err.find("epoch") != std::string::npos);
    }

    SUBCASE("training data that does not exist") {
        json doc;
        doc["train"] = {{"dataset", "no_such_data.csv"},
                        {"model_out", "never_written.bin"}};
        write_file(cfg.path, doc.dump());
        CHECK(run_cli({"train", "--config", cfg.path}, nullptr, &err) ==
              kExitConfig);
    }
}

TEST_CASE("the minimum frame length matches the frozen reference values") {
    TempFile cfg("cli_minls.json");
    json doc = base_config();
    doc["system"]["r_D"] = 2.0;
    doc["tx"] = {{"zeta", 0.5}, {"P_p", 1000.0}, {"P_s", 1000.0}, {"nu", 6.0},
                 {"L_s", 10}};
    doc["min_ls"] = {{"epsilon", 0.10}};
    write_file(cfg.path, doc.dump());

    std::string out;
    REQUIRE(run_cli({"min-ls", "--config", cfg.path}, &out) == kExitOk);
    const json result = json::parse(out);
    CHECK(result["L_s"].get<int>() == 20);
    CHECK(result["frame_intercept_probability"].get<double>() <= 0.10);
}

TEST_CASE("sweeps tabulate scenarios in deterministic grid order") {
    TempFile cfg("cli_sweep.json");

    SUBCASE("deadline sweep is monotone and covers both scenarios") {
        json doc = base_config();
        doc["sweep"] = {{"axis", "D_lim"},
                        {"values", {8, 12, 16, 20, 24}},
                        {"scenarios", {"nce", "ce"}}};
        write_file(cfg.path, doc.dump());
        std::string out;
        REQUIRE(run_cli({"sweep", "--config", cfg.path}, &out) == kExitOk);
        const Csv csv = parse_csv(out);
        REQUIRE(csv.rows.size() == 10);
        CHECK(csv.comments.size() == 3);
        CHECK(csv.comments[0].find("config_hash") != std::string::npos);
        CHECK(csv.comments[1].find("seed") != std::string::npos);
        CHECK(csv.comments[2].find("build") != std::string::npos);

        // Scenario blocks in request order, grid values ascending within.
        for (std::size_t i = 0; i < 5; ++i) {
            CHECK(csv.rows[i][csv.col("scenario")] == "nce");
            CHECK(csv.rows[i + 5][csv.col("scenario")] == "ce");
        }
        for (std::size_t i = 1; i < 5; ++i) {
            CHECK(csv.number(i, "qvp") <= csv.number(i - 1, "qvp") + 1e-12);
            CHECK(csv.number(i + 5, "qvp") <=
                  csv.number(i + 4, "qvp") + 1e-12);
        }
        // No simulation requested: those cells stay empty.
        CHECK(csv.rows[0][csv.col("qvp_sim")].empty());
        CHECK(csv.rows[0][csv.col("agree")].empty());
    }

    SUBCASE("deadline sweep with simulation agrees with the analysis") {
        json doc = base_config();
        doc["mc"] = {{"trials", 1500}};
        doc["sweep"] = {{"axis", "D_lim"},
                        {"values", {12, 24}},
                        {"simulate", true}};
        write_file(cfg.path, doc.dump());
        std::string out;
        REQUIRE(run_cli({"sweep", "--config", cfg.path}, &out) == kExitOk);
        const Csv csv = parse_csv(out);
        REQUIRE(csv.rows.size() == 2);
        for (std::size_t i = 0; i < 2; ++i) {
            CHECK(csv.rows[i][csv.col("agree")] == "1");
            CHECK(csv.number(i, "qvp_sim_std_err") > 0.0);
        }
    }

    SUBCASE("a more coherent channel cannot hurt") {
        json doc = base_config();
        doc["sweep"] = {{"axis", "rho"}, {"values", {0.90, 0.95}}};
        write_file(cfg.path, doc.dump());
        std::string out;
        REQUIRE(run_cli({"sweep", "--config", cfg.path}, &out) == kExitOk);
        const Csv csv = parse_csv(out);
        REQUIRE(csv.rows.size() == 2);
        CHECK(csv.number(1, "qvp") < csv.number(0, "qvp"));
    }

    SUBCASE("the scenario flag overrides the configured model") {
        json doc = base_config();
        doc["sweep"] = {{"axis", "D_lim"}, {"values", {12, 24}}};
        write_file(cfg.path, doc.dump());
        std::string out;
        REQUIRE(run_cli({"sweep", "--config", cfg.path, "--scenario", "ce"},
                        &out) == kExitOk);
        const Csv csv = parse_csv(out);
        REQUIRE(csv.rows.size() == 2);
        CHECK(csv.rows[0][csv.col("scenario")] == "ce");
    }

    SUBCASE("bad axes and fractional grids are rejected") {
        json doc = base_config();
        doc["sweep"] = {{"axis", "bandwidth"}, {"values", {1, 2}}};
        write_file(cfg.path, doc.dump());
        std::string err;
        CHECK(run_cli({"sweep", "--config", cfg.path}, nullptr, &err) ==
              kExitConfig);
        CHECK(err.find("axis") != std::string::npos);

        doc["sweep"] = {{"axis", "D_lim"}, {"values", {8.5}}};
        write_file(cfg.path, doc.dump());
        CHECK(run_cli({"sweep", "--config", cfg.path}, nullptr, &err) ==
              kExitConfig);
    }

    SUBCASE("a workload sweep keeps the frame constraint") {
        json doc = base_config();
        doc["image"] = {{"N_roi", 60}, {"N_bg", 40}, {"D_lim", 40}};
        doc["sweep"] = {{"axis", "N_total"}, {"values", {50, 100, 200}}};
        write_file(cfg.path, doc.dump());
        std::string out;
        REQUIRE(run_cli({"sweep", "--config", cfg.path}, &out) == kExitOk);
        CHECK(parse_csv(out).rows.size() == 3);
    }
}

TEST_CASE("the optimizer front end honours pins and baselines") {
    TempFile cfg_mp("cli_opt_mp.json");
    TempFile cfg_pin("cli_opt_pin.json");
    json doc = base_config();
    doc["seed"] = 9;
    doc["optimizer"] = {{"eps_IP", 0.1}, {"population", 24}, {"generations", 10},
                        {"baseline", "mp"}};
    write_file(cfg_mp.path, doc.dump());

    doc["optimizer"] = {{"eps_IP", 0.1},
                        {"population", 24},
                        {"generations", 10},
                        {"pins", {{"p_pub_norm", 1.0}, {"p_sec_norm", 1.0}}}};
    write_file(cfg_pin.path, doc.dump());

    std::string out_mp, out_pin;
    REQUIRE(run_cli({"optimize", "--config", cfg_mp.path}, &out_mp) == kExitOk);
    REQUIRE(run_cli({"optimize", "--config", cfg_pin.path}, &out_pin) ==
            kExitOk);

    const json mp = json::parse(out_mp);
    const json pin = json::parse(out_pin);
    CHECK(mp["tx"] == pin["tx"]);
    CHECK(mp["qvp"] == pin["qvp"]);
    CHECK(mp["history"] == pin["history"]);
    CHECK(mp["tx"]["P_p"].get<double>() == 1000.0);
    CHECK(mp["tx"]["P_s"].get<double>() == 1000.0);
    CHECK(mp["feasible"].get<bool>());
    CHECK(mp["evaluations"].get<long long>() > 24 + 10 * 22);
    CHECK(mp["evaluations"].get<long long>() <= 24 + 10 * 22 + 8001);

    std::string err;
    json bad = json::parse(read_file(cfg_mp.path));
    bad["optimizer"]["baseline"] = "qp";
    write_file(cfg_mp.path, bad.dump());
    CHECK(run_cli({"optimize", "--config", cfg_mp.path}, nullptr, &err) ==
          kExitConfig);
}

TEST_CASE("datasets regenerate byte for byte and feed the predictor") {
    TempFile cfg("cli_chain.json");
    TempFile ds_a("cli_chain_a.csv");
    TempFile ds_b("cli_chain_b.csv");
    TempFile model("cli_chain_model.bin");
    TempFile mem_csv("cli_chain_mem.csv");

    json doc;
    doc["system"] = base_config()["system"];
    doc["scenario"] = {{"mode", "nce"}};
    doc["optimizer"] = {{"eps_IP", 0.1}, {"population", 12}, {"generations", 6}};
    doc["dataset"] = {{"count", 6},         {"N_roi", {20, 60}},
                      {"N_bg", {0, 30}},    {"r_D", {1.5, 3.5}},
                      {"rho", {0.85, 0.99}}, {"D_lim_factor", 0.4}};
    doc["seed"] = 11;
    write_file(cfg.path, doc.dump());

    REQUIRE(run_cli({"gen-dataset", "--config", cfg.path, "--out", ds_a.path}) ==
            kExitOk);
    REQUIRE(run_cli({"gen-dataset", "--config", cfg.path, "--out", ds_b.path}) ==
            kExitOk);
    CHECK(read_file(ds_a.path) == read_file(ds_b.path));

    const Csv generated = parse_csv(read_file(ds_a.path));
    REQUIRE(generated.rows.size() == 6);
    for (std::size_t i = 0; i < generated.rows.size(); ++i) {
        CHECK(generated.number(i, "N_roi") >= 20);
        CHECK(generated.number(i, "N_roi") <= 60);
        CHECK(generated.number(i, "zeta") > 0.0);
        CHECK(generated.number(i, "zeta") <= 1.0);
        CHECK(generated.number(i, "ls_norm") > 0.0);
        CHECK(generated.number(i, "ls_norm") <= 1.0);
    }

    // Pinned genes pass through the labeled search into the emitted rows.
    {
        TempFile ds_pin("cli_chain_pin.csv");
        json pinned = doc;
        pinned["dataset"]["count"] = 3;
        pinned["optimizer"]["pins"] = {{"nu_norm", 0.25}, {"zeta", 0.5}};
        write_file(cfg.path, pinned.dump());
        REQUIRE(run_cli({"gen-dataset", "--config", cfg.path, "--out",
                         ds_pin.path}) == kExitOk);
        const Csv rows = parse_csv(read_file(ds_pin.path));
        REQUIRE(rows.rows.size() == 3);
        for (std::size_t i = 0; i < rows.rows.size(); ++i) {
            CHECK(rows.number(i, "nu_norm") == doctest::Approx(0.25).epsilon(1e-12));
            CHECK(rows.number(i, "zeta") == doctest::Approx(0.5).epsilon(1e-12));
        }
        write_file(cfg.path, doc.dump());
    }

    // A handcrafted, memorizable table exercises train + predict end to end.
    {
        std::ostringstream csv;
        csv << "N_roi,N_bg,r_D,rho,zeta,p_pub_norm,p_sec_norm,nu_norm,ls_norm,"
               "feasible\n";
        for (int i = 0; i < 10; ++i) {
            const double n_roi = 30 + 6 * i;
            const double n_bg = 10 + 2 * i;
            const double r = 1.5 + 0.2 * i;
            const double rho = 0.86 + 0.012 * i;
            csv << n_roi << "," << n_bg << "," << r << "," << rho << ","
                << 0.3 + 0.05 * i << "," << 0.9 << "," << 0.8 << ","
                << 0.2 + 0.03 * i << "," << 0.25 << ",1\n";
        }
        write_file(mem_csv.path, csv.str());
    }

    json train_doc;
    train_doc["train"] = {{"dataset", mem_csv.path},
                          {"model_out", model.path},
                          {"n_train", 8},
                          {"n_val", 1},
                          {"n_test", 1},
                          {"batch_size", 8},
                          {"max_epochs", 400},
                          {"learning_rate", 0.025},
                          {"lr_drop_factor", 1.0}};
    train_doc["seed"] = 2024;
    TempFile train_cfg("cli_chain_train.json");
    write_file(train_cfg.path, train_doc.dump());

    std::string train_out;
    REQUIRE(run_cli({"train", "--config", train_cfg.path}, &train_out) ==
            kExitOk);
    const json report = json::parse(train_out);
    CHECK(report["samples_used"].get<int>() == 10);
    CHECK(report["train_mse_final"].get<double>() < 1e-3);

    // Predict on the first training scenario: the strategy must come back
    // close to its label, up to the clamping and divisor snapping.
    json pred_doc;
    pred_doc["predict"] = {{"model", model.path}};
    pred_doc["system"] = base_config()["system"];
    pred_doc["system"]["r_D"] = 1.5;
    pred_doc["system"]["rho"] = 0.86;
    pred_doc["image"] = {{"N_roi", 30}, {"N_bg", 10}, {"D_lim", 12}};
    TempFile pred_cfg("cli_chain_pred.json");
    write_file(pred_cfg.path, pred_doc.dump());

    std::string pred_out;
    REQUIRE(run_cli({"predict", "--config", pred_cfg.path}, &pred_out) ==
            kExitOk);
    const json pred = json::parse(pred_out);
    const double zeta = pred["tx"]["zeta"].get<double>();
    const double p_pub = pred["tx"]["P_p"].get<double>() / 1000.0;
    const double p_sec = pred["tx"]["P_s"].get<double>() / 1000.0;
    const double nu = pred["tx"]["nu"].get<double>();
    const int ls = pred["tx"]["L_s"].get<int>();
    CHECK(std::abs(zeta - 0.3) < 0.15);
    CHECK(std::abs(p_pub - 0.9) < 0.15);
    CHECK(std::abs(p_sec - 0.8) < 0.15);
    CHECK(std::abs(nu / 32.0 - 0.2) < 0.15);
    CHECK(30 % ls == 0);
    CHECK(std::abs(ls / 30.0 - 0.25) < 0.2);
    CHECK_FALSE(pred.contains("analytic")); // no scenario section given

    // With a scenario the report also carries the analysis of the strategy.
    pred_doc["scenario"] = {{"mode", "nce"}};
    write_file(pred_cfg.path, pred_doc.dump());
    REQUIRE(run_cli({"predict", "--config", pred_cfg.path}, &pred_out) ==
            kExitOk);
    CHECK(json::parse(pred_out).contains("analytic"));

    // A missing model is a configuration error.
    pred_doc["predict"]["model"] = "no_such_model.bin";
    write_file(pred_cfg.path, pred_doc.dump());
    std::string err;
    CHECK(run_cli({"predict", "--config", pred_cfg.path}, nullptr, &err) ==
          kExitConfig);
}

TEST_CASE("flag overrides reshape the effective configuration") {
    TempFile cfg("cli_flags.json");
    write_file(cfg.path, base_config().dump());

    std::string out;
    REQUIRE(run_cli({"qvp", "--config", cfg.path, "--seed", "42", "--trials",
                     "64", "--scenario", "ce"},
                    &out) == kExitOk);
    const json result = json::parse(out);
    CHECK(result["provenance"]["seed"].get<std::uint64_t>() == 42);
    CHECK(result["simulation"]["trials"].get<long long>() == 64);
    // The collusion model changes the analytic answer.
    CHECK(result["analytic"]["qvp"].get<double>() > 0.5);

    // --out routes the report into a file instead of the stream.
    TempFile report("cli_flags_report.json");
    std::string stream_out;
    REQUIRE(run_cli({"qvp", "--config", cfg.path, "--out", report.path},
                    &stream_out) == kExitOk);
    CHECK(stream_out.empty());
    CHECK(json::parse(read_file(report.path))["analytic"]["qvp"].get<double>() ==
          doctest::Approx(0.0449192941670077).epsilon(1e-9));
}
